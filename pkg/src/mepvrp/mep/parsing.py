"""Extract a candidate payload from a generator's free-text reply."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any

_FENCE = re.compile(r"^```[ \t]*([\w+-]*)[ \t]*\n(.*?)^```[ \t]*$", re.DOTALL | re.MULTILINE)
_HYPOTHESIS = re.compile(r"^\s*\**Hypothesis\**\s*:\s*(.+)$", re.MULTILINE | re.IGNORECASE)
_REFLECTION = re.compile(r"^\s*\**Reflection\**\s*:\s*(.+)", re.MULTILINE | re.IGNORECASE | re.DOTALL)


class ResponseError(ValueError):
    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(f"{kind}: {message}")


@dataclass(frozen=True)
class ParsedResponse:
    kind: str
    payload: Any
    hypothesis: str = ""
    reflection: str = ""


def _registry_doc(text: str) -> dict | None:
    try:
        doc = json.loads(text)
    except ValueError:
        return None
    if isinstance(doc, dict) and isinstance(doc.get("operator"), str):
        params = doc.get("params", {})
        if not isinstance(params, dict):
            raise ResponseError("bad-registry-document", "params must be an object")
        return {"operator": doc["operator"], "params": params}
    return None


def parse_generator_response(text: str) -> ParsedResponse:
    """One fenced code block becomes an external-source payload.

    A reply holding a JSON object with an ``operator`` key (bare, or as the
    single fenced block) becomes a registry-params payload instead.
    """
    blocks = _FENCE.findall(text)
    outside = _FENCE.sub("", text)
    hyp = _HYPOTHESIS.search(outside)
    hypothesis = hyp.group(1).strip() if hyp else ""
    ref = _REFLECTION.search(outside)
    reflection = ref.group(1).strip() if ref else ""

    if len(blocks) > 1:
        raise ResponseError("multiple-code-blocks", f"expected one fenced block, found {len(blocks)}")
    if len(blocks) == 1:
        lang, body = blocks[0]
        if lang.lower() == "json" or (not lang and body.lstrip().startswith("{")):
            doc = _registry_doc(body)
            if doc is not None:
                return ParsedResponse("registry-params", doc, hypothesis, reflection)
        return ParsedResponse("external-source", body.rstrip("\n") + "\n", hypothesis, reflection)

    # Bare JSON documents may follow a hypothesis line.
    start = text.find("{")
    if start >= 0:
        doc = _registry_doc(text[start:text.rfind("}") + 1])
        if doc is not None:
            return ParsedResponse("registry-params", doc, hypothesis, reflection)
    raise ResponseError("no-code-block", "reply contains no fenced code block")
