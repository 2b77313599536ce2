"""The curated pitfall / strategy / trap lists injected into prompts."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

SECTIONS = ("pitfalls", "strategies", "traps")


class KnowledgeError(ValueError):
    pass


@dataclass(frozen=True)
class KnowledgeBase:
    pitfalls: tuple[str, ...]
    strategies: tuple[str, ...]
    traps: tuple[str, ...]

    def is_complete(self) -> bool:
        return bool(self.pitfalls and self.strategies and self.traps)

    @classmethod
    def from_text(cls, text: str) -> "KnowledgeBase":
        items: dict[str, list[str]] = {k: [] for k in SECTIONS}
        current = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip().lower()
                if current not in items:
                    raise KnowledgeError(f"line {lineno}: unknown section [{current}]")
                continue
            if current is None:
                raise KnowledgeError(f"line {lineno}: item outside any section")
            items[current].append(line)
        return cls(*(tuple(items[k]) for k in SECTIONS))

    @classmethod
    def load(cls, path: str | Path | None = None) -> "KnowledgeBase":
        """Read a knowledge file; without a path, the packaged default."""
        if path is None:
            text = resources.files("mepvrp.mep").joinpath("knowledge.txt").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.from_text(text)
