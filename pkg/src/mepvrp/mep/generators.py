"""Candidate generators: deterministic mocks and an HTTP binding."""

from __future__ import annotations

import itertools
import json
import os
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence


class GeneratorUnavailable(RuntimeError):
    kind = "generator-unavailable"


@dataclass(frozen=True)
class Request:
    """What a generator is asked for: the prompt plus where it sits in the run."""

    prompt: str
    seed: int
    generation: int
    index: int
    parent_ids: tuple[str, ...] = ()


class Generator(Protocol):
    def generate(self, request: Request) -> str: ...


def registry_reply(operator: str, params: dict, hypothesis: str = "") -> str:
    doc = json.dumps({"operator": operator, "params": params}, sort_keys=True)
    head = f"Hypothesis: {hypothesis}\n\n" if hypothesis else ""
    return head + "```json\n" + doc + "\n```\n"


class ScriptedGenerator:
    """Replays a fixed list of replies, or a function of the request.

    With a list, reply ``i`` answers the ``i``-th request of a seed; after the
    list runs out the last reply repeats, or the generator reports itself
    unavailable when ``exhaust=True``.
    """

    def __init__(self, replies: Sequence[str] | Callable[[Request], str], exhaust: bool = False):
        self.replies = replies
        self.exhaust = exhaust
        self._count: dict[int, int] = {}

    def generate(self, request: Request) -> str:
        if callable(self.replies):
            return self.replies(request)
        i = self._count.get(request.seed, 0)
        self._count[request.seed] = i + 1
        if i >= len(self.replies):
            if self.exhaust or not self.replies:
                raise GeneratorUnavailable("scripted generator has no replies left")
            i = len(self.replies) - 1
        return self.replies[i]


# A small lattice around the stratified selector's defaults.
DEFAULT_LATTICE = {
    "t_size": [3, 7, 11],
    "w_struct": [0.35, 0.55, 0.75],
    "allow_infeasible_prob": [0.1, 0.2, 0.4],
}


@dataclass
class LatticeGenerator:
    """Walks a parameter lattice of one registry operator in a seeded order.

    Ignores the prompt. Each seed visits the lattice points in its own
    shuffled order, so reruns with the same seed emit the same sequence.
    """

    operator: str = "hybrid"
    lattice: dict = field(default_factory=lambda: dict(DEFAULT_LATTICE))
    _orders: dict = field(default_factory=dict, init=False, repr=False)
    _count: dict = field(default_factory=dict, init=False, repr=False)

    def points(self) -> list[dict]:
        keys = sorted(self.lattice)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.lattice[k] for k in keys))]

    def generate(self, request: Request) -> str:
        from ..rng import RandomNumberGenerator, derive_seed

        if request.seed not in self._orders:
            order = self.points()
            RandomNumberGenerator(derive_seed(request.seed, 7919)).shuffle(order)
            self._orders[request.seed] = order
        order = self._orders[request.seed]
        i = self._count.get(request.seed, 0)
        self._count[request.seed] = i + 1
        params = order[i % len(order)]
        desc = ", ".join(f"{k}={v}" for k, v in sorted(params.items()))
        return registry_reply(self.operator, params, f"try {desc}")


class HttpGenerator:
    """Sends prompts to a chat-completions style HTTP endpoint.

    The credential is read from the environment variable named by
    ``key_env``. ``adapter`` picks the body format: ``"chat"`` for
    OpenAI-compatible JSON, ``"raw"`` to post the prompt text and read the
    reply body as text.
    """

    def __init__(
        self,
        endpoint: str,
        model: str = "",
        temperature: float = 1.0,
        retries: int = 2,
        key_env: str = "MEP_API_KEY",
        adapter: str = "chat",
        timeout: float = 120.0,
    ):
        if adapter not in ("chat", "raw"):
            raise ValueError(f"unknown adapter {adapter!r}")
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.retries = retries
        self.key_env = key_env
        self.adapter = adapter
        self.timeout = timeout

    def _request(self, prompt: str) -> urllib.request.Request:
        headers = {}
        key = os.environ.get(self.key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        if self.adapter == "chat":
            body = json.dumps(
                {
                    "model": self.model,
                    "temperature": self.temperature,
                    "messages": [{"role": "user", "content": prompt}],
                }
            ).encode()
            headers["Content-Type"] = "application/json"
        else:
            body = prompt.encode()
            headers["Content-Type"] = "text/plain; charset=utf-8"
        return urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")

    def _decode(self, raw: bytes) -> str:
        text = raw.decode("utf-8", errors="replace")
        if self.adapter == "raw":
            return text
        doc = json.loads(text)
        return doc["choices"][0]["message"]["content"]

    def generate(self, request: Request) -> str:
        last: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                with urllib.request.urlopen(self._request(request.prompt), timeout=self.timeout) as resp:
                    return self._decode(resp.read())
            except (urllib.error.URLError, OSError, ValueError, KeyError, IndexError) as exc:
                last = exc
        raise GeneratorUnavailable(f"{self.endpoint}: {last}")
