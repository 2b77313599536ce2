"""Evolvable candidates and the persisted history of an evolution run."""

from __future__ import annotations

import inspect
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

KINDS = ("registry-params", "external-source")

# Fitness given to candidates that fail to parse, crash or time out. Finite
# so that records stay plain JSON; far below any real negated cost.
WORST_FITNESS = -1e30


@dataclass
class Candidate:
    id: str
    kind: str
    payload: Any
    fitness: float | None = None
    feedback: str | None = None
    parents: tuple[str, ...] = ()
    hypothesis: str = ""
    reflection: str = ""
    generation: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown candidate kind {self.kind!r}")
        self.parents = tuple(self.parents)

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None

    @property
    def failed(self) -> bool:
        return self.fitness is not None and self.fitness <= WORST_FITNESS

    def behaviour_key(self) -> str:
        """Candidates with equal keys behave identically when evaluated."""
        return json.dumps([self.kind, self.payload], sort_keys=True)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["parents"] = list(self.parents)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Candidate":
        return cls(**doc)


def registry_candidate(cid: str, operator: str, params: dict | None = None, **kwargs) -> Candidate:
    return Candidate(cid, "registry-params", {"operator": operator, "params": dict(params or {})}, **kwargs)


def candidate_code(candidate: Candidate) -> str:
    """Source text shown to the generator for ``candidate``."""
    if candidate.kind == "external-source":
        return str(candidate.payload)
    from .. import evolved, hgs

    name = candidate.payload.get("operator")
    params = candidate.payload.get("params", {})
    if name == "baseline":
        body = inspect.getsource(hgs.biased_fitness) + "\n\n" + inspect.getsource(hgs.select_parents_baseline)
    elif name == "hybrid":
        body = inspect.getsource(evolved.HybridParams) + "\n\n" + inspect.getsource(evolved._select)
    else:
        body = f"# registry operator {name!r}"
    if params:
        body = f"# parameter overrides: {json.dumps(params, sort_keys=True)}\n" + body
    return body


@dataclass
class SeedRun:
    seed: int
    generations: list[list[dict]] = field(default_factory=list)
    best_series: list[float] = field(default_factory=list)
    prompts: list[str] = field(default_factory=list)
    responses: list[str] = field(default_factory=list)
    best_id: str | None = None
    aborted: str | None = None


@dataclass
class RunRecord:
    """Everything needed to audit or replay an evolution run.

    Events are appended to a JSON-lines file as they happen when ``path``
    is set, so an aborted run still leaves its partial history on disk.
    """

    config: dict
    runs: list[SeedRun] = field(default_factory=list)
    best: dict | None = None
    path: str | None = None

    def _emit(self, event: dict) -> None:
        if self.path is None:
            return
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def start(self) -> None:
        if self.path is not None:
            Path(self.path).parent.mkdir(parents=True, exist_ok=True)
            Path(self.path).write_text("", encoding="utf-8")
        self._emit({"event": "config", "config": self.config})

    def begin_seed(self, seed: int) -> SeedRun:
        run = SeedRun(seed)
        self.runs.append(run)
        self._emit({"event": "seed", "seed": seed})
        return run

    def exchange(self, run: SeedRun, prompt: str, response: str | None) -> None:
        run.prompts.append(prompt)
        run.responses.append(response if response is not None else "")
        self._emit({"event": "exchange", "seed": run.seed, "prompt": prompt, "response": response})

    def candidate(self, run: SeedRun, cand: Candidate) -> None:
        self._emit({"event": "candidate", "seed": run.seed, "candidate": cand.to_dict()})

    def generation(self, run: SeedRun, index: int, members: list[Candidate]) -> None:
        run.generations.append([c.to_dict() for c in members])
        best = max(c.fitness for c in members)
        run.best_series.append(best)
        self._emit(
            {
                "event": "generation",
                "seed": run.seed,
                "index": index,
                "survivors": [c.id for c in members],
                "best_fitness": best,
            }
        )

    def abort(self, run: SeedRun, reason: str) -> None:
        run.aborted = reason
        self._emit({"event": "abort", "seed": run.seed, "reason": reason})

    def finish(self, best: Candidate) -> None:
        self.best = best.to_dict()
        self._emit({"event": "best", "candidate": self.best})

    def to_dict(self) -> dict:
        return {"config": self.config, "runs": [asdict(r) for r in self.runs], "best": self.best}

    @staticmethod
    def read_events(path: str | Path) -> list[dict]:
        with open(path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]
