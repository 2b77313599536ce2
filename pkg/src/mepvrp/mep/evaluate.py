"""Score a candidate by solving a fixed instance set with it bound as the parent selector."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

from ..evolved import RegistryError, build_operator
from ..hgs import SolveParams, solve
from ..instance import ProblemData
from ..rng import derive_seed
from .candidate import WORST_FITNESS, Candidate
from .sandbox import SandboxError, SandboxSelector


@dataclass(frozen=True)
class EvalConfig:
    max_iterations: int = 200
    population_min: int = 25
    population_max: int = 40
    seed: int = 0
    timeout: float = 600.0
    exchange_timeout: float = 5.0

    def solve_params(self, index: int, selector) -> SolveParams:
        return SolveParams(
            population_min=self.population_min,
            population_max=self.population_max,
            max_iterations=self.max_iterations,
            seed=derive_seed(self.seed, index),
            select_parents=selector,
        )


class _Timeout(Exception):
    pass


def _run(selector, instances: Sequence[ProblemData], config: EvalConfig) -> list[tuple[int, bool]]:
    started = time.perf_counter()
    out = []
    for idx, data in enumerate(instances):
        res = solve(data, config.solve_params(idx, selector))
        out.append((res.cost, res.feasible))
        if time.perf_counter() - started > config.timeout:
            raise _Timeout(f"exceeded {config.timeout}s after {idx + 1} of {len(instances)} instances")
    return out


def evaluate_candidate(
    candidate: Candidate,
    instances: Sequence[ProblemData],
    config: EvalConfig,
    reference_cost: float | None = None,
) -> tuple[float, str]:
    """Return ``(fitness, feedback)``; fitness is the negated mean best cost.

    Any failure (bad parameters, sandbox crash, timeout, protocol violation,
    exception from the operator) yields :data:`WORST_FITNESS` and a feedback
    line describing it.
    """
    if not instances:
        raise ValueError("instance set is empty")
    try:
        if candidate.kind == "registry-params":
            payload = candidate.payload
            selector = build_operator(payload["operator"], payload.get("params", {}))
            results = _run(selector, instances, config)
        else:
            with SandboxSelector(str(candidate.payload), timeout=config.exchange_timeout) as selector:
                results = _run(selector, instances, config)
    except RegistryError as exc:
        return WORST_FITNESS, f"invalid registry document ({exc})"
    except SandboxError as exc:
        return WORST_FITNESS, f"sandbox {exc}"
    except _Timeout as exc:
        return WORST_FITNESS, f"timeout: {exc}"
    except Exception as exc:  # the operator is untrusted; report, don't propagate
        return WORST_FITNESS, f"operator raised {type(exc).__name__}: {exc}"

    costs = [c for c, _ in results]
    mean = sum(costs) / len(costs)
    infeasible = sum(1 for _, f in results if not f)
    parts = [f"mean cost {mean:.2f} over {len(costs)} instances"]
    if infeasible:
        parts.append(f"{infeasible} instance(s) without a feasible solution (penalised cost used)")
    if reference_cost is not None and reference_cost > 0:
        gap = (reference_cost - mean) / reference_cost * 100
        parts.append(f"{gap:+.2f}% versus the default selector ({reference_cost:.2f})")
    return -mean, "; ".join(parts)
