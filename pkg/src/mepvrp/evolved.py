"""The stratified diversity-pressure parent selector and the operator registry.

``hybrid_select_parents`` follows a fixed reference procedure step for step,
down to the order of its random draws, so a given seed always yields the
same pair. ``make_hybrid_selector`` exposes its constants as parameters;
with default arguments it is the same procedure.

The registry lists named operators with parameter schemas. The evolution
harness's lattice generator emits registry documents instead of source code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable

from .cost import CostEvaluator
from .hgs import PopulationTooSmallError, select_parents_baseline
from .rng import RandomNumberGenerator
from .solution import Solution


class UnsupportedKError(ValueError):
    pass


class RegistryError(ValueError):
    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(f"{kind}: {message}")


Encoding = tuple[set, list]


@dataclass(frozen=True)
class Strata:
    elite: list[int]
    mid: list[int]
    tail: list[int]
    order: list[int] = field(repr=False, default_factory=list)


def stratify(costs: list[float]) -> Strata:
    """Split cost-sorted indices into elite (top sixth), mid (to two thirds) and tail."""
    n = len(costs)
    if n < 2:
        raise PopulationTooSmallError("Population must have at least two solutions.")
    order = sorted(range(n), key=lambda i: costs[i])
    elite_cut = max(1, n // 6)
    mid_cut = max(elite_cut + 1, n * 2 // 3)
    return Strata(order[:elite_cut], order[elite_cut:mid_cut], order[mid_cut:], order)


def tournament_select(
    indices: list[int],
    costs: list[float],
    feasible: list[bool],
    rng: RandomNumberGenerator,
    t_size: int = 7,
    allow_infeasible_prob: float = 0.2,
) -> int:
    """Cheapest of a small draw, mostly among feasible members.

    Small index lists are taken whole. Each infeasible entrant survives the
    filter with probability ``allow_infeasible_prob``. If nobody survives,
    the whole draw competes.
    """
    if len(indices) <= t_size:
        candidates = indices[:]
    else:
        candidates = [indices[rng.randint(len(indices))] for _ in range(t_size)]
    filtered = []
    for idx in candidates:
        if feasible[idx]:
            filtered.append(idx)
        elif rng.rand() < allow_infeasible_prob:
            filtered.append(idx)
    if not filtered:
        filtered = candidates
    return min(filtered, key=lambda i: costs[i])


def encode_solution_simple(solution: Solution) -> Encoding:
    """All visited clients plus the client set of each route, in route order."""
    all_clients: set[int] = set()
    route_clients: list[set[int]] = []
    for route in solution.routes():
        clients_in_route = set(v for v in route if v > 0)
        route_clients.append(clients_in_route)
        all_clients.update(clients_in_route)
    return (all_clients, route_clients)


def simple_structural_distance(enc1: Encoding, enc2: Encoding) -> float:
    """One minus a 70/30 blend of global and per-route Jaccard similarity.

    Routes are paired by position up to the shorter list, so the value can
    be asymmetric when route counts differ.
    """
    all1, routes1 = enc1
    all2, routes2 = enc2
    if not all1 and not all2:
        return 0.0
    union = len(all1 | all2)
    if union == 0:
        return 0.0
    global_similarity = len(all1 & all2) / union

    min_routes = min(len(routes1), len(routes2))
    if min_routes == 0:
        return 1.0 - global_similarity
    overlaps = []
    for i in range(min_routes):
        if not routes1[i] and not routes2[i]:
            continue
        r_union = len(routes1[i] | routes2[i])
        if r_union > 0:
            overlaps.append(len(routes1[i] & routes2[i]) / r_union)
    avg_route_similarity = sum(overlaps) / len(overlaps) if overlaps else 0.0
    return 1.0 - (0.7 * global_similarity + 0.3 * avg_route_similarity)


@dataclass(frozen=True)
class HybridParams:
    t_size: int = 7
    allow_infeasible_prob: float = 0.2
    large_population: int = 500
    sample_large: int = 20
    sample_small: int = 30
    w_struct: float = 0.55
    w_cost: float = 0.3
    w_feas: float = 0.15
    large_w_cost: float = 0.6
    large_w_feas: float = 0.3
    large_w_div: float = 0.1
    div_threshold: float = 0.1
    noise: float = 0.02


def _select(
    params: HybridParams,
    population: list[Solution],
    rng: RandomNumberGenerator,
    cost_evaluator: CostEvaluator,
    k: int,
) -> tuple[Solution, Solution]:
    n = len(population)
    if n < 2:
        raise PopulationTooSmallError("Population must have at least two solutions.")
    if k != 2:
        raise UnsupportedKError("Only k=2 supported.")

    costs = [cost_evaluator.penalised_cost(sol) for sol in population]
    feasible = [sol.is_feasible() for sol in population]
    strata = stratify(costs)
    sorted_indices = strata.order
    elite_cut = len(strata.elite)

    def tournament(indices: list[int]) -> int:
        return tournament_select(indices, costs, feasible, rng, params.t_size, params.allow_infeasible_prob)

    parent1_idx = tournament(strata.elite)
    p1_rank = sorted_indices.index(parent1_idx)
    if feasible[parent1_idx] and p1_rank < elite_cut:
        parent2_strata = strata.mid + strata.tail
    else:
        parent2_strata = strata.elite + strata.mid
    if not parent2_strata:
        parent2_strata = sorted_indices

    large = n > params.large_population
    cap = params.sample_large if large else params.sample_small
    max_sample = min(cap, len(parent2_strata))

    sampled: list[int] = []
    seen: set[int] = set()
    attempts = 0
    while len(sampled) < max_sample and attempts < max_sample * 2:
        cand = parent2_strata[rng.randint(len(parent2_strata))]
        if cand != parent1_idx and cand not in seen:
            sampled.append(cand)
            seen.add(cand)
        attempts += 1

    if not sampled:
        for idx in parent2_strata:
            if idx != parent1_idx:
                sampled.append(idx)
                break
        else:
            sampled.append(parent2_strata[0])

    p2_costs = [costs[i] for i in sampled]
    p2_min = min(p2_costs)
    p2_max = max(p2_costs) if max(p2_costs) > p2_min else p2_min + 1
    span = p2_max - p2_min

    best_score = -float("inf")
    parent2_idx = None
    if large:
        for idx in sampled:
            if idx == parent1_idx:
                continue
            cost_score = 1.0 - (costs[idx] - p2_min) / span
            feas_bonus = 1.0 if feasible[idx] else 0.0
            diversity_bonus = 0.5 if abs(costs[idx] - costs[parent1_idx]) > span * params.div_threshold else 0.0
            score = params.large_w_cost * cost_score + params.large_w_feas * feas_bonus + params.large_w_div * diversity_bonus
            score += (rng.rand() - 0.5) * params.noise
            if score > best_score:
                best_score = score
                parent2_idx = idx
    else:
        p1_enc = encode_solution_simple(population[parent1_idx])
        for idx in sampled:
            if idx == parent1_idx:
                continue
            cand_enc = encode_solution_simple(population[idx])
            struct_dist = simple_structural_distance(p1_enc, cand_enc)
            cost_score = 1.0 - (costs[idx] - p2_min) / span
            feas_bonus = 1.0 if feasible[idx] else 0.0
            score = params.w_struct * struct_dist + params.w_cost * cost_score + params.w_feas * feas_bonus
            score += (rng.rand() - 0.5) * params.noise
            if score > best_score:
                best_score = score
                parent2_idx = idx

    if parent2_idx is None:
        parent2_idx = tournament(parent2_strata)
    return population[parent1_idx], population[parent2_idx]


def hybrid_select_parents(
    population: list[Solution],
    rng: RandomNumberGenerator,
    cost_evaluator: CostEvaluator,
    k: int = 2,
) -> tuple[Solution, Solution]:
    """Elite-tournament first parent, diversity-scored complementary second parent."""
    return _select(_DEFAULTS, population, rng, cost_evaluator, k)


_DEFAULTS = HybridParams()


def make_hybrid_selector(**overrides: Any) -> Callable:
    params = HybridParams(**overrides)

    def select(population, rng, cost_evaluator, k=2):
        return _select(params, population, rng, cost_evaluator, k)

    select.params = params  # type: ignore[attr-defined]
    return select


def _make_baseline(elite_fraction: float = 0.16) -> Callable:
    def select(population, rng, cost_evaluator, k=2):
        return select_parents_baseline(population, rng, cost_evaluator, k, elite_fraction)

    return select


# -- registry -----------------------------------------------------------------


def _schema(kind: str, default: Any, lo: Any, hi: Any) -> dict:
    return {"type": kind, "default": default, "min": lo, "max": hi}


REGISTRY: dict[str, dict] = {
    "baseline": {
        "plug_point": "select_parents",
        "description": "binary tournaments on cost rank plus weighted diversity rank",
        "factory": _make_baseline,
        "params": {"elite_fraction": _schema("float", 0.16, 0.0, 1.0)},
    },
    "hybrid": {
        "plug_point": "select_parents",
        "description": "stratified elite tournament with diversity-scored second parent",
        "factory": make_hybrid_selector,
        "params": {
            "t_size": _schema("int", 7, 1, 64),
            "allow_infeasible_prob": _schema("float", 0.2, 0.0, 1.0),
            "large_population": _schema("int", 500, 2, 100000),
            "sample_large": _schema("int", 20, 1, 1000),
            "sample_small": _schema("int", 30, 1, 1000),
            "w_struct": _schema("float", 0.55, 0.0, 1.0),
            "w_cost": _schema("float", 0.3, 0.0, 1.0),
            "w_feas": _schema("float", 0.15, 0.0, 1.0),
            "large_w_cost": _schema("float", 0.6, 0.0, 1.0),
            "large_w_feas": _schema("float", 0.3, 0.0, 1.0),
            "large_w_div": _schema("float", 0.1, 0.0, 1.0),
            "div_threshold": _schema("float", 0.1, 0.0, 1.0),
            "noise": _schema("float", 0.02, 0.0, 1.0),
        },
    },
}


def manifest() -> dict:
    """JSON-ready description of every registered operator and its parameters."""
    return {
        "operators": [
            {
                "name": name,
                "plug_point": entry["plug_point"],
                "description": entry["description"],
                "params": entry["params"],
            }
            for name, entry in sorted(REGISTRY.items())
        ]
    }


def manifest_json() -> str:
    return json.dumps(manifest(), indent=2, sort_keys=True)


def check_params(name: str, params: dict) -> dict:
    """Validate ``params`` against the schema of ``name``; returns a clean copy."""
    if name not in REGISTRY:
        raise RegistryError("unknown-operator", f"no operator named {name!r}")
    schema = REGISTRY[name]["params"]
    clean = {}
    for key, value in params.items():
        if key not in schema:
            raise RegistryError("unknown-param", f"{name} has no parameter {key!r}")
        spec = schema[key]
        if spec["type"] == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise RegistryError("bad-param", f"{key} must be an integer")
        elif isinstance(value, bool) or not isinstance(value, (int, float)):
            raise RegistryError("bad-param", f"{key} must be a number")
        if not spec["min"] <= value <= spec["max"]:
            raise RegistryError("bad-param", f"{key}={value} outside [{spec['min']}, {spec['max']}]")
        clean[key] = value
    return clean


def build_operator(name: str, params: dict | None = None) -> Callable:
    """Instantiate registry operator ``name`` with (validated) parameter overrides."""
    clean = check_params(name, params or {})
    return REGISTRY[name]["factory"](**clean)
