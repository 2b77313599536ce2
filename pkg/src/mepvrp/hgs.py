"""Hybrid genetic search with pluggable parent/survivor/penalty operators."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .cost import CostEvaluator, simulate_route
from .instance import ProblemData, validate
from .local_search import EducateParams, LocalSearch
from .rng import RandomNumberGenerator
from .solution import Route, Solution, broken_pairs_distance, make_random

SelectParents = Callable[[list, RandomNumberGenerator, CostEvaluator, int], tuple]
SelectSurvivors = Callable[[list, int, CostEvaluator], list]

DEFAULT_ELITE_FRACTION = 0.16
DEFAULT_N_CLOSE = 5


class SolveError(ValueError):
    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(f"{kind}: {message}")


class PopulationTooSmallError(ValueError):
    pass


# -- biased fitness -----------------------------------------------------------


def _ranks(values: Sequence[float], descending: bool = False) -> list[float]:
    """Normalised min-rank: number of strictly better members over n - 1."""
    n = len(values)
    if n <= 1:
        return [0.0] * n
    order = sorted(values, reverse=descending)
    out = []
    for v in values:
        # bisect by hand to keep descending support simple
        lo, hi = 0, n
        while lo < hi:
            mid = (lo + hi) // 2
            better = order[mid] > v if descending else order[mid] < v
            if better:
                lo = mid + 1
            else:
                hi = mid
        out.append(lo / (n - 1))
    return out


def diversity_contributions(population: Sequence[Solution], n_close: int = DEFAULT_N_CLOSE) -> list[float]:
    """Mean broken-pairs distance of each member to its ``n_close`` closest others."""
    out = []
    for i, s in enumerate(population):
        cache = s._bp
        dists = []
        for j, other in enumerate(population):
            if j == i:
                continue
            d = cache.get(other.serial)
            if d is None:
                d = broken_pairs_distance(s, other)
            dists.append(d)
        dists.sort()
        close = dists[:n_close]
        out.append(sum(close) / len(close) if close else 0.0)
    return out


def biased_fitness(
    population: Sequence[Solution],
    evaluator: CostEvaluator,
    elite_fraction: float = DEFAULT_ELITE_FRACTION,
    n_close: int = DEFAULT_N_CLOSE,
) -> list[float]:
    """Cost rank plus weighted diversity rank; lower is better."""
    costs = [evaluator.penalised_cost(s) for s in population]
    cost_rank = _ranks(costs)
    div_rank = _ranks(diversity_contributions(population, n_close), descending=True)
    weight = 1.0 - elite_fraction
    return [c + weight * d for c, d in zip(cost_rank, div_rank)]


# -- baseline operators -----------------------------------------------------


def select_parents_baseline(
    population: list[Solution],
    rng: RandomNumberGenerator,
    cost_evaluator: CostEvaluator,
    k: int = 2,
    elite_fraction: float = DEFAULT_ELITE_FRACTION,
) -> tuple[Solution, Solution]:
    """Two binary tournaments on biased fitness; the winners are distinct members."""
    n = len(population)
    if n < 2:
        raise PopulationTooSmallError("population must have at least two solutions")
    if k != 2:
        raise ValueError("only k=2 is supported")
    fitness = biased_fitness(population, cost_evaluator, elite_fraction)

    def tournament() -> int:
        a = rng.randint(n)
        b = rng.randint(n)
        return a if fitness[a] <= fitness[b] else b

    first = tournament()
    second = tournament()
    tries = 1
    while second == first and tries < 10:
        second = tournament()
        tries += 1
    if second == first:
        second = (first + 1 + rng.randint(n - 1)) % n
    return population[first], population[second]


def select_survivors_baseline(
    population: list[Solution],
    max_size: int,
    cost_evaluator: CostEvaluator,
    elite_fraction: float = DEFAULT_ELITE_FRACTION,
) -> list[Solution]:
    """Prune to ``max_size``: duplicates first, then worst biased fitness.

    The cheapest feasible member is never removed.
    """
    pop = list(population)
    while len(pop) > max_size:
        seen = {}
        dup = None
        for idx, s in enumerate(pop):
            key = s.key()
            if key in seen:
                dup = idx
                break
            seen[key] = idx
        if dup is not None:
            del pop[dup]
            continue
        costs = [cost_evaluator.penalised_cost(s) for s in pop]
        protected = None
        feasible = [i for i, s in enumerate(pop) if s.is_feasible()]
        if feasible:
            protected = min(feasible, key=lambda i: (costs[i], i))
        fitness = biased_fitness(pop, cost_evaluator, elite_fraction)
        worst = max(
            (i for i in range(len(pop)) if i != protected),
            key=lambda i: (fitness[i], i),
        )
        del pop[worst]
    return pop


# -- penalty management -------------------------------------------------------


PENALTY_KINDS = ("load", "tw", "dist")


@dataclass(frozen=True)
class PenaltyState:
    load: int
    tw: int
    dist: int
    window: int = 100
    target: float = 0.43
    buffers: dict = field(default_factory=lambda: {k: () for k in PENALTY_KINDS})

    def evaluator(self) -> CostEvaluator:
        return CostEvaluator([self.load], self.tw, self.dist)

    def record(self, solution: Solution) -> "PenaltyState":
        flags = {
            "load": solution.excess_load() == 0,
            "tw": solution.time_warp() == 0,
            "dist": solution.excess_distance() + solution.excess_duration() + solution.excess_budget() == 0,
        }
        buffers = {k: (self.buffers[k] + (flags[k],))[-self.window:] for k in PENALTY_KINDS}
        return replace(self, buffers=buffers)

    @property
    def full(self) -> bool:
        return len(self.buffers["load"]) >= self.window

    def fractions(self) -> dict[str, float]:
        return {k: (sum(b) / len(b) if b else 0.0) for k, b in self.buffers.items()}

    def coefficients(self) -> dict[str, int]:
        return {"load": self.load, "tw": self.tw, "dist": self.dist}


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def update_penalties_baseline(state: PenaltyState) -> PenaltyState:
    """Scale each coefficient towards the target feasible fraction.

    Above ``target + 0.05`` a coefficient shrinks by 15% (floor 1); below
    ``target - 0.05`` it grows by 20% and by at least one unit, so small
    integer coefficients cannot get stuck. Buffers are cleared.
    """
    fractions = state.fractions()
    new = {}
    for kind in PENALTY_KINDS:
        coeff = getattr(state, kind)
        frac = fractions[kind]
        if frac > state.target + 0.05:
            coeff = max(1, _half_up(coeff * 0.85))
        elif frac < state.target - 0.05:
            coeff = max(coeff + 1, _half_up(coeff * 1.20))
        new[kind] = coeff
    return replace(state, buffers={k: () for k in PENALTY_KINDS}, **new)


def initial_penalties(data: ProblemData) -> tuple[int, int, int]:
    """Starting coefficients scaled to the instance's distances and demands."""
    n = data.num_nodes
    dist = data.dist
    total = sum(sum(row) for row in dist)
    mean_edge = total / max(1, n * (n - 1))
    max_demand = max((abs(q) for q in data.demand), default=0)
    load = max(1, min(1000, _half_up(mean_edge / max(1, max_demand)))) if max_demand else 1
    return load, 10, 10


# -- SREX crossover -----------------------------------------------------------


def _route_angle(data: ProblemData, route: Route) -> tuple[float, int]:
    depot = data.nodes[data.vehicle_types[route.vehicle_type].depot]
    xs = [data.nodes[v].x for v in route]
    ys = [data.nodes[v].y for v in route]
    cx, cy = sum(xs) / len(xs), sum(ys) / len(ys)
    return (math.atan2(cy - depot.y, cx - depot.x), route[0])


def _insert_cost(
    data: ProblemData,
    evaluator: CostEvaluator,
    visits: list[int],
    vtype: int,
    client: int,
    pos: int,
    base_cost: float,
    base_pen: float,
    fast: bool,
    load: int,
    best: float,
) -> float | None:
    """Cost increase of inserting ``client`` at ``pos``, or None if not better than ``best``."""
    vt = data.vehicle_types[vtype]
    depot = vt.depot
    D = data.dist
    prev = visits[pos - 1] if pos > 0 else depot
    if pos < len(visits):
        nxt = visits[pos]
        ddist = D[prev][client] + D[client][nxt] - D[prev][nxt]
    elif data.open_routes:
        ddist = D[prev][client]
    else:
        ddist = D[prev][client] + D[client][depot] - (D[prev][depot] if visits else 0)
    if fast:
        new_load = load + data.demand[client]
        base_dist = base_cost - base_pen
        nd = base_dist + ddist
        pen = 0
        if new_load > vt.capacity:
            pen += evaluator.load_coeffs[0] * (new_load - vt.capacity)
        if vt.max_distance is not None and nd > vt.max_distance:
            pen += evaluator.dist_coeff * (nd - vt.max_distance)
        delta = nd + pen - base_cost
        return delta if delta < best else None
    if ddist - base_pen >= best:
        return None
    new_visits = visits[:pos] + [client] + visits[pos:]
    s = simulate_route(new_visits, vtype, data)
    if data.backhaul_mode == "strict":
        old_prec = simulate_route(visits, vtype, data).precedence_violations if visits else 0
        if s.precedence_violations > old_prec:
            return None
    pen = (
        evaluator.load_coeffs[0] * s.excess_load
        + evaluator.tw_coeff * s.time_warp
        + evaluator.dist_coeff * (s.excess_distance + s.excess_duration)
    )
    delta = s.distance + pen - base_cost
    return delta if delta < best else None


def greedy_insert(
    data: ProblemData,
    evaluator: CostEvaluator,
    routes: list[list[int]],
    vtypes: list[int],
    clients: Sequence[int],
) -> None:
    """Insert each client at its cheapest position (in place).

    Unused vehicles are offered as empty routes. Ties go to the earliest
    route and position.
    """
    fast = not data.is_timed and data.backhaul_mode == "none"
    used = [0] * len(data.vehicle_types)
    for t in vtypes:
        used[t] += 1
    for t, vt in enumerate(data.vehicle_types):
        for _ in range(max(0, vt.count - used[t])):
            routes.append([])
            vtypes.append(t)
    lc, tc, dc = evaluator.load_coeffs[0], evaluator.tw_coeff, evaluator.dist_coeff
    stats = [simulate_route(r, t, data) for r, t in zip(routes, vtypes)]
    for client in clients:
        best = math.inf
        where = None
        for r, visits in enumerate(routes):
            s = stats[r]
            pen = lc * s.excess_load + tc * s.time_warp + dc * (s.excess_distance + s.excess_duration)
            base = s.distance + pen
            load = s.delivery
            empty_seen = not visits
            for pos in range(len(visits) + 1):
                delta = _insert_cost(data, evaluator, visits, vtypes[r], client, pos, base, pen, fast, load, best)
                if delta is not None:
                    best = delta
                    where = (r, pos)
            if empty_seen:
                continue
        if where is None:
            # Only strict precedence can reject every slot; append then.
            where = (0, len(routes[0])) if routes else None
            if where is None:
                continue
        r, pos = where
        routes[r].insert(pos, client)
        stats[r] = simulate_route(routes[r], vtypes[r], data)
    keep = [(r, t) for r, t in zip(routes, vtypes) if r]
    routes[:] = [r for r, _ in keep]
    vtypes[:] = [t for _, t in keep]


def _order_crossover(p1: Route, p2: Route, data: ProblemData, rng: RandomNumberGenerator) -> list[int]:
    """Keep a random segment of ``p1`` and append ``p2``'s remaining visits in order."""
    a = list(p1)
    b = list(p2)
    if len(a) <= 1:
        start, length = 0, len(a)
    else:
        start = rng.randint(len(a))
        length = 1 + rng.randint(len(a) - 1)
    segment = [a[(start + t) % len(a)] for t in range(length)]
    taken = set(segment)
    clusters = {data.cluster_of[v] for v in segment if data.cluster_of[v] is not None}
    child = list(segment)
    for v in b:
        c = data.cluster_of[v]
        if v in taken or (c is not None and c in clusters):
            continue
        child.append(v)
        taken.add(v)
        if c is not None:
            clusters.add(c)
    return child


def srex_crossover(
    parent1: Solution,
    parent2: Solution,
    data: ProblemData,
    evaluator: CostEvaluator,
    rng: RandomNumberGenerator,
) -> Solution:
    """Selective route exchange.

    Routes of both parents are ordered by the polar angle of their centroid
    around the depot. A contiguous block of ``parent1``'s routes is replaced
    by an equally long block of ``parent2``'s routes, choosing the block of
    ``parent2`` that overlaps the removed clients best. Clients already kept
    from ``parent1`` are dropped from the incoming routes; required clients
    (or clusters) left uncovered are reinserted greedily.
    """
    if parent1.key() == parent2.key():
        return parent1
    r1 = sorted(parent1.routes(), key=lambda r: _route_angle(data, r))
    r2 = sorted(parent2.routes(), key=lambda r: _route_angle(data, r))
    n1, n2 = len(r1), len(r2)
    if n1 == 0 or n2 == 0:
        return parent1 if n1 else parent2

    if n1 == 1 and n2 == 1:
        visits = _order_crossover(r1[0], r2[0], data, rng)
        routes = [visits]
        vtypes = [r1[0].vehicle_type]
        _repair(data, evaluator, routes, vtypes, set(r1[0]) | set(r2[0]))
        return Solution(data, [Route(data, v, t) for v, t in zip(routes, vtypes)])

    lo = min(n1, n2)
    n_move = 1 + rng.randint(lo - 1) if lo >= 2 else 1
    start1 = rng.randint(n1)
    moved = {(start1 + t) % n1 for t in range(n_move)}
    removed_clients = set()
    for idx in moved:
        removed_clients.update(r1[idx])

    # Pick parent2's block that brings the fewest clients kept elsewhere.
    def conflict(start: int) -> int:
        return sum(1 for t in range(n_move) for v in r2[(start + t) % n2] if v not in removed_clients)

    scores = [conflict(s) for s in range(n2)]
    best = min(scores)
    starts = [s for s in range(n2) if scores[s] == best]
    start2 = starts[rng.randint(len(starts))]

    kept = [r for idx, r in enumerate(r1) if idx not in moved]
    taken = set()
    clusters = set()
    for r in kept:
        for v in r:
            taken.add(v)
            if data.cluster_of[v] is not None:
                clusters.add(data.cluster_of[v])
    routes = [r.visits() for r in kept]
    vtypes = [r.vehicle_type for r in kept]
    used = [0] * len(data.vehicle_types)
    for t in vtypes:
        used[t] += 1
    for t in range(n_move):
        incoming = r2[(start2 + t) % n2]
        visits = []
        for v in incoming:
            c = data.cluster_of[v]
            if v in taken or (c is not None and c in clusters):
                continue
            visits.append(v)
            taken.add(v)
            if c is not None:
                clusters.add(c)
        if not visits:
            continue
        vt = incoming.vehicle_type
        if used[vt] >= data.vehicle_types[vt].count:
            depot = data.vehicle_types[vt].depot
            free = [k for k, x in enumerate(data.vehicle_types) if used[k] < x.count]
            if not free:
                for v in visits:
                    taken.discard(v)
                    if data.cluster_of[v] is not None:
                        clusters.discard(data.cluster_of[v])
                continue
            vt = min(free, key=lambda k: (data.vehicle_types[k].depot != depot, k))
        used[vt] += 1
        routes.append(visits)
        vtypes.append(vt)

    pool = []
    for idx in sorted(moved):
        pool.extend(r1[idx])
    _repair(data, evaluator, routes, vtypes, pool)
    return Solution(data, [Route(data, v, t) for v, t in zip(routes, vtypes)])


def _repair(data, evaluator, routes, vtypes, pool) -> None:
    """Greedily reinsert uncovered required clients and clusters from ``pool``."""
    present = {v for r in routes for v in r}
    covered = {data.cluster_of[v] for v in present if data.cluster_of[v] is not None}
    missing = []
    for v in pool:
        if v in present:
            continue
        c = data.cluster_of[v]
        if c is not None:
            if c in covered:
                continue
            covered.add(c)
            missing.append(v)
        elif data.required[v]:
            missing.append(v)
        present.add(v)
    for c in data.clients:
        if c.cluster is None and c.required and c.node not in present:
            missing.append(c.node)
    for cid, members in data.clusters.items():
        if cid not in covered:
            missing.append(members[0])
            covered.add(cid)
    if missing:
        greedy_insert(data, evaluator, routes, vtypes, missing)


# -- main loop ------------------------------------------------------------------


@dataclass(frozen=True)
class SolveParams:
    population_min: int = 25
    population_max: int = 40
    elite_fraction: float = DEFAULT_ELITE_FRACTION
    max_iterations: int | None = None
    max_seconds: float | None = None
    no_improvement: int | None = None
    restart_after: int = 2000
    restart_fraction: float = 0.8
    penalty_window: int = 100
    target_feasible: float = 0.43
    initial_penalties: tuple[int, int, int] | None = None
    select_parents: SelectParents | None = None
    select_survivors: SelectSurvivors | None = None
    update_penalties: Callable[[PenaltyState], PenaltyState] | None = None
    educate: EducateParams = EducateParams()
    seed: int = 0

    def __post_init__(self):
        if self.population_min < 2 or self.population_min > self.population_max:
            raise ValueError("need 2 <= population_min <= population_max")
        if self.max_iterations is None and self.max_seconds is None and self.no_improvement is None:
            raise ValueError("at least one stop criterion is required")
        for name in ("max_iterations", "max_seconds", "no_improvement"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")
        if self.restart_after <= 0 or self.penalty_window <= 0:
            raise ValueError("thresholds must be positive")


@dataclass
class SolveResult:
    best: Solution
    cost: int
    feasible: bool
    iterations: int
    seconds: float
    trace: list[dict]

    def trace_lines(self) -> str:
        import json

        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.trace)


def solve(data: ProblemData, params: SolveParams) -> SolveResult:
    """Run hybrid genetic search until a stop criterion is met."""
    problems = validate(data)
    if problems:
        raise SolveError("invalid-instance", "; ".join(str(p) for p in problems))
    if data.num_vehicles == 0:
        raise SolveError("no-vehicle", "instance has no vehicles")

    started = time.perf_counter()
    deadline = started + params.max_seconds if params.max_seconds is not None else None
    select_parents = params.select_parents or (
        lambda pop, rng, ev, k=2: select_parents_baseline(pop, rng, ev, k, params.elite_fraction)
    )
    select_survivors = params.select_survivors or (
        lambda pop, size, ev: select_survivors_baseline(pop, size, ev, params.elite_fraction)
    )
    update_penalties = params.update_penalties or update_penalties_baseline

    rng = RandomNumberGenerator(seed=params.seed)
    ls = LocalSearch(data, params.educate)
    load, tw, dist = params.initial_penalties or initial_penalties(data)
    state = PenaltyState(load=load, tw=tw, dist=dist, window=params.penalty_window, target=params.target_feasible)
    evaluator = state.evaluator()

    best_feasible: Solution | None = None
    best_feasible_cost = math.inf
    best_any: Solution | None = None
    best_any_cost = math.inf
    population: list[Solution] = []

    def consider(sol: Solution) -> bool:
        nonlocal best_feasible, best_feasible_cost, best_any, best_any_cost
        improved = False
        if sol.is_feasible():
            c = evaluator.cost(sol)
            if c < best_feasible_cost:
                best_feasible, best_feasible_cost = sol, c
                improved = True
        pc = evaluator.penalised_cost(sol)
        if pc < best_any_cost:
            best_any, best_any_cost = sol, pc
            if best_feasible is None:
                improved = True
        return improved

    def fresh() -> Solution:
        return ls.educate(make_random(data, rng), evaluator, rng, deadline)

    def expired() -> bool:
        return deadline is not None and time.perf_counter() >= deadline

    for _ in range(params.population_min):
        if population and expired():
            break
        sol = fresh()
        population.append(sol)
        consider(sol)

    trace: list[dict] = []
    iteration = 0
    since_improvement = 0
    since_restart = 0

    def out_of_budget() -> bool:
        if params.max_iterations is not None and iteration >= params.max_iterations:
            return True
        if params.no_improvement is not None and since_improvement >= params.no_improvement:
            return True
        if params.max_seconds is not None and time.perf_counter() - started >= params.max_seconds:
            return True
        return False

    while len(population) >= 2 and not out_of_budget():
        iteration += 1
        p1, p2 = select_parents(population, rng, evaluator, 2)
        child = srex_crossover(p1, p2, data, evaluator, rng)
        child = ls.educate(child, evaluator, rng, deadline)
        population.append(child)
        state = state.record(child)
        if consider(child):
            since_improvement = 0
            since_restart = 0
        else:
            since_improvement += 1
            since_restart += 1

        if len(population) > params.population_max:
            population = list(select_survivors(population, params.population_min, evaluator))

        if state.full:
            state = update_penalties(state)
            evaluator = state.evaluator()

        if since_restart >= params.restart_after:
            ranked = sorted(range(len(population)), key=lambda i: (evaluator.penalised_cost(population[i]), i))
            keep = max(1, len(population) - int(params.restart_fraction * len(population)))
            population = [population[i] for i in sorted(ranked[:keep])]
            while len(population) < params.population_min and not expired():
                sol = fresh()
                population.append(sol)
                consider(sol)
            since_restart = 0

        trace.append(
            {
                "iteration": iteration,
                "best_penalised_cost": best_feasible_cost if best_feasible is not None else best_any_cost,
                "best_cost": best_feasible_cost if best_feasible is not None else None,
                "feasible_count": sum(1 for s in population if s.is_feasible()),
                "penalties": state.coefficients(),
            }
        )

    seconds = time.perf_counter() - started
    if best_feasible is not None:
        return SolveResult(best_feasible, int(best_feasible_cost), True, iteration, seconds, trace)
    assert best_any is not None
    return SolveResult(best_any, int(best_any_cost), False, iteration, seconds, trace)
