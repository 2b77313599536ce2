"""Routes, solutions, feasibility verdicts and the broken-pairs distance."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Sequence

from .cost import RouteStats, simulate_route
from .instance import ProblemData
from .rng import RandomNumberGenerator

_serials = itertools.count()


class InstanceMismatchError(ValueError):
    pass


class Route:
    """One vehicle's ordered client visits plus their simulated statistics."""

    __slots__ = ("vehicle_type", "_visits", "stats")

    def __init__(
        self,
        data: ProblemData,
        visits: Sequence[int],
        vehicle_type: int = 0,
        stats: RouteStats | None = None,
    ):
        self.vehicle_type = vehicle_type
        self._visits = tuple(visits)
        if stats is None:
            stats = simulate_route(self._visits, vehicle_type, data)
        self.stats = stats

    def visits(self) -> list[int]:
        return list(self._visits)

    def __iter__(self) -> Iterator[int]:
        return iter(self._visits)

    def __len__(self) -> int:
        return len(self._visits)

    def __getitem__(self, idx):
        return self._visits[idx]

    def key(self) -> tuple[int, tuple[int, ...]]:
        return (self.vehicle_type, self._visits)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Route):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"Route({list(self._visits)}, vehicle_type={self.vehicle_type})"

    def distance(self) -> int:
        return self.stats.distance

    def duration(self) -> int:
        return self.stats.duration

    def time_warp(self) -> int:
        return self.stats.time_warp

    def excess_load(self) -> int:
        return self.stats.excess_load


@dataclass(frozen=True)
class Issue:
    """One violated constraint: which constraint, where, and by how much."""

    constraint: str
    amount: int
    route: int | None = None
    client: int | None = None

    def __str__(self) -> str:
        where = f" route {self.route}" if self.route is not None else ""
        who = f" client {self.client}" if self.client is not None else ""
        return f"{self.constraint}={self.amount}{where}{who}"


_ROUTE_MEASURES = (
    "excess_load",
    "time_warp",
    "excess_distance",
    "excess_duration",
    "precedence_violations",
)


class Solution:
    """An immutable set of routes over one instance.

    Empty routes are dropped on construction. Route order is irrelevant for
    equality.
    """

    def __init__(self, data: ProblemData, routes: Iterable[Route] | Iterable[Sequence[int]]):
        self.data = data
        built: list[Route] = []
        remaining = [vt.count for vt in data.vehicle_types]
        for r in routes:
            if isinstance(r, Route):
                if len(r):
                    built.append(r)
                continue
            visits = list(r)
            if not visits:
                continue
            vt_idx = next((k for k, left in enumerate(remaining) if left > 0), 0)
            if remaining and remaining[vt_idx] > 0:
                remaining[vt_idx] -= 1
            built.append(Route(data, visits, vt_idx))
        self._routes = tuple(built)
        self.serial = next(_serials)
        self._bp: dict[int, float] = {}

        dist = exl = tw = exd = exdur = prec = 0
        for r in self._routes:
            s = r.stats
            dist += s.distance
            exl += s.excess_load
            tw += s.time_warp
            exd += s.excess_distance
            exdur += s.excess_duration
            prec += s.precedence_violations
        self._distance = dist
        self._excess_load = exl
        self._time_warp = tw
        self._excess_distance = exd
        self._excess_duration = exdur
        self._precedence = prec

        prize = data.prize
        visited: set[int] = set()
        duplicates: list[int] = []
        for r in self._routes:
            for v in r:
                if v in visited:
                    duplicates.append(v)
                visited.add(v)
        self._visited = frozenset(visited)
        self._duplicates = tuple(duplicates)
        self._uncollected = sum(
            prize[c.node] for c in data.clients if c.cluster is None and not c.required and c.node not in visited
        )
        budget = data.prize_budget
        self._excess_budget = max(0, dist - budget) if budget is not None else 0
        self._coverage = tuple(self._coverage_issues())
        self._feasible = not (exl or tw or exd or exdur or prec or self._excess_budget or self._coverage)
        self._key: tuple | None = None
        self._pairs: frozenset[int] | None = None

    # -- PyVRP-like accessors used by operators --------------------------------

    def routes(self) -> list[Route]:
        return list(self._routes)

    def num_routes(self) -> int:
        return len(self._routes)

    def is_feasible(self) -> bool:
        return self._feasible

    def distance(self) -> int:
        return self._distance

    def excess_load(self) -> int:
        return self._excess_load

    def time_warp(self) -> int:
        return self._time_warp

    def excess_distance(self) -> int:
        return self._excess_distance

    def excess_duration(self) -> int:
        return self._excess_duration

    def excess_budget(self) -> int:
        return self._excess_budget

    def precedence_violations(self) -> int:
        return self._precedence

    def uncollected_prizes(self) -> int:
        return self._uncollected

    def visited(self) -> frozenset[int]:
        return self._visited

    def visits(self) -> list[list[int]]:
        return [r.visits() for r in self._routes]

    # -- coverage -----------------------------------------------------------

    def _coverage_issues(self) -> Iterator[Issue]:
        data = self.data
        visited = self._visited
        for v in self._duplicates:
            yield Issue("duplicate_visit", 1, client=v)
        for c in data.clients:
            if c.cluster is None and c.required and c.node not in visited:
                yield Issue("missing_client", 1, client=c.node)
        for cid, members in data.clusters.items():
            hits = sum(1 for m in members if m in visited)
            if hits != 1:
                yield Issue("cluster_visits", hits, client=cid)
        used = [0] * len(data.vehicle_types)
        for r in self._routes:
            if 0 <= r.vehicle_type < len(used):
                used[r.vehicle_type] += 1
        for k, vt in enumerate(data.vehicle_types):
            if used[k] > vt.count:
                yield Issue("fleet_size", used[k] - vt.count, route=None, client=k)
        if self._excess_budget:
            yield Issue("prize_budget", self._excess_budget)

    def feasibility_report(self) -> list[Issue]:
        out: list[Issue] = []
        for idx, r in enumerate(self._routes):
            for name in _ROUTE_MEASURES:
                amount = getattr(r.stats, name)
                if amount:
                    out.append(Issue(name, amount, route=idx))
        out.extend(self._coverage)
        return out

    # -- identity -----------------------------------------------------------

    def key(self) -> tuple:
        if self._key is None:
            self._key = tuple(sorted(r.key() for r in self._routes))
        return self._key

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Solution):
            return NotImplemented
        if self.key() != other.key():
            return False
        return self.data is other.data or self.data == other.data

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"Solution({self.visits()})"

    # -- diversity ----------------------------------------------------------

    def adjacency(self) -> frozenset[int]:
        """Undirected adjacencies (depot legs included) encoded as ints."""
        if self._pairs is None:
            n = self.data.num_nodes
            closed = not self.data.open_routes
            pairs = set()
            for r in self._routes:
                depot = self.data.vehicle_types[r.vehicle_type].depot
                prev = depot
                for v in r:
                    a, b = (prev, v) if prev < v else (v, prev)
                    pairs.add(a * n + b)
                    prev = v
                if closed:
                    a, b = (prev, depot) if prev < depot else (depot, prev)
                    pairs.add(a * n + b)
            self._pairs = frozenset(pairs)
        return self._pairs

    def to_dict(self, evaluator=None) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "routes": self.visits(),
            "vehicle_types": [r.vehicle_type for r in self._routes],
            "distance": self._distance,
            "uncollected_prizes": self._uncollected,
            "feasible": self._feasible,
            "route_stats": [
                {
                    "distance": r.stats.distance,
                    "duration": r.stats.duration,
                    "load": r.stats.load,
                    "excess_load": r.stats.excess_load,
                    "time_warp": r.stats.time_warp,
                    "excess_distance": r.stats.excess_distance,
                    "excess_duration": r.stats.excess_duration,
                    "precedence_violations": r.stats.precedence_violations,
                }
                for r in self._routes
            ],
        }
        if evaluator is not None:
            doc["penalised_cost"] = evaluator.penalised_cost(self)
            if self._feasible:
                doc["cost"] = evaluator.cost(self)
        return doc

    @classmethod
    def make_random(cls, data: ProblemData, rng: RandomNumberGenerator) -> "Solution":
        return make_random(data, rng)


def make_random(data: ProblemData, rng: RandomNumberGenerator) -> Solution:
    """Random solution: chosen clients shuffled, then dealt round-robin over vehicles.

    Required clients are always chosen, optional prize clients with
    probability 1/2 and one random node per cluster. Under strict backhaul the
    linehauls of each route are moved ahead of its backhauls.
    """
    chosen = []
    for c in data.clients:
        if c.cluster is not None:
            continue
        if c.required or rng.rand() < 0.5:
            chosen.append(c.node)
    for members in data.clusters.values():
        chosen.append(members[rng.randint(len(members))])
    rng.shuffle(chosen)

    vehicles = [k for k, vt in enumerate(data.vehicle_types) for _ in range(vt.count)]
    if not vehicles:
        return Solution(data, [])
    buckets: list[list[int]] = [[] for _ in vehicles]
    for pos, v in enumerate(chosen):
        buckets[pos % len(vehicles)].append(v)
    if data.backhaul_mode == "strict":
        demand = data.demand
        buckets = [sorted(b, key=lambda v: demand[v] < 0) for b in buckets]
    routes = [Route(data, b, vt) for b, vt in zip(buckets, vehicles) if b]
    return Solution(data, routes)


def is_feasible(solution: Solution, data: ProblemData | None = None) -> bool:
    return solution.is_feasible()


def feasibility_report(solution: Solution, data: ProblemData | None = None) -> list[Issue]:
    return solution.feasibility_report()


def broken_pairs_distance(s1: Solution, s2: Solution, data: ProblemData | None = None) -> float:
    """Fraction of ``s1``'s adjacencies that ``s2`` does not share."""
    if s1.data is not s2.data and s1.data != s2.data:
        raise InstanceMismatchError("solutions belong to different instances")
    cached = s1._bp.get(s2.serial)
    if cached is not None:
        return cached
    a = s1.adjacency()
    if not a:
        d = 0.0
    else:
        d = len(a - s2.adjacency()) / len(a)
    s1._bp[s2.serial] = d
    return d


diversity_distance = broken_pairs_distance
