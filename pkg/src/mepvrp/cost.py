"""Route simulation and penalised cost evaluation.

Routes are simulated with a forward schedule pass. Lateness is absorbed as
*time warp*: when a vehicle arrives after a client's window closes, the excess
is recorded and service is assumed to start at the deadline. Penalties are
linear in each violation measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

from .instance import ProblemData, VehicleType

if TYPE_CHECKING:
    from .solution import Solution


class UnknownClientError(ValueError):
    pass


class InfeasibleSolutionError(ValueError):
    pass


@dataclass(frozen=True)
class RouteStats:
    distance: int = 0
    duration: int = 0
    travel: int = 0
    service: int = 0
    wait: int = 0
    delivery: int = 0
    pickup: int = 0
    load: int = 0
    excess_load: int = 0
    time_warp: int = 0
    excess_distance: int = 0
    excess_duration: int = 0
    precedence_violations: int = 0
    schedule: tuple[int, ...] = field(default=(), repr=False)

    @property
    def is_feasible(self) -> bool:
        return not (
            self.excess_load
            or self.time_warp
            or self.excess_distance
            or self.excess_duration
            or self.precedence_violations
        )


EMPTY_STATS = RouteStats()


def simulate_route(
    visits: Sequence[int], vehicle_type: VehicleType | int, data: ProblemData
) -> RouteStats:
    """Simulate one route and collect distance, schedule and violation measures.

    The vehicle leaves its depot at the depot's opening time. Open routes end
    after the last client's service; closed routes return to the depot.
    """
    if not visits:
        return EMPTY_STATS
    vt = data.vehicle_types[vehicle_type] if isinstance(vehicle_type, int) else vehicle_type
    n = data.num_nodes
    n_dep = data.num_depots
    for v in visits:
        if not n_dep <= v < n:
            raise UnknownClientError(f"unknown client id {v}")

    dist = data.dist
    tt = data.travel_time
    early = data.tw_early
    late = data.tw_late
    serv = data.service
    demand = data.demand
    depot = vt.depot
    a0, b0 = data.depot_tw

    distance = travel = service = wait = warp = 0
    schedule = []
    time = a0
    prev = depot
    for v in visits:
        distance += dist[prev][v]
        leg = tt[prev][v]
        travel += leg
        arrive = time + leg
        if arrive < early[v]:
            wait += early[v] - arrive
            start = early[v]
        elif arrive > late[v]:
            warp += arrive - late[v]
            start = late[v]
        else:
            start = arrive
        schedule.append(start)
        service += serv[v]
        time = start + serv[v]
        prev = v
    if not data.open_routes:
        distance += dist[prev][depot]
        leg = tt[prev][depot]
        travel += leg
        arrive = time + leg
        if arrive > b0:
            warp += arrive - b0
    duration = travel + service + wait

    capacity = vt.capacity
    mode = data.backhaul_mode
    delivery = sum(demand[v] for v in visits if demand[v] > 0)
    pickup = -sum(demand[v] for v in visits if demand[v] < 0)
    precedence = 0
    if mode == "mixed":
        level = delivery
        peak = level
        excess_load = max(0, level - capacity)
        for v in visits:
            level -= demand[v]
            if level > peak:
                peak = level
            if level > capacity:
                excess_load += level - capacity
        load = peak
    else:
        load = max(delivery, pickup)
        excess_load = max(0, delivery - capacity) + max(0, pickup - capacity)
        if mode == "strict":
            # Zero-demand stops are neutral; scan the linehaul/backhaul sequence only.
            signed = [v for v in visits if demand[v]]
            for a, b in zip(signed, signed[1:]):
                if demand[a] < 0 < demand[b]:
                    precedence += 1

    excess_distance = 0
    if vt.max_distance is not None and distance > vt.max_distance:
        excess_distance = distance - vt.max_distance
    excess_duration = 0
    if vt.max_duration is not None and duration > vt.max_duration:
        excess_duration = duration - vt.max_duration

    return RouteStats(
        distance=distance,
        duration=duration,
        travel=travel,
        service=service,
        wait=wait,
        delivery=delivery,
        pickup=pickup,
        load=load,
        excess_load=excess_load,
        time_warp=warp,
        excess_distance=excess_distance,
        excess_duration=excess_duration,
        precedence_violations=precedence,
        schedule=tuple(schedule),
    )


class CostEvaluator:
    """Penalty coefficients plus the penalised-cost function.

    Duration excess is priced with the distance coefficient, as is any excess
    over a global prize budget.
    """

    __slots__ = ("_load", "_tw", "_dist")

    def __init__(self, load_penalties: Sequence[float], tw_penalty: float, dist_penalty: float):
        if any(c < 0 for c in load_penalties) or tw_penalty < 0 or dist_penalty < 0:
            raise ValueError("penalty coefficients must be non-negative")
        self._load = tuple(load_penalties)
        self._tw = tw_penalty
        self._dist = dist_penalty

    @property
    def load_coeffs(self) -> tuple[float, ...]:
        return self._load

    @property
    def tw_coeff(self) -> float:
        return self._tw

    @property
    def dist_coeff(self) -> float:
        return self._dist

    def coefficients(self) -> dict[str, object]:
        return {"load": list(self._load), "tw": self._tw, "dist": self._dist}

    def load_penalty(self, load: int, capacity: int, dimension: int) -> int:
        excess = load - capacity
        if excess <= 0:
            return 0
        return int(self._load[dimension] * excess)

    def tw_penalty(self, time_warp: int) -> int:
        return int(self._tw * time_warp)

    def dist_penalty(self, distance: int, max_distance: int) -> int:
        excess = distance - max_distance
        if excess <= 0:
            return 0
        return int(self._dist * excess)

    def route_penalty(self, stats: RouteStats) -> int:
        """Sum of all penalty terms of one route."""
        return int(
            self._load[0] * stats.excess_load
            + self._tw * stats.time_warp
            + self._dist * (stats.excess_distance + stats.excess_duration)
        )

    def penalised_cost(self, solution: "Solution") -> int:
        return int(
            solution.distance()
            + solution.uncollected_prizes()
            + self._load[0] * solution.excess_load()
            + self._tw * solution.time_warp()
            + self._dist * (
                solution.excess_distance()
                + solution.excess_duration()
                + solution.excess_budget()
            )
        )

    def cost(self, solution: "Solution") -> int:
        if not solution.is_feasible():
            raise InfeasibleSolutionError("cost is only defined for feasible solutions")
        return solution.distance() + solution.uncollected_prizes()

    def __repr__(self) -> str:
        return f"CostEvaluator(load_penalties={list(self._load)}, tw_penalty={self._tw}, dist_penalty={self._dist})"


def penalised_cost(solution: "Solution", evaluator: CostEvaluator) -> int:
    return evaluator.penalised_cost(solution)


def cost(solution: "Solution", evaluator: CostEvaluator | None = None) -> int:
    if evaluator is None:
        evaluator = CostEvaluator([0], 0, 0)
    return evaluator.cost(solution)
