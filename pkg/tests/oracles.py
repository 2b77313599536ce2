"""Independent reference implementations used as test oracles.

Nothing here imports solver internals beyond the instance data model, so a
bug in the solver's own bookkeeping cannot hide behind a shared helper.
"""

from __future__ import annotations

import itertools
import math

from mepvrp.instance import Client, Node, ProblemData, VehicleType


def euclid(a: tuple[float, float], b: tuple[float, float]) -> int:
    """Rounded Euclidean distance, half away from zero."""
    d = math.hypot(a[0] - b[0], a[1] - b[1])
    return int(math.floor(d + 0.5))


def make_data(
    coords: list[tuple[float, float]],
    demands: list[int] | None = None,
    capacity: int = 1000,
    vehicles: int = 1,
    windows: list[tuple[int, int]] | None = None,
    service: list[int] | None = None,
    depot_tw: tuple[int, int] = (0, 1 << 60),
    **kwargs,
) -> ProblemData:
    """Single-depot instance: ``coords[0]`` is the depot, the rest are clients."""
    n = len(coords)
    nodes = [Node(i, x, y, is_depot=(i == 0)) for i, (x, y) in enumerate(coords)]
    clients = []
    for i in range(1, n):
        early, late = windows[i] if windows else depot_tw
        clients.append(
            Client(
                i,
                demand=demands[i] if demands else 0,
                tw_early=early,
                tw_late=late,
                service=service[i] if service else 0,
            )
        )
    matrix = [[euclid(a, b) for b in coords] for a in coords]
    return ProblemData(
        nodes=nodes,
        clients=clients,
        vehicle_types=[VehicleType(capacity, vehicles)],
        dist=matrix,
        travel_time=matrix,
        depot_tw=depot_tw,
        **kwargs,
    )


def brute_force_tsp(data: ProblemData) -> int:
    """Optimal closed tour length over all client permutations from depot 0."""
    clients = list(data.client_ids)
    d = data.dist
    best = None
    # The depot anchors the tour, so every client order is a distinct candidate.
    for perm in itertools.permutations(clients):
        tour = (0,) + perm + (0,)
        length = sum(d[a][b] for a, b in zip(tour, tour[1:]))
        if best is None or length < best:
            best = length
    return best


def route_ok(data: ProblemData, visits: list[int], vtype: int) -> bool:
    """Direct check of one route against load, time and length limits."""
    vt = data.vehicle_types[vtype]
    depot = vt.depot
    q = data.demand
    a0, b0 = data.depot_tw

    # Load: what is physically on board after every stop.
    if data.backhaul_mode == "mixed":
        on_board = sum(q[v] for v in visits if q[v] > 0)
        if on_board > vt.capacity:
            return False
        for v in visits:
            on_board -= q[v]
            if on_board > vt.capacity:
                return False
    else:
        if sum(q[v] for v in visits if q[v] > 0) > vt.capacity:
            return False
        if -sum(q[v] for v in visits if q[v] < 0) > vt.capacity:
            return False
        if data.backhaul_mode == "strict":
            seen_backhaul = False
            for v in visits:
                if q[v] < 0:
                    seen_backhaul = True
                elif q[v] > 0 and seen_backhaul:
                    return False

    # Time: start of service recursion; any lateness is infeasible.
    t = a0
    prev = depot
    length = 0
    for v in visits:
        length += data.dist[prev][v]
        arrive = t + data.travel_time[prev][v]
        if arrive > data.tw_late[v]:
            return False
        t = max(arrive, data.tw_early[v]) + data.service[v]
        prev = v
    if not data.open_routes:
        length += data.dist[prev][depot]
        t += data.travel_time[prev][depot]
        if t > b0:
            return False
    if vt.max_duration is not None and t - a0 > vt.max_duration:
        return False
    if vt.max_distance is not None and length > vt.max_distance:
        return False
    return True


def solution_ok(data: ProblemData, routes: list[tuple[list[int], int]]) -> bool:
    """Feasibility of a whole solution given as ``(visits, vehicle_type)`` pairs."""
    counts = {}
    for visits, _ in routes:
        for v in visits:
            counts[v] = counts.get(v, 0) + 1
    if any(c > 1 for c in counts.values()):
        return False
    for c in data.clients:
        if c.cluster is None and c.required and counts.get(c.node, 0) != 1:
            return False
    for members in data.clusters.values():
        if sum(counts.get(m, 0) for m in members) != 1:
            return False
    used = [0] * len(data.vehicle_types)
    for visits, vt in routes:
        if visits:
            used[vt] += 1
    if any(u > vt.count for u, vt in zip(used, data.vehicle_types)):
        return False
    if data.prize_budget is not None:
        total = 0
        for visits, vt in routes:
            if visits:
                depot = data.vehicle_types[vt].depot
                path = [depot] + list(visits) + ([] if data.open_routes else [depot])
                total += sum(data.dist[a][b] for a, b in zip(path, path[1:]))
        if total > data.prize_budget:
            return False
    return all(route_ok(data, visits, vt) for visits, vt in routes if visits)


def earliest_start(data: ProblemData, visits: list[int]) -> list[int]:
    """Service start times with waiting allowed and lateness ignored."""
    t = data.depot_tw[0]
    prev = 0
    out = []
    for v in visits:
        t = max(t + data.travel_time[prev][v], data.tw_early[v])
        out.append(t)
        t += data.service[v]
        prev = v
    return out
