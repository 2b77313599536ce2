"""Deterministic random instance generator for desk-scale experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .instance import (
    UNBOUNDED,
    Client,
    InstanceError,
    Node,
    ProblemData,
    VehicleType,
    check,
    euclidean_matrix,
)
from .rng import RandomNumberGenerator, derive_seed

VARIANTS = (
    "TSP", "CVRP", "VRPTW", "VRPB", "MDVRPTW", "PCVRPTW", "GVRP",
    "OVRP", "VRPMB",
)

# Stable per-variant salt so that (variant, n, seed) picks distinct streams.
_SALT = {name: k + 1 for k, name in enumerate(VARIANTS)}


@dataclass(frozen=True)
class GeneratorSpec:
    variant: str
    n: int
    seed: int
    coord_range: tuple[int, int] = (0, 1000)
    demand_range: tuple[int, int] = (1, 10)
    tw_width: int = 300
    route_size: int = 10
    service: int = 10


def _uniform(rng: RandomNumberGenerator, lo: int, hi: int) -> int:
    return lo + rng.randint(hi - lo + 1)


def generate_instance(spec: GeneratorSpec | None = None, **kwargs) -> ProblemData:
    """Generate a valid instance. ``n`` counts clients (depots excluded).

    Either pass a :class:`GeneratorSpec` or its fields as keyword arguments.
    """
    if spec is None:
        spec = GeneratorSpec(**kwargs)
    variant = spec.variant.upper()
    if variant not in VARIANTS:
        raise InstanceError("unsupported-variant", f"{spec.variant!r} not in {VARIANTS}")
    if spec.n < 2:
        raise InstanceError("bad-size", "n must be at least 2")

    rng = RandomNumberGenerator(derive_seed(_SALT[variant], spec.n, spec.seed))
    n_dep = 3 if variant == "MDVRPTW" and spec.n >= 6 else (2 if variant == "MDVRPTW" else 1)
    lo, hi = spec.coord_range
    pts = [(_uniform(rng, lo, hi), _uniform(rng, lo, hi)) for _ in range(n_dep + spec.n)]
    dist = euclidean_matrix(pts)
    nodes = [Node(id=k, x=p[0], y=p[1], is_depot=k < n_dep) for k, p in enumerate(pts)]
    ids = list(range(n_dep, n_dep + spec.n))

    timed = variant in ("VRPTW", "MDVRPTW", "PCVRPTW")
    dlo, dhi = spec.demand_range
    if variant == "TSP":
        demands = [0] * spec.n
    else:
        demands = [_uniform(rng, dlo, dhi) for _ in ids]
    if variant in ("VRPB", "VRPMB"):
        # Roughly a third are backhauls; keep at least one of each kind.
        signs = [-1 if rng.rand() < 1 / 3 else 1 for _ in ids]
        signs[0] = 1
        if all(s > 0 for s in signs):
            signs[-1] = -1
        demands = [s * q for s, q in zip(signs, demands)]

    # Each client is served from its nearest depot in time-window variants.
    def home(i: int) -> int:
        return min(range(n_dep), key=lambda d: (dist[d][i], d))

    service = spec.service if timed else 0
    if timed:
        max_leg = max(dist[home(i)][i] + dist[i][home(i)] for i in ids)
        horizon = 1000 + 2 * max_leg
        depot_tw = (0, horizon)
    else:
        depot_tw = (0, UNBOUNDED)

    clusters: list[int | None] = [None] * spec.n
    if variant == "GVRP":
        n_clusters = max(1, math.ceil(spec.n / 3))
        order = list(range(spec.n))
        rng.shuffle(order)
        for rank, k in enumerate(order):
            clusters[k] = rank % n_clusters

    clients = []
    for k, i in enumerate(ids):
        early, late = depot_tw
        if timed:
            d = home(i)
            first = dist[d][i]
            last = depot_tw[1] - service - dist[i][d]
            centre = _uniform(rng, first, last)
            early = max(depot_tw[0], centre - spec.tw_width // 2)
            late = min(last, centre + spec.tw_width // 2)
        prize = 0
        required = True
        if variant == "PCVRPTW":
            prize = _uniform(rng, 50, 400)
            required = False
        clients.append(
            Client(node=i, demand=demands[k], tw_early=early, tw_late=late,
                   service=service, prize=prize, required=required, cluster=clusters[k])
        )

    if variant == "TSP":
        vehicle_types = [VehicleType(capacity=0, count=1, depot=0)]
    else:
        linehaul = sum(q for q in demands if q > 0)
        backhaul = -sum(q for q in demands if q < 0)
        mean = sum(abs(q) for q in demands) / len(demands)
        capacity = max(dhi, math.ceil(mean * spec.route_size))
        routes_needed = math.ceil(max(linehaul, backhaul) / capacity)
        if variant in ("VRPTW", "MDVRPTW", "PCVRPTW"):
            routes_needed = max(routes_needed, math.ceil(spec.n / spec.route_size))
        total = routes_needed + 2
        per_depot = [total // n_dep + (1 if d < total % n_dep else 0) for d in range(n_dep)]
        vehicle_types = [
            VehicleType(capacity=capacity, count=max(1, per_depot[d]), depot=d)
            for d in range(n_dep)
        ]

    data = ProblemData(
        nodes=nodes,
        clients=clients,
        vehicle_types=vehicle_types,
        dist=dist,
        travel_time=dist,
        depot_tw=depot_tw,
        open_routes=variant == "OVRP",
        backhaul_mode={"VRPB": "strict", "VRPMB": "mixed"}.get(variant, "none"),
        depots=tuple(range(n_dep)),
        name=f"{variant}-n{spec.n}-s{spec.seed}",
    )
    return check(data)
