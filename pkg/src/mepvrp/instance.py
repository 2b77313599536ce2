"""Immutable problem instances for the supported routing variants.

A :class:`ProblemData` covers every variant through flags and optional
per-client attributes: capacity, time windows and service times, strict or
mixed backhauls, open routes, multiple depots, optional prize-collecting
clients and client clusters. Depots always occupy the lowest node ids, so a
route (which never contains a depot) only holds ids ``>= num_depots >= 1``.

All times, distances, loads and costs are integers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Sequence

#: Stand-in for "no limit" on times, durations and distances.
UNBOUNDED = 1 << 60

BACKHAUL_MODES = ("none", "strict", "mixed")


class InstanceError(ValueError):
    """Raised when an instance cannot be built or fails validation."""

    def __init__(self, kind: str, message: str, line: int | None = None):
        self.kind = kind
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{kind}: {message}")


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    is_depot: bool = False


@dataclass(frozen=True)
class Client:
    node: int
    demand: int = 0
    tw_early: int = 0
    tw_late: int = UNBOUNDED
    service: int = 0
    prize: int = 0
    required: bool = True
    cluster: int | None = None


@dataclass(frozen=True)
class VehicleType:
    capacity: int
    count: int = 1
    depot: int = 0
    max_duration: int | None = None
    max_distance: int | None = None


@dataclass(frozen=True)
class Violation:
    """One failed instance invariant: offending field, index and reason."""

    kind: str
    field: str
    index: int | None
    message: str

    def __str__(self) -> str:
        return self.message


def _freeze_matrix(matrix: Sequence[Sequence[int]]) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(int(v) for v in row) for row in matrix)


@dataclass(frozen=True, eq=False)
class ProblemData:
    nodes: tuple[Node, ...]
    clients: tuple[Client, ...]
    vehicle_types: tuple[VehicleType, ...]
    dist: tuple[tuple[int, ...], ...]
    travel_time: tuple[tuple[int, ...], ...]
    depot_tw: tuple[int, int] = (0, UNBOUNDED)
    open_routes: bool = False
    backhaul_mode: str = "none"
    prize_budget: int | None = None
    depots: tuple[int, ...] = (0,)
    name: str = ""

    # Derived per-node lookup tables, filled in __post_init__.
    demand: tuple[int, ...] = field(init=False, repr=False)
    tw_early: tuple[int, ...] = field(init=False, repr=False)
    tw_late: tuple[int, ...] = field(init=False, repr=False)
    service: tuple[int, ...] = field(init=False, repr=False)
    prize: tuple[int, ...] = field(init=False, repr=False)
    required: tuple[bool, ...] = field(init=False, repr=False)
    cluster_of: tuple[int | None, ...] = field(init=False, repr=False)
    clusters: dict[int, tuple[int, ...]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        setattr_ = object.__setattr__
        setattr_(self, "nodes", tuple(self.nodes))
        setattr_(self, "clients", tuple(self.clients))
        setattr_(self, "vehicle_types", tuple(self.vehicle_types))
        setattr_(self, "dist", _freeze_matrix(self.dist))
        setattr_(self, "travel_time", _freeze_matrix(self.travel_time))
        setattr_(self, "depot_tw", (int(self.depot_tw[0]), int(self.depot_tw[1])))
        setattr_(self, "depots", tuple(int(d) for d in self.depots))

        n = len(self.nodes)
        a0, b0 = self.depot_tw
        demand = [0] * n
        early = [a0] * n
        late = [b0] * n
        service = [0] * n
        prize = [0] * n
        required = [False] * n
        cluster_of: list[int | None] = [None] * n
        clusters: dict[int, list[int]] = {}
        for c in self.clients:
            if not 0 <= c.node < n:
                continue
            demand[c.node] = c.demand
            early[c.node] = c.tw_early
            late[c.node] = c.tw_late
            service[c.node] = c.service
            prize[c.node] = c.prize
            required[c.node] = c.required
            cluster_of[c.node] = c.cluster
            if c.cluster is not None:
                clusters.setdefault(c.cluster, []).append(c.node)
        setattr_(self, "demand", tuple(demand))
        setattr_(self, "tw_early", tuple(early))
        setattr_(self, "tw_late", tuple(late))
        setattr_(self, "service", tuple(service))
        setattr_(self, "prize", tuple(prize))
        setattr_(self, "required", tuple(required))
        setattr_(self, "cluster_of", tuple(cluster_of))
        setattr_(self, "clusters", {k: tuple(v) for k, v in sorted(clusters.items())})

    # -- convenience views -------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_depots(self) -> int:
        return len(self.depots)

    @property
    def num_clients(self) -> int:
        return len(self.clients)

    @property
    def num_vehicles(self) -> int:
        return sum(vt.count for vt in self.vehicle_types)

    @property
    def client_ids(self) -> tuple[int, ...]:
        return tuple(c.node for c in self.clients)

    @property
    def has_clusters(self) -> bool:
        return bool(self.clusters)

    @property
    def has_prizes(self) -> bool:
        return any(not c.required for c in self.clients) and not self.has_clusters

    @cached_property
    def is_timed(self) -> bool:
        """True when schedules can produce time warp or duration excess."""
        a0, b0 = self.depot_tw
        if b0 < UNBOUNDED:
            return True
        if any(vt.max_duration is not None for vt in self.vehicle_types):
            return True
        return any(c.tw_early > a0 or c.tw_late < b0 for c in self.clients)

    @cached_property
    def is_symmetric(self) -> bool:
        d = self.dist
        n = len(d)
        return all(d[i][j] == d[j][i] for i in range(n) for j in range(i + 1, n))

    def replace(self, **changes: Any) -> "ProblemData":
        kwargs = {
            name: getattr(self, name)
            for name in (
                "nodes", "clients", "vehicle_types", "dist", "travel_time",
                "depot_tw", "open_routes", "backhaul_mode", "prize_budget",
                "depots", "name",
            )
        }
        kwargs.update(changes)
        return ProblemData(**kwargs)

    # -- equality / serialization ------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "nodes": [
                {"id": nd.id, "x": nd.x, "y": nd.y, "is_depot": nd.is_depot}
                for nd in self.nodes
            ],
            "clients": [
                {
                    "node": c.node,
                    "demand": c.demand,
                    "tw_early": c.tw_early,
                    "tw_late": c.tw_late,
                    "service": c.service,
                    "prize": c.prize,
                    "required": c.required,
                    "cluster": c.cluster,
                }
                for c in self.clients
            ],
            "vehicle_types": [
                {
                    "capacity": vt.capacity,
                    "count": vt.count,
                    "depot": vt.depot,
                    "max_duration": vt.max_duration,
                    "max_distance": vt.max_distance,
                }
                for vt in self.vehicle_types
            ],
            "dist": [list(row) for row in self.dist],
            "travel_time": [list(row) for row in self.travel_time],
            "depot_tw": list(self.depot_tw),
            "open_routes": self.open_routes,
            "backhaul_mode": self.backhaul_mode,
            "prize_budget": self.prize_budget,
            "depots": list(self.depots),
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProblemData):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(to_json(self))


def to_json(data: ProblemData) -> str:
    """Serialize to the native JSON format (stable key order)."""
    return json.dumps(data.to_dict(), sort_keys=True, separators=(",", ":"))


_JSON_KEYS = {
    "name", "nodes", "clients", "vehicle_types", "dist", "travel_time",
    "depot_tw", "open_routes", "backhaul_mode", "prize_budget", "depots",
}


def _require_int(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceError("non-integer-value", f"{what} must be an integer, got {value!r}")
    return value


def _opt_int(value: Any, what: str) -> int | None:
    return None if value is None else _require_int(value, what)


def from_dict(doc: dict[str, Any]) -> ProblemData:
    """Build (without validating) a ProblemData from a native-json document."""
    unknown = set(doc) - _JSON_KEYS
    if unknown:
        raise InstanceError("unknown-key", f"unexpected keys {sorted(unknown)}")
    for key in ("nodes", "clients", "vehicle_types", "dist"):
        if key not in doc:
            raise InstanceError("missing-section", f"missing key {key!r}")
    try:
        nodes = tuple(
            Node(id=_require_int(nd["id"], "node id"), x=nd["x"], y=nd["y"],
                 is_depot=bool(nd.get("is_depot", False)))
            for nd in doc["nodes"]
        )
        clients = tuple(
            Client(
                node=_require_int(c["node"], "client node"),
                demand=_require_int(c.get("demand", 0), "demand"),
                tw_early=_require_int(c.get("tw_early", 0), "tw_early"),
                tw_late=_require_int(c.get("tw_late", UNBOUNDED), "tw_late"),
                service=_require_int(c.get("service", 0), "service"),
                prize=_require_int(c.get("prize", 0), "prize"),
                required=bool(c.get("required", True)),
                cluster=_opt_int(c.get("cluster"), "cluster"),
            )
            for c in doc["clients"]
        )
        vehicle_types = tuple(
            VehicleType(
                capacity=_require_int(vt["capacity"], "capacity"),
                count=_require_int(vt.get("count", 1), "count"),
                depot=_require_int(vt.get("depot", 0), "depot"),
                max_duration=_opt_int(vt.get("max_duration"), "max_duration"),
                max_distance=_opt_int(vt.get("max_distance"), "max_distance"),
            )
            for vt in doc["vehicle_types"]
        )
    except KeyError as exc:
        raise InstanceError("missing-field", f"missing field {exc.args[0]!r}") from None
    dist = doc["dist"]
    for row in dist:
        for v in row:
            _require_int(v, "dist entry")
    travel = doc.get("travel_time", dist)
    for row in travel:
        for v in row:
            _require_int(v, "travel_time entry")
    depots = doc.get("depots")
    if depots is None:
        depots = [nd.id for nd in nodes if nd.is_depot]
    tw = doc.get("depot_tw", [0, UNBOUNDED])
    return ProblemData(
        nodes=nodes,
        clients=clients,
        vehicle_types=vehicle_types,
        dist=dist,
        travel_time=travel,
        depot_tw=(_require_int(tw[0], "depot_tw"), _require_int(tw[1], "depot_tw")),
        open_routes=bool(doc.get("open_routes", False)),
        backhaul_mode=doc.get("backhaul_mode", "none"),
        prize_budget=_opt_int(doc.get("prize_budget"), "prize_budget"),
        depots=tuple(depots),
        name=str(doc.get("name", "")),
    )


def validate(data: ProblemData) -> list[Violation]:
    """Check every instance invariant; an empty list means the instance is valid."""
    out: list[Violation] = []

    def bad(kind: str, fld: str, index: int | None, message: str) -> None:
        out.append(Violation(kind, fld, index, message))

    n = data.num_nodes
    ids = [nd.id for nd in data.nodes]
    if ids != list(range(n)):
        bad("bad-node-ids", "nodes", None, "node ids are not contiguous 0..n-1")
    depot_set = set(data.depots)
    if not data.depots:
        bad("no-depot", "depots", None, "instance has no depot")
    if len(depot_set) != len(data.depots):
        bad("duplicate-depot", "depots", None, "depot list has duplicates")
    if sorted(data.depots) != list(range(len(data.depots))):
        bad("depot-order", "depots", None, "depots must occupy the lowest node ids")
    for nd in data.nodes:
        if nd.is_depot != (nd.id in depot_set):
            bad("depot-flag", "nodes", nd.id, f"node {nd.id} is_depot flag disagrees with depots list")

    a0, b0 = data.depot_tw
    if a0 > b0:
        bad("inconsistent-time-window", "depot_tw", None, "depot time window has a_0 > b_0")

    seen: set[int] = set()
    has_cluster = any(c.cluster is not None for c in data.clients)
    for k, c in enumerate(data.clients):
        if not 0 <= c.node < n:
            bad("unknown-node", "clients", k, f"client {k} refers to unknown node {c.node}")
            continue
        if c.node in depot_set:
            bad("client-on-depot", "clients", k, f"client {k} sits on depot node {c.node}")
        if c.node in seen:
            bad("duplicate-client", "clients", k, f"client {k} duplicates node {c.node}")
        seen.add(c.node)
        if c.tw_early > c.tw_late:
            bad("inconsistent-time-window", "clients", k,
                f"client {k} has tw_early {c.tw_early} > tw_late {c.tw_late}")
        if c.service < 0:
            bad("negative-service", "clients", k, f"client {k} service time negative")
        if c.prize < 0:
            bad("negative-prize", "clients", k, f"client {k} prize negative")
        if has_cluster and c.cluster is None:
            bad("missing-cluster", "clients", k, f"client {k} missing cluster")
    missing = [i for i in range(n) if i not in depot_set and i not in seen]
    for i in missing:
        bad("node-without-client", "nodes", i, f"node {i} is neither a depot nor a client")

    if not data.vehicle_types:
        bad("no-vehicle-type", "vehicle_types", None, "no vehicle types")
    for k, vt in enumerate(data.vehicle_types):
        if vt.capacity < 0:
            bad("negative-capacity", "vehicle_types", k, f"vehicle_type[{k}].capacity negative")
        if vt.count < 0:
            bad("negative-count", "vehicle_types", k, f"vehicle_type[{k}].count negative")
        if vt.depot not in depot_set:
            bad("bad-vehicle-depot", "vehicle_types", k,
                f"vehicle_type[{k}].depot {vt.depot} is not a depot")
        if vt.max_duration is not None and vt.max_duration < 0:
            bad("negative-duration", "vehicle_types", k, f"vehicle_type[{k}].max_duration negative")
        if vt.max_distance is not None and vt.max_distance < 0:
            bad("negative-distance", "vehicle_types", k, f"vehicle_type[{k}].max_distance negative")

    for name in ("dist", "travel_time"):
        mat = getattr(data, name)
        if len(mat) != n or any(len(row) != n for row in mat):
            bad("inconsistent-dimension", name, None, f"{name} is not {n}x{n}")
            continue
        if any(mat[i][i] != 0 for i in range(n)):
            bad("nonzero-diagonal", name, None, f"{name} has a nonzero diagonal")
        if any(v < 0 for row in mat for v in row):
            bad("negative-entry", name, None, f"{name} has negative entries")

    if data.backhaul_mode not in BACKHAUL_MODES:
        bad("bad-backhaul-mode", "backhaul_mode", None,
            f"backhaul_mode {data.backhaul_mode!r} not in {BACKHAUL_MODES}")
    elif data.backhaul_mode == "none":
        for k, c in enumerate(data.clients):
            if c.demand < 0:
                bad("negative-demand", "clients", k,
                    f"client {k} has negative demand but backhaul_mode is none")
    elif data.backhaul_mode == "strict":
        if not any(c.demand > 0 for c in data.clients):
            bad("no-linehaul", "clients", None, "strict backhaul requires a linehaul client")
    if data.prize_budget is not None and data.prize_budget < 0:
        bad("negative-budget", "prize_budget", None, "prize budget negative")
    return out


def check(data: ProblemData) -> ProblemData:
    """Return ``data`` unchanged, or raise on the first violation."""
    problems = validate(data)
    if problems:
        first = problems[0]
        raise InstanceError(first.kind, "; ".join(str(p) for p in problems))
    return data


def nint(value: float) -> int:
    """Round to nearest integer, halves up."""
    return int(math.floor(value + 0.5))


def euclidean_matrix(coords: Iterable[tuple[float, float]]) -> list[list[int]]:
    """Rounded Euclidean distances (nearest integer)."""
    pts = list(coords)
    n = len(pts)
    mat = [[0] * n for _ in range(n)]
    for i in range(n):
        xi, yi = pts[i]
        row = mat[i]
        for j in range(i + 1, n):
            xj, yj = pts[j]
            d = nint(math.hypot(xi - xj, yi - yj))
            row[j] = d
            mat[j][i] = d
    return mat
