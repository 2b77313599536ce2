"""Instance readers: TSPLIB/VRPLIB-style text and the native JSON document."""

from __future__ import annotations

import json
from typing import IO, Union

from .instance import (
    UNBOUNDED,
    Client,
    InstanceError,
    Node,
    ProblemData,
    VehicleType,
    check,
    euclidean_matrix,
    from_dict,
    nint,
)

Source = Union[bytes, str, IO[bytes], IO[str]]

_SECTIONS = {
    "NODE_COORD_SECTION",
    "DEMAND_SECTION",
    "TIME_WINDOW_SECTION",
    "SERVICE_TIME_SECTION",
    "DEPOT_SECTION",
    "BACKHAUL_SECTION",
    "CLUSTER_SECTION",
    "PRIZE_SECTION",
    "EDGE_WEIGHT_SECTION",
}

_HEADER_KEYS = {
    "NAME", "TYPE", "COMMENT", "DIMENSION", "CAPACITY", "VEHICLES",
    "EDGE_WEIGHT_TYPE", "EDGE_WEIGHT_FORMAT", "DISTANCE", "SERVICE_TIME",
    "MAX_DURATION", "BACKHAUL_MODE", "OPEN_ROUTES", "PRIZE_BUDGET",
}


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    raw = source.read()
    return raw.decode("utf-8") if isinstance(raw, bytes) else raw


def sniff_format(text: str) -> str:
    return "native-json" if text.lstrip().startswith("{") else "vrplib"


def parse_instance(source: Source, format: str | None = None, scale: int = 1) -> ProblemData:
    """Parse and validate an instance.

    ``format`` is ``"vrplib"`` or ``"native-json"``; when omitted it is sniffed
    from the first non-blank character. ``scale`` multiplies coordinates and
    time data of VRPLIB input before rounding, so fractional inputs keep their
    precision as integers.
    """
    text = _read_text(source)
    fmt = format or sniff_format(text)
    if fmt == "native-json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InstanceError("malformed-json", exc.msg, line=exc.lineno) from None
        if not isinstance(doc, dict):
            raise InstanceError("malformed-json", "top level must be an object", line=1)
        return check(from_dict(doc))
    if fmt == "vrplib":
        return check(_parse_vrplib(text, scale))
    raise InstanceError("unknown-format", f"unsupported format {fmt!r}")


def read_instance(path: str, format: str | None = None, scale: int = 1) -> ProblemData:
    with open(path, "rb") as fh:
        return parse_instance(fh, format=format, scale=scale)


def _num(token: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise InstanceError("malformed-line", f"not a number: {token!r}", line=lineno) from None


def _int(token: str, lineno: int) -> int:
    value = _num(token, lineno)
    if value != int(value):
        raise InstanceError("non-integer-value", f"expected an integer, got {token!r}", line=lineno)
    return int(value)


def _parse_vrplib(text: str, scale: int) -> ProblemData:
    header: dict[str, str] = {}
    sections: dict[str, list[tuple[int, list[str]]]] = {}
    section_line: dict[str, int] = {}
    current: str | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        head = line.split()[0].rstrip(":")
        if head in _SECTIONS:
            current = head
            sections.setdefault(head, [])
            section_line[head] = lineno
            continue
        if current is None or (":" in line and line.split(":")[0].strip() in _HEADER_KEYS):
            if ":" not in line:
                raise InstanceError("malformed-header", f"expected 'KEY : VALUE', got {line!r}", line=lineno)
            key, value = line.split(":", 1)
            key = key.strip().upper()
            if key not in _HEADER_KEYS:
                raise InstanceError("malformed-header", f"unknown header key {key!r}", line=lineno)
            header[key] = value.strip()
            current = None
            continue
        sections[current].append((lineno, line.split()))

    if "DIMENSION" not in header:
        raise InstanceError("missing-section", "DIMENSION header is required", line=1)
    dim = _int(header["DIMENSION"], 1)
    weight_type = header.get("EDGE_WEIGHT_TYPE", "EUC_2D").upper()

    coords: dict[int, tuple[float, float]] = {}
    for lineno, parts in sections.get("NODE_COORD_SECTION", []):
        if len(parts) < 3:
            raise InstanceError("malformed-line", "coordinate line needs 'id x y'", line=lineno)
        coords[_int(parts[0], lineno)] = (_num(parts[1], lineno) * scale, _num(parts[2], lineno) * scale)

    if weight_type == "EUC_2D":
        if "NODE_COORD_SECTION" not in sections:
            raise InstanceError("missing-section", "EUC_2D requires NODE_COORD_SECTION", line=1)
        if len(coords) != dim:
            raise InstanceError(
                "inconsistent-dimension",
                f"DIMENSION is {dim} but NODE_COORD_SECTION has {len(coords)} entries",
                line=section_line["NODE_COORD_SECTION"],
            )
    elif weight_type == "EXPLICIT":
        if "EDGE_WEIGHT_SECTION" not in sections:
            raise InstanceError("missing-section", "EXPLICIT requires EDGE_WEIGHT_SECTION", line=1)
        fmt = header.get("EDGE_WEIGHT_FORMAT", "FULL_MATRIX").upper()
        if fmt != "FULL_MATRIX":
            raise InstanceError("malformed-header", f"unsupported EDGE_WEIGHT_FORMAT {fmt}", line=1)
    else:
        raise InstanceError("malformed-header", f"unsupported EDGE_WEIGHT_TYPE {weight_type}", line=1)

    file_ids = sorted(coords) if coords else list(range(1, dim + 1))
    if len(file_ids) != dim:
        raise InstanceError("inconsistent-dimension", "node ids do not match DIMENSION", line=1)

    def per_node(section: str, width: int) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for lineno, parts in sections.get(section, []):
            if len(parts) < width:
                raise InstanceError("malformed-line", f"{section} line needs {width} fields", line=lineno)
            nid = _int(parts[0], lineno)
            if nid not in file_ids:
                raise InstanceError("inconsistent-dimension", f"{section} names unknown node {nid}", line=lineno)
            out[nid] = parts[1:] + [str(lineno)]
        return out

    depot_ids: list[int] = []
    for lineno, parts in sections.get("DEPOT_SECTION", []):
        for tok in parts:
            v = _int(tok, lineno)
            if v == -1:
                break
            if v not in file_ids:
                raise InstanceError("inconsistent-dimension", f"depot {v} is not a node", line=lineno)
            depot_ids.append(v)
    if not depot_ids:
        depot_ids = [file_ids[0]]

    order = depot_ids + [i for i in file_ids if i not in depot_ids]
    new_id = {fid: k for k, fid in enumerate(order)}
    n_dep = len(depot_ids)

    demand = {k: _int(v[0], int(v[-1])) for k, v in per_node("DEMAND_SECTION", 2).items()}
    backhaul = per_node("BACKHAUL_SECTION", 2)
    for k, v in backhaul.items():
        demand[k] = _int(v[0], int(v[-1]))
    windows = per_node("TIME_WINDOW_SECTION", 3)
    services = per_node("SERVICE_TIME_SECTION", 2)
    prizes = per_node("PRIZE_SECTION", 2)
    clusters = per_node("CLUSTER_SECTION", 2)
    global_service = _num(header["SERVICE_TIME"], 1) if "SERVICE_TIME" in header else 0.0

    if weight_type == "EUC_2D":
        pts = [coords[fid] for fid in order]
        dist = euclidean_matrix(pts)
    else:
        flat: list[int] = []
        for lineno, parts in sections["EDGE_WEIGHT_SECTION"]:
            flat.extend(nint(_num(tok, lineno) * scale) for tok in parts)
        if len(flat) != dim * dim:
            raise InstanceError(
                "inconsistent-dimension",
                f"EDGE_WEIGHT_SECTION has {len(flat)} entries, expected {dim * dim}",
                line=section_line["EDGE_WEIGHT_SECTION"],
            )
        raw = [flat[r * dim:(r + 1) * dim] for r in range(dim)]
        pos = {fid: k for k, fid in enumerate(file_ids)}
        dist = [[raw[pos[a]][pos[b]] for b in order] for a in order]
        pts = [coords.get(fid, (0.0, 0.0)) for fid in order]

    if depot_ids[0] in windows:
        w = windows[depot_ids[0]]
        depot_tw = (nint(_num(w[0], int(w[-1])) * scale), nint(_num(w[1], int(w[-1])) * scale))
    else:
        depot_tw = (0, UNBOUNDED)

    nodes = [Node(id=k, x=pts[k][0], y=pts[k][1], is_depot=k < n_dep) for k in range(dim)]
    clients = []
    for fid in order[n_dep:]:
        if fid in windows:
            w = windows[fid]
            ln = int(w[-1])
            early, late = nint(_num(w[0], ln) * scale), nint(_num(w[1], ln) * scale)
        else:
            early, late = depot_tw
        if fid in services:
            s = services[fid]
            service = nint(_num(s[0], int(s[-1])) * scale)
        else:
            service = nint(global_service * scale)
        prize = _int(prizes[fid][0], int(prizes[fid][-1])) if fid in prizes else 0
        cluster = _int(clusters[fid][0], int(clusters[fid][-1])) if fid in clusters else None
        clients.append(
            Client(
                node=new_id[fid],
                demand=demand.get(fid, 0),
                tw_early=early,
                tw_late=late,
                service=service,
                prize=prize,
                required=fid not in prizes,
                cluster=cluster,
            )
        )

    capacity = _int(header["CAPACITY"], 1) if "CAPACITY" in header else UNBOUNDED
    vehicles = _int(header["VEHICLES"], 1) if "VEHICLES" in header else max(1, len(clients))
    max_distance = nint(_num(header["DISTANCE"], 1) * scale) if "DISTANCE" in header else None
    max_duration = nint(_num(header["MAX_DURATION"], 1) * scale) if "MAX_DURATION" in header else None
    # Vehicles are split as evenly as possible over the depots.
    per_depot = [vehicles // n_dep + (1 if d < vehicles % n_dep else 0) for d in range(n_dep)]
    vehicle_types = [
        VehicleType(capacity=capacity, count=per_depot[d], depot=d,
                    max_duration=max_duration, max_distance=max_distance)
        for d in range(n_dep)
    ]
    if backhaul:
        mode = header.get("BACKHAUL_MODE", "strict").lower()
    else:
        mode = header.get("BACKHAUL_MODE", "none").lower()
    open_routes = header.get("OPEN_ROUTES", "FALSE").upper() in ("TRUE", "1", "YES")
    budget = _int(header["PRIZE_BUDGET"], 1) if "PRIZE_BUDGET" in header else None

    return ProblemData(
        nodes=nodes,
        clients=clients,
        vehicle_types=vehicle_types,
        dist=dist,
        travel_time=dist,
        depot_tw=depot_tw,
        open_routes=open_routes,
        backhaul_mode=mode,
        prize_budget=budget,
        depots=tuple(range(n_dep)),
        name=header.get("NAME", ""),
    )
