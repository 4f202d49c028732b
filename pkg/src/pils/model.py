"""CVRP problem/solution model, TSPLIB-subset I/O and cost evaluation.

Vertex 0 is always the depot; customers are 1..n. All distances are
rounded to the nearest integer on parse (the convention of the classical
benchmark files), so every cost in the toolkit is an exact integer and
move acceptance never depends on float tolerances.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

INFEASIBLE = math.inf


class ParseError(ValueError):
    """Raised on malformed instance or solution files."""


class InvalidRouteError(ValueError):
    """Raised when a route visits a customer more than once."""


def _nint(x: float) -> int:
    # TSPLIB nint(): round half up, valid for nonnegative x.
    return int(x + 0.5)


class Instance:
    """Immutable CVRP instance: coordinates, demands, capacity.

    The full integer distance matrix is built on construction (n <= ~1000
    in practice) and shared read-only by any number of solver runs.
    """

    def __init__(self, name, coords, demand, capacity, vehicle_hint=None):
        if len(coords) != len(demand):
            raise ValueError("coords and demand length mismatch")
        if len(coords) < 2:
            raise ValueError("instance needs a depot and at least one customer")
        if demand[0] != 0:
            raise ValueError("depot demand must be 0")
        for i, q in enumerate(demand):
            if q < 0:
                raise ValueError(f"negative demand at vertex {i}")
            if i > 0 and q > capacity:
                raise ValueError(f"demand of customer {i} exceeds capacity")
        for x, y in coords:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("coordinates must be finite")
        self.name = name
        self.n = len(coords) - 1
        self.coords = [(float(x), float(y)) for x, y in coords]
        self.demand = list(demand)
        self.capacity = capacity
        self.vehicle_hint = vehicle_hint
        self.dist = self._build_matrix()
        self.max_edge = max(max(row) for row in self.dist)
        self._neighbor_cache: dict[int, list[list[int]]] = {}

    def _build_matrix(self):
        pts = self.coords
        m = len(pts)
        dist = [[0] * m for _ in range(m)]
        for i in range(m):
            xi, yi = pts[i]
            row = dist[i]
            for j in range(i + 1, m):
                xj, yj = pts[j]
                d = _nint(math.hypot(xi - xj, yi - yj))
                row[j] = d
                dist[j][i] = d
        return dist

    def neighbors(self, k: int) -> list[list[int]]:
        """k nearest customers of each customer (depot excluded), cached."""
        if k not in self._neighbor_cache:
            lists = [[]]
            for i in range(1, self.n + 1):
                row = self.dist[i]
                order = sorted((c for c in range(1, self.n + 1) if c != i),
                               key=lambda c: (row[c], c))
                lists.append(order[:k])
            self._neighbor_cache[k] = lists
        return self._neighbor_cache[k]


def distance(inst: Instance, i: int, j: int) -> int:
    """Rounded Euclidean distance between vertices i and j."""
    return inst.dist[i][j]


_KEYWORD = re.compile(r"^\s*([A-Z_][A-Z_0-9]*)\s*:?\s*(.*?)\s*$")


def parse_instance(text: str) -> Instance:
    """Parse a TSPLIB/CVRP-format instance (EUC_2D only).

    The depot is re-indexed to vertex 0 regardless of where the file's
    DEPOT_SECTION places it.
    """
    header: dict[str, str] = {}
    coords: dict[int, tuple[float, float]] = {}
    demand: dict[int, int] = {}
    depot_ids: list[int] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        m = _KEYWORD.match(line)
        key = m.group(1) if m else None
        if key in ("NODE_COORD_SECTION", "DEMAND_SECTION", "DEPOT_SECTION"):
            section = key
            continue
        if section is None:
            if not m or not key:
                raise ParseError(f"line {lineno}: expected 'KEYWORD : value', got {line!r}")
            header[key] = m.group(2)
            continue
        parts = line.split()
        try:
            if section == "NODE_COORD_SECTION":
                if len(parts) != 3:
                    raise ValueError
                coords[int(parts[0])] = (float(parts[1]), float(parts[2]))
            elif section == "DEMAND_SECTION":
                if len(parts) != 2:
                    raise ValueError
                demand[int(parts[0])] = int(parts[1])
            elif section == "DEPOT_SECTION":
                val = int(parts[0])
                if val != -1:
                    depot_ids.append(val)
        except ValueError:
            raise ParseError(f"line {lineno}: malformed {section} entry {line!r}") from None

    if "DIMENSION" not in header:
        raise ParseError("missing DIMENSION header")
    if "CAPACITY" not in header:
        raise ParseError("missing CAPACITY header")
    wtype = header.get("EDGE_WEIGHT_TYPE", "EUC_2D")
    if wtype != "EUC_2D":
        raise ParseError(f"unsupported EDGE_WEIGHT_TYPE {wtype!r} (only EUC_2D)")
    dim = int(header["DIMENSION"])
    capacity = int(header["CAPACITY"])
    if len(coords) != dim:
        raise ParseError(f"NODE_COORD_SECTION has {len(coords)} entries, DIMENSION is {dim}")
    if len(demand) != dim:
        raise ParseError(f"DEMAND_SECTION has {len(demand)} entries, DIMENSION is {dim}")
    if len(depot_ids) != 1:
        raise ParseError("DEPOT_SECTION must name exactly one depot")
    depot = depot_ids[0]
    if depot not in coords:
        raise ParseError(f"depot id {depot} has no coordinates")
    if demand.get(depot, 0) != 0:
        raise ParseError("depot must have zero demand")

    order = [depot] + [i for i in sorted(coords) if i != depot]
    name = header.get("NAME", "unnamed")
    hint = None
    m = re.search(r"-k(\d+)", name)
    if m:
        hint = int(m.group(1))
    else:
        m = re.search(r"trucks:\s*(\d+)", header.get("COMMENT", ""), re.IGNORECASE)
        if m:
            hint = int(m.group(1))
    return Instance(
        name=name,
        coords=[coords[i] for i in order],
        demand=[demand[i] for i in order],
        capacity=capacity,
        vehicle_hint=hint,
    )


def write_instance(inst: Instance) -> str:
    """Serialize an instance back to the TSPLIB subset (round-trip aid)."""
    lines = [
        f"NAME : {inst.name}",
        "COMMENT : generated",
        "TYPE : CVRP",
        f"DIMENSION : {inst.n + 1}",
        "EDGE_WEIGHT_TYPE : EUC_2D",
        f"CAPACITY : {inst.capacity}",
        "NODE_COORD_SECTION",
    ]
    for i, (x, y) in enumerate(inst.coords, start=1):
        xs = f"{x:.0f}" if x == int(x) else f"{x}"
        ys = f"{y:.0f}" if y == int(y) else f"{y}"
        lines.append(f"{i} {xs} {ys}")
    lines.append("DEMAND_SECTION")
    for i, q in enumerate(inst.demand, start=1):
        lines.append(f"{i} {q}")
    lines.extend(["DEPOT_SECTION", "1", "-1", "EOF", ""])
    return "\n".join(lines)


@dataclass
class CostParams:
    """Cost model: load-excess penalty and feasibility handling.

    omega: integer cost per unit of load over capacity.
    mode: "penalized" adds omega * excess; "forbidden" reports infinity
    for any capacity-violating route (an infinite penalty).
    """

    omega: int = 1000
    mode: str = "penalized"

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.mode not in ("penalized", "forbidden"):
            raise ValueError(f"unknown feasibility mode {self.mode!r}")

    @classmethod
    def for_instance(cls, inst: Instance, mode: str = "penalized") -> "CostParams":
        # Default scale: an excess of one tenth of the vehicle capacity
        # costs about one longest edge.
        omega = 1 + (10 * inst.max_edge) // max(1, inst.capacity)
        return cls(omega=omega, mode=mode)


class Solution:
    """Depot-anchored route set with cached per-route load and distance.

    Routes store customers only (the depot is implicit at both ends).
    Caches must be kept coherent by whoever mutates `routes`; use
    `resync` after ad-hoc edits.
    """

    __slots__ = ("routes", "loads", "dists")

    def __init__(self, routes, loads, dists):
        self.routes = routes
        self.loads = loads
        self.dists = dists

    @classmethod
    def from_routes(cls, inst: Instance, routes) -> "Solution":
        sol = cls([list(r) for r in routes], [], [])
        sol.resync(inst)
        return sol

    def resync(self, inst: Instance) -> None:
        """Recompute all cached loads and distances from the routes."""
        self.loads = [route_load(inst, r) for r in self.routes]
        self.dists = [route_distance(inst, r) for r in self.routes]

    def copy(self) -> "Solution":
        return Solution([list(r) for r in self.routes], list(self.loads), list(self.dists))

    def giant_tour(self) -> list[int]:
        tour = []
        for r in self.routes:
            tour.extend(r)
        return tour

    def total_distance(self) -> int:
        return sum(self.dists)

    def drop_empty_routes(self) -> None:
        keep = [k for k, r in enumerate(self.routes) if r]
        self.routes = [self.routes[k] for k in keep]
        self.loads = [self.loads[k] for k in keep]
        self.dists = [self.dists[k] for k in keep]


def route_load(inst: Instance, route) -> int:
    demand = inst.demand
    return sum(demand[c] for c in route)


def route_distance(inst: Instance, route) -> int:
    if not route:
        return 0
    dist = inst.dist
    total = dist[0][route[0]]
    for a, b in zip(route, route[1:]):
        total += dist[a][b]
    return total + dist[route[-1]][0]


def route_cost(inst: Instance, route, params: CostParams):
    """Penalized route cost; INFEASIBLE for overloads in forbidden mode."""
    seen = set()
    for c in route:
        if c in seen:
            raise InvalidRouteError(f"customer {c} repeated in route")
        seen.add(c)
    load = route_load(inst, route)
    excess = max(load - inst.capacity, 0)
    if excess and params.mode == "forbidden":
        return INFEASIBLE
    return route_distance(inst, route) + params.omega * excess


def solution_cost(inst: Instance, sol: Solution, params: CostParams):
    total = 0
    for load, d in zip(sol.loads, sol.dists):
        excess = max(load - inst.capacity, 0)
        if excess and params.mode == "forbidden":
            return INFEASIBLE
        total += d + params.omega * excess
    return total


def is_feasible(inst: Instance, sol: Solution) -> bool:
    return all(load <= inst.capacity for load in sol.loads)


def validate(inst: Instance, sol: Solution) -> list[str]:
    """Full consistency report; empty list means feasible and coherent.

    Never raises: every defect becomes one report entry.
    """
    report = []
    counts: dict[int, int] = {}
    for r in sol.routes:
        for c in r:
            counts[c] = counts.get(c, 0) + 1
    for c in range(1, inst.n + 1):
        if c not in counts:
            report.append(f"missing customer {c}")
    for c, k in sorted(counts.items()):
        if c < 1 or c > inst.n:
            report.append(f"unknown customer {c}")
        elif k > 1:
            report.append(f"customer {c} visited {k} times")
    if len(sol.loads) != len(sol.routes) or len(sol.dists) != len(sol.routes):
        report.append("cache length mismatch")
        return report
    for k, r in enumerate(sol.routes):
        load = route_load(inst, r)
        if load > inst.capacity:
            report.append(f"route {k} load {load} exceeds capacity {inst.capacity}")
        if sol.loads[k] != load:
            report.append(f"route {k} cached load {sol.loads[k]} != {load}")
        d = route_distance(inst, r)
        if sol.dists[k] != d:
            report.append(f"route {k} cached distance {sol.dists[k]} != {d}")
    return report


def gap_percent(z, z_bks) -> float:
    """Percentage gap of cost z to a best-known value (negative = better)."""
    if z_bks <= 0:
        raise ValueError("best-known value must be positive")
    return 100.0 * (z - z_bks) / z_bks


def write_solution(inst: Instance, sol: Solution) -> str:
    """Emit the conventional 'Route #i: ...' text form (empty routes dropped)."""
    lines = []
    i = 0
    total = 0
    for r, d in zip(sol.routes, sol.dists):
        if not r:
            continue
        i += 1
        lines.append(f"Route #{i}: " + " ".join(str(c) for c in r))
        total += d
    lines.append(f"Cost {total}")
    return "\n".join(lines) + "\n"


def parse_solution(text: str, inst: Instance) -> Solution:
    """Parse the 'Route #i:' text form back into a Solution."""
    routes = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.lower().startswith("cost"):
            continue
        if not line.startswith("Route"):
            raise ParseError(f"line {lineno}: unexpected content {line!r}")
        _, _, body = line.partition(":")
        route = []
        for tok in body.split():
            try:
                c = int(tok)
            except ValueError:
                raise ParseError(f"line {lineno}: bad customer id {tok!r}") from None
            if c < 1 or c > inst.n:
                raise ParseError(f"line {lineno}: unknown customer id {c}")
            route.append(c)
        if route:
            routes.append(route)
    return Solution.from_routes(inst, routes)
