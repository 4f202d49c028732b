"""Generate the desk-scale benchmark instances committed under data/.

Follows the public benchmark's generation recipe: integer grid
[0,1000]^2, depot placement random/centered/eccentric, customer placement
uniform/clustered/mixed, several demand regimes, and capacity chosen from
a target route size. Deterministic per instance.

Run from the repository root:  python scripts/make_instances.py
"""

from __future__ import annotations

import csv
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "data" / "instances"

SPECS = [
    # (customers, depot, customer placement, demand regime, route-size target)
    (100, "C", "R", "u1-10", 5),
    (114, "R", "C", "u5-10", 4),
    (128, "E", "RC", "u1-100", 6),
    (142, "C", "C", "u1-10", 12),
    (157, "R", "R", "q", 5),
    (171, "E", "R", "u1-10", 14),
    (185, "R", "RC", "u5-10", 10),
    (200, "C", "R", "u1-100", 16),
]


def place_depot(kind, rng):
    if kind == "R":
        return (rng.randint(0, 1000), rng.randint(0, 1000))
    if kind == "C":
        return (500, 500)
    return (0, 0)  # eccentric corner


def place_customers(kind, n, rng):
    if kind == "R":
        return [(rng.randint(0, 1000), rng.randint(0, 1000)) for _ in range(n)]
    if kind == "C":
        return cluster_points(n, rng)
    half = n // 2
    return ([(rng.randint(0, 1000), rng.randint(0, 1000)) for _ in range(half)]
            + cluster_points(n - half, rng))


def cluster_points(n, rng):
    seeds = [(rng.randint(0, 1000), rng.randint(0, 1000))
             for _ in range(rng.randint(3, 8))]
    pts = list(seeds[: min(n, len(seeds))])
    while len(pts) < n:
        x, y = rng.randint(0, 1000), rng.randint(0, 1000)
        weight = sum(math.exp(-math.dist((x, y), s) / 40.0) for s in seeds)
        if rng.random() < weight:
            pts.append((x, y))
    return pts[:n]


def draw_demands(kind, coords, rng):
    if kind == "unit":
        return [1] * len(coords)
    if kind == "u1-10":
        return [rng.randint(1, 10) for _ in coords]
    if kind == "u5-10":
        return [rng.randint(5, 10) for _ in coords]
    if kind == "u1-100":
        return [rng.randint(1, 100) for _ in coords]
    if kind == "q":  # quadrant-dependent: heavy on two quadrants
        out = []
        for x, y in coords:
            heavy = (x > 500) == (y > 500)
            out.append(rng.randint(51, 100) if heavy else rng.randint(1, 50))
        return out
    raise ValueError(kind)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    meta_rows = []
    for idx, (n, depot_kind, cust_kind, demand_kind, route_size) in enumerate(SPECS):
        rng = random.Random(9000 + idx)
        depot = place_depot(depot_kind, rng)
        customers = place_customers(cust_kind, n, rng)
        demands = draw_demands(demand_kind, customers, rng)
        capacity = max(max(demands),
                       math.ceil(route_size * sum(demands) / len(demands)))
        k_min = math.ceil(sum(demands) / capacity)
        name = f"Z-n{n + 1}-k{k_min}"
        lines = [
            f"NAME : {name}",
            f"COMMENT : desk-scale benchmark (depot {depot_kind}, "
            f"customers {cust_kind}, demands {demand_kind}, target route size {route_size})",
            "TYPE : CVRP",
            f"DIMENSION : {n + 1}",
            "EDGE_WEIGHT_TYPE : EUC_2D",
            f"CAPACITY : {capacity}",
            "NODE_COORD_SECTION",
            f"1 {depot[0]} {depot[1]}",
        ]
        for i, (x, y) in enumerate(customers, start=2):
            lines.append(f"{i} {x} {y}")
        lines.append("DEMAND_SECTION")
        lines.append("1 0")
        for i, q in enumerate(demands, start=2):
            lines.append(f"{i} {q}")
        lines.extend(["DEPOT_SECTION", "1", "-1", "EOF", ""])
        (OUT / f"{name}.vrp").write_text("\n".join(lines))
        meta_rows.append({
            "instance": name,
            "n": n,
            "depot": depot_kind,
            "customer": cust_kind,
            "demand": demand_kind,
            "route_len": "short" if route_size <= 8 else "long",
        })
        print(f"wrote {name}.vrp  (Q={capacity}, k>={k_min})")
    with open(ROOT / "data" / "meta.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["instance", "n", "depot", "customer",
                                "demand", "route_len"])
        w.writeheader()
        w.writerows(meta_rows)
    print("wrote meta.csv")


if __name__ == "__main__":
    main()
