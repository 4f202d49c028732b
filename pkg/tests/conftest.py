import math
import random

import pytest

from pils.model import CostParams, Instance, Solution


def random_instance(rng, n, capacity=None, demand_hi=10):
    coords = [(rng.uniform(0, 1000), rng.uniform(0, 1000)) for _ in range(n + 1)]
    demand = [0] + [rng.randint(1, demand_hi) for _ in range(n)]
    if capacity is None:
        capacity = max(demand_hi, rng.randint(3, 8) * demand_hi)
    return Instance(f"rand-n{n}", coords, demand, capacity)


def random_solution(inst, rng, respect_capacity=True):
    """Random partition of the customers into routes (greedy by capacity)."""
    customers = list(range(1, inst.n + 1))
    rng.shuffle(customers)
    routes = []
    route, load = [], 0
    for c in customers:
        if route and (
            (respect_capacity and load + inst.demand[c] > inst.capacity)
            or rng.random() < 0.2
        ):
            routes.append(route)
            route, load = [], 0
        route.append(c)
        load += inst.demand[c]
    if route:
        routes.append(route)
    return Solution.from_routes(inst, routes)


def random_fragment_sets(rng):
    """Synthetic FragmentSets: 2-4 routes, up to 9 fragments, random
    integer coordinates. The improvement bar is the cost of a round-robin
    reconnection of the same fragments, mirroring how injection uses the
    original routes."""
    from pils.injection import FragmentSets, make_fragment

    k = rng.randint(2, 4)
    cap_m = 9 - 2 * k
    m = min(rng.randint(0, cap_m), rng.randint(0, cap_m)) if cap_m > 0 else 0
    inst = random_instance(rng, rng.randint(2 * k + 2 * m + 4, 24), capacity=10**9)
    ids = list(range(1, inst.n + 1))
    rng.shuffle(ids)
    take = lambda lo, hi: [ids.pop() for _ in range(rng.randint(lo, hi))]
    begs = [make_fragment(inst, [0] + take(0, 2), "beg") for _ in range(k)]
    ends = [make_fragment(inst, take(0, 2) + [0], "end") for _ in range(k)]
    mids = [make_fragment(inst, take(1, 3), "mid") for _ in range(m)]
    # tighten capacity around the heaviest chains so both modes get exercised
    frag_loads = [f.load for f in begs + mids + ends]
    lo = max(max(inst.demand), max(frag_loads))
    cap = rng.randint(lo, max(sum(frag_loads), lo))
    inst = Instance(inst.name, inst.coords, inst.demand, cap)
    init_routes = []
    for i in range(k):
        seq = list(begs[i].seq)
        for j in range(i, m, k):
            seq.extend(mids[j].seq)
        seq.extend(ends[i].seq)
        init_routes.append(seq)
    init_cost = 0
    for seq in init_routes:
        load = sum(inst.demand[v] for v in seq)
        init_cost += sum(inst.dist[a][b] for a, b in zip(seq, seq[1:]))
        if load > inst.capacity:
            init_cost += 100 * (load - inst.capacity)
    return inst, FragmentSets(begs, mids, ends, list(range(k)), init_cost)


@pytest.fixture
def small_instance():
    # 6 customers on a ring around a central depot; capacity fits 3 each
    coords = [(50, 50)]
    for k in range(6):
        ang = 2 * math.pi * k / 6
        coords.append((50 + 40 * math.cos(ang), 50 + 40 * math.sin(ang)))
    demand = [0, 1, 1, 1, 1, 1, 1]
    return Instance("ring-n6", coords, demand, capacity=3)


@pytest.fixture
def params_penalized():
    return CostParams(omega=100, mode="penalized")


@pytest.fixture
def params_forbidden():
    return CostParams(omega=100, mode="forbidden")


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
