import itertools
import math
import random

import pytest

from pils.hosts import (
    HostConfig,
    construct_initial,
    diversify,
    ox_crossover,
    repair,
    run_gls,
    run_hgs,
    select_survivors,
    split,
)
from pils.local_search import SearchParams
from pils.model import (
    CostParams,
    Instance,
    Solution,
    is_feasible,
    solution_cost,
    validate,
)
from conftest import random_instance, random_solution


def strip_real_time(events):
    return [(e[0], e[2], e[3], e[4]) for e in events]


# ---------------------------------------------------------------- crossover


def test_ox_identical_parents():
    rng = random.Random(0)
    p = list(range(1, 11))
    random.Random(1).shuffle(p)
    assert ox_crossover(p, p, rng) == p


def test_ox_full_cut_returns_p1():
    class FixedRng:
        def __init__(self, vals):
            self.vals = list(vals)

        def randrange(self, n):
            return self.vals.pop(0)

    p1 = [3, 1, 4, 5, 2]
    p2 = [2, 5, 1, 3, 4]
    child = ox_crossover(p1, p2, FixedRng([0, 4]))
    assert child == p1


def test_ox_hand_traced_example():
    class FixedRng:
        def __init__(self, vals):
            self.vals = list(vals)

        def randrange(self, n):
            return self.vals.pop(0)

    p1 = [1, 2, 3, 4, 5]
    p2 = [3, 1, 4, 5, 2]
    # slice [2..3] of p1 stays: (_, _, 3, 4, _); p2 read cyclically from
    # position 4 gives 2,3,1,4,5; unused -> 2,1,5 filling slots 4,0,1
    child = ox_crossover(p1, p2, FixedRng([2, 3]))
    assert child == [1, 5, 3, 4, 2]


def test_ox_always_permutation():
    rng = random.Random(2)
    base = list(range(1, 31))
    for _ in range(200):
        p1 = base[:]
        p2 = base[:]
        rng.shuffle(p1)
        rng.shuffle(p2)
        child = ox_crossover(p1, p2, rng)
        assert sorted(child) == base


def test_ox_rejects_non_permutation():
    with pytest.raises(ValueError):
        ox_crossover([1, 2, 2], [1, 2, 3], random.Random(0))


# --------------------------------------------------------------------- split


def test_split_singletons_when_capacity_forces():
    coords = [(0, 0)] + [(i, 0) for i in range(1, 6)]
    inst = Instance("s", coords, [0, 2, 2, 2, 2, 2], capacity=2)
    sol = split(inst, [1, 2, 3, 4, 5])
    assert sol.routes == [[1], [2], [3], [4], [5]]


def test_split_single_route_when_depot_far():
    # depot far below the customer cluster: one return trip is cheapest
    coords = [(0, -1000)] + [(i * 2, 0) for i in range(1, 7)]
    inst = Instance("s", coords, [0] + [1] * 6, capacity=6)
    sol = split(inst, [1, 2, 3, 4, 5, 6])
    assert len([r for r in sol.routes if r]) == 1


def brute_force_split(inst, tour, params):
    n = len(tour)
    best = math.inf
    for mask in range(1 << (n - 1)):
        routes = []
        route = [tour[0]]
        for k in range(1, n):
            if mask >> (k - 1) & 1:
                routes.append(route)
                route = []
            route.append(tour[k])
        routes.append(route)
        sol = Solution.from_routes(inst, routes)
        cost = solution_cost(inst, sol, params)
        best = min(best, cost)
    return best


def test_split_is_optimal_for_fixed_tour(rng):
    params = CostParams(omega=1000, mode="forbidden")
    for _ in range(25):
        inst = random_instance(rng, 8)
        tour = list(range(1, 9))
        rng.shuffle(tour)
        sol = split(inst, tour)
        assert validate(inst, sol) == []
        assert sol.total_distance() == brute_force_split(inst, tour, params)
        # split must not reorder the tour
        assert [c for r in sol.routes for c in r] == tour


def test_split_rejects_non_permutation(rng):
    inst = random_instance(rng, 5)
    with pytest.raises(ValueError):
        split(inst, [1, 2, 3])


# ------------------------------------------------------------- construction


def test_construct_initial_feasible_and_deterministic(rng):
    inst = random_instance(rng, 40)
    a = construct_initial(inst, random.Random(9))
    b = construct_initial(inst, random.Random(9))
    assert a.routes == b.routes
    assert validate(inst, a) == []


def test_construct_single_customer():
    inst = Instance("one", [(0, 0), (5, 5)], [0, 3], capacity=10)
    sol = construct_initial(inst, random.Random(0))
    assert sol.routes == [[1]]


# -------------------------------------------------------------------- repair


def test_repair_feasible_input_unchanged(rng):
    inst = random_instance(rng, 15)
    sol = random_solution(inst, rng)
    params = SearchParams(CostParams(omega=100, mode="forbidden"), k_neighbors=inst.n)
    before = [list(r) for r in sol.routes]
    out, ok = repair(inst, sol, params)
    assert ok and out.routes == before


def test_repair_one_unit_over_uses_cheapest_relocation():
    # route [1,2] one unit over; relocating either into route [3] fixes it
    coords = [(0, 0), (10, 0), (12, 0), (11, 5)]
    inst = Instance("r", coords, [0, 3, 3, 1], capacity=5)
    sol = Solution.from_routes(inst, [[1, 2], [3]])
    params = SearchParams(CostParams(omega=100, mode="forbidden"), k_neighbors=3)
    # brute-force least-cost feasible single relocation
    best = None
    for idx, u in enumerate([1, 2]):
        rest = [c for c in [1, 2] if c != u]
        for slot in range(2):
            target = [3][:slot] + [u] + [3][slot:]
            cand = Solution.from_routes(inst, [rest, target])
            cost = solution_cost(inst, cand, params.cost)
            if best is None or cost < best:
                best = cost
    out, ok = repair(inst, sol, params)
    assert ok
    assert is_feasible(inst, out)
    assert solution_cost(inst, out, params.cost) <= best


def test_repair_opens_new_route_when_no_slack():
    coords = [(0, 0), (10, 0), (0, 10), (10, 10)]
    inst = Instance("r", coords, [0, 5, 5, 5], capacity=5)
    sol = Solution.from_routes(inst, [[1, 2], [3]])
    params = SearchParams(CostParams(omega=100, mode="forbidden"), k_neighbors=3)
    out, ok = repair(inst, sol, params)
    assert ok
    assert is_feasible(inst, out)
    assert sum(1 for r in out.routes if r) == 3


def test_repair_random_always_feasible(rng):
    for _ in range(20):
        inst = random_instance(rng, 20)
        sol = random_solution(inst, rng, respect_capacity=False)
        params = SearchParams(CostParams(omega=100, mode="forbidden"),
                              k_neighbors=10)
        out, ok = repair(inst, sol, params, rng=rng)
        assert ok
        assert validate(inst, out) == []


# ------------------------------------------------- population maintenance


def test_select_survivors_dedupes_and_truncates(rng):
    inst = random_instance(rng, 10)
    sol = random_solution(inst, rng)
    twin = sol.copy()
    other = random_solution(inst, rng)
    pop = [(100, sol), (100, twin), (50, other)]
    surv = select_survivors(pop, 2)
    assert len(surv) == 2
    assert surv[0][0] == 50
    assert surv[1][1] is sol


def test_diversify_keeps_best_and_size(rng):
    inst = random_instance(rng, 12)
    params = SearchParams(CostParams(omega=100, mode="forbidden"), k_neighbors=6)
    pop = []
    for _ in range(6):
        s = random_solution(inst, rng)
        pop.append((solution_cost(inst, s, params.cost), s))
    best_cost = min(c for c, _ in pop)
    out = diversify(pop, inst, params, random.Random(3))
    assert len(out) == len(pop)
    assert min(c for c, _ in out) <= best_cost
    single = diversify(pop[:1], inst, params, random.Random(3))
    assert len(single) == 1 and single[0][0] == pop[0][0]


# ---------------------------------------------------------------- full runs


def fast_cfg(**kw):
    base = dict(t_max=0.3, seed=1, mu=6, offspring=8, it_div=50,
                units_per_second=200_000)
    base.update(kw)
    return HostConfig(**base)


def test_hgs_single_customer():
    inst = Instance("one", [(0, 0), (5, 5)], [0, 3], capacity=10)
    res = run_hgs(inst, fast_cfg())
    assert res.best.routes[0] == [1] or res.best.routes == [[1]]
    assert res.best_cost == 2 * inst.dist[0][1]


def test_gls_single_customer():
    inst = Instance("one", [(0, 0), (5, 5)], [0, 3], capacity=10)
    res = run_gls(inst, fast_cfg())
    assert res.best_cost == 2 * inst.dist[0][1]


@pytest.mark.parametrize("runner", [run_hgs, run_gls])
def test_host_returns_valid_best(runner, rng):
    inst = random_instance(rng, 30)
    res = runner(inst, fast_cfg(seed=7))
    assert res.best is not None
    assert validate(inst, res.best) == []


@pytest.mark.parametrize("runner", [run_hgs, run_gls])
def test_host_determinism(runner, rng):
    inst = random_instance(rng, 25)
    a = runner(inst, fast_cfg(seed=13))
    b = runner(inst, fast_cfg(seed=13))
    assert a.best_cost == b.best_cost
    assert strip_real_time(a.events) == strip_real_time(b.events)
    assert a.moves == b.moves
    assert a.total_units == b.total_units


@pytest.mark.parametrize("runner", [run_hgs, run_gls])
def test_host_seed_changes_trajectory(runner, rng):
    inst = random_instance(rng, 25)
    a = runner(inst, fast_cfg(seed=1))
    b = runner(inst, fast_cfg(seed=2))
    assert strip_real_time(a.events) != strip_real_time(b.events)


@pytest.mark.parametrize("runner", [run_hgs, run_gls])
def test_ablation_identity(runner, rng):
    # disabling the component equals zeroing its parameters
    inst = random_instance(rng, 20)
    off = runner(inst, fast_cfg(seed=5, pils=False))
    zeroed = runner(inst, fast_cfg(seed=5, phi_size=0, p_ex=0.0))
    assert strip_real_time(off.events) == strip_real_time(zeroed.events)
    assert off.best_cost == zeroed.best_cost
    assert off.moves == zeroed.moves == []
    assert off.pils_share == 0.0


@pytest.mark.parametrize("runner", [run_hgs, run_gls])
def test_best_trace_non_increasing(runner, rng):
    inst = random_instance(rng, 30)
    res = runner(inst, fast_cfg(seed=3))
    trace = [e[3] for e in res.events if e[2] == "new_best"]
    assert trace == sorted(trace, reverse=True)
    assert trace[-1] == res.best_cost


def test_hgs_placement_injection_before_ls(rng):
    inst = random_instance(rng, 30)
    res = run_hgs(inst, fast_cfg(seed=11, t_max=0.6, p_ex=1.0))
    phases = [e[2] for e in res.events
              if e[2] in ("crossover", "pils_inject", "ls", "pils_extract")]
    # within each generation: crossover [-> inject] -> ls [-> extract]
    gens = []
    cur = None
    for ev in phases:
        if ev == "crossover":
            if cur:
                gens.append(cur)
            cur = []
        elif cur is not None:
            cur.append(ev)
    if cur:
        gens.append(cur)
    assert gens, "no generations completed"
    saw_inject = False
    for g in gens:
        if "pils_inject" in g:
            saw_inject = True
            assert g.index("pils_inject") < g.index("ls")
        if "pils_extract" in g:
            assert g.index("ls") < g.index("pils_extract")
    assert saw_inject


def test_gls_placement_injection_before_ls(rng):
    inst = random_instance(rng, 30)
    res = run_gls(inst, fast_cfg(seed=11, t_max=0.6))
    phases = [e[2] for e in res.events
              if e[2] in ("penalize", "pils_inject", "ls", "pils_extract")]
    rounds = []
    cur = None
    for ev in phases:
        if ev == "penalize":
            if cur:
                rounds.append(cur)
            cur = []
        elif cur is not None:
            cur.append(ev)
    assert rounds
    for g in rounds:
        if "pils_inject" in g:
            assert g.index("pils_inject") < g.index("ls")


def test_extraction_only_after_local_search(rng):
    inst = random_instance(rng, 30)
    for runner in (run_hgs, run_gls):
        res = runner(inst, fast_cfg(seed=17, t_max=0.6))
        phases = [e[2] for e in res.events if e[2] != "new_best"]
        for i, ev in enumerate(phases):
            if ev == "pils_extract":
                assert phases[i - 1] == "ls"


def test_gls_budget_smaller_than_one_iteration(rng):
    inst = random_instance(rng, 25)
    res = run_gls(inst, fast_cfg(seed=2, t_max=0.001, units_per_second=1000))
    assert res.best is not None
    assert validate(inst, res.best) == []


def test_config_validation():
    with pytest.raises(ValueError):
        HostConfig(p_ex=1.5)
    with pytest.raises(ValueError):
        HostConfig(l_min=0)
    cfg = HostConfig(phi_freq=10, phi_size=20)
    inst = Instance("one", [(0, 0), (5, 5)], [0, 3], capacity=10)
    with pytest.raises(ValueError):
        cfg.resolve(inst, "hgs")
