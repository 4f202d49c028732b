import math
import random

import pytest

from pils.local_search import (
    ALL_KINDS,
    EdgePenalties,
    SearchParams,
    all_candidate_moves,
    apply_move,
    descend,
    penalize_edges,
    scan_2opt,
    scan_2opt_star,
    scan_relocate,
    scan_swap,
)
from pils.model import CostParams, Instance, Solution, solution_cost, validate
from conftest import random_instance, random_solution


def full_params(inst, mode="penalized", omega=100):
    # candidate lists spanning all customers make the granular scan complete
    return SearchParams(CostParams(omega=omega, mode=mode), k_neighbors=inst.n)


def recomputed_delta(inst, sol, move, params, penalties=None):
    work = sol.copy()
    before = solution_cost(inst, work, params.cost)
    apply_move(inst, work, move, params, penalties)
    assert validate(inst, work) == [] or params.cost.mode == "penalized"
    return solution_cost(inst, work, params.cost) - before


def aug_cost(inst, sol, penalties):
    total = 0
    lam, w = penalties.lam, penalties.weight
    for route in sol.routes:
        prev = 0
        for c in list(route) + [0]:
            total += inst.dist[prev][c] + w * lam[prev][c]
            prev = c
    return total


def test_move_deltas_match_recomputation_randomized(rng):
    checked = 0
    while checked < 2000:
        inst = random_instance(rng, rng.randint(6, 16))
        sol = random_solution(inst, rng, respect_capacity=False)
        params = full_params(inst)
        for move in all_candidate_moves(inst, sol, params):
            assert move.delta_cost == recomputed_delta(inst, sol, move, params)
            checked += 1


def test_augmented_deltas_match_recomputation(rng):
    for _ in range(30):
        inst = random_instance(rng, 10)
        pen = EdgePenalties(inst.n, weight=7)
        for _ in range(15):
            a, b = rng.randrange(inst.n + 1), rng.randrange(inst.n + 1)
            if a != b:
                pen.bump(a, b)
        sol = random_solution(inst, rng)
        params = full_params(inst, mode="forbidden")
        for move in all_candidate_moves(inst, sol, params, penalties=pen)[:50]:
            work = sol.copy()
            before = aug_cost(inst, work, pen)
            apply_move(inst, work, move, params, pen)
            assert move.delta_aug == aug_cost(inst, work, pen) - before


def test_scans_match_bruteforce_best(rng):
    scans = {
        "relocate": scan_relocate,
        "swap": scan_swap,
        "two_opt": scan_2opt,
        "two_opt_star": scan_2opt_star,
    }
    # two_opt_star_rev moves come from the two_opt_star scan
    families = {
        "relocate": {"relocate"},
        "swap": {"swap"},
        "two_opt": {"two_opt"},
        "two_opt_star": {"two_opt_star", "two_opt_star_rev"},
    }
    for trial in range(25):
        inst = random_instance(rng, 8)
        sol = random_solution(inst, rng)
        params = full_params(inst)
        every = all_candidate_moves(inst, sol, params)
        for name, scan in scans.items():
            best = scan(inst, sol, params, best=True)
            pool = [m.delta_cost for m in every
                    if m.kind in families[name] and m.delta_cost < 0]
            if not pool:
                assert best is None
            else:
                assert best is not None
                assert best.delta_cost == min(pool)


def test_scan_returns_none_at_fixpoint():
    # two customers mirrored around the depot: every move is non-improving
    inst = Instance("sym", [(0, 0), (-10, 0), (10, 0)], [0, 1, 1], capacity=1)
    sol = Solution.from_routes(inst, [[1], [2]])
    params = full_params(inst, mode="forbidden")
    for scan in (scan_relocate, scan_swap, scan_2opt, scan_2opt_star):
        assert scan(inst, sol, params, best=True) is None


def test_descend_fixpoint_unchanged():
    inst = Instance("sym", [(0, 0), (-10, 0), (10, 0)], [0, 1, 1], capacity=1)
    sol = Solution.from_routes(inst, [[1], [2]])
    params = full_params(inst, mode="forbidden")
    descend(inst, sol, params)
    assert sol.routes == [[1], [2]]


def test_descend_uncrosses_two_routes():
    # crossing pairs: optimal is to serve each side's two customers together
    inst = Instance(
        "cross",
        [(0, 0), (-50, 10), (50, 10), (-50, -10), (50, -10)],
        [0, 1, 1, 1, 1],
        capacity=2,
    )
    crossed = Solution.from_routes(inst, [[1, 2], [3, 4]])
    params = full_params(inst, mode="forbidden")
    before = crossed.total_distance()
    descend(inst, crossed, params)
    assert crossed.total_distance() < before
    best = enumerate_optimum(inst, params)
    assert crossed.total_distance() == best


def enumerate_optimum(inst, params):
    """Exhaustive optimum over all feasible route partitions (tiny n only)."""
    import itertools

    n = inst.n
    best = math.inf
    customers = list(range(1, n + 1))
    for perm in itertools.permutations(customers):
        for mask in range(1 << (n - 1)):
            routes = []
            route = [perm[0]]
            for k in range(1, n):
                if mask >> (k - 1) & 1:
                    routes.append(route)
                    route = []
                route.append(perm[k])
            routes.append(route)
            sol = Solution.from_routes(inst, routes)
            cost = solution_cost(inst, sol, params.cost)
            best = min(best, cost)
    return best


def test_descend_repairs_inverted_segment(rng):
    # a tour with one reversed block is a classical 2-opt target
    pts = [(0, 0)] + [(math.cos(a) * 100, math.sin(a) * 100)
                      for a in [k * 2 * math.pi / 8 for k in range(8)]]
    inst = Instance("loop", pts, [0] + [1] * 8, capacity=8)
    good = list(range(1, 9))
    twisted = good[:2] + good[2:6][::-1] + good[6:]
    sol = Solution.from_routes(inst, [twisted])
    params = full_params(inst, mode="forbidden")
    descend(inst, sol, params)
    brute_best = None
    ordered = Solution.from_routes(inst, [good])
    brute_best = ordered.total_distance()
    assert sol.total_distance() == brute_best


def test_descend_monotone_and_locally_minimal(rng):
    for trial in range(8):
        inst = random_instance(rng, rng.randint(10, 24))
        sol = random_solution(inst, rng)
        params = full_params(inst, mode="forbidden")
        before = solution_cost(inst, sol, params.cost)
        descend(inst, sol, params, rng=rng)
        after = solution_cost(inst, sol, params.cost)
        assert after <= before
        assert validate(inst, sol) == []
        improving = [m for m in all_candidate_moves(inst, sol, params)
                     if m.delta_cost < 0]
        assert improving == []


def test_descend_preserves_feasibility_forbidden(rng):
    for _ in range(10):
        inst = random_instance(rng, 15)
        sol = random_solution(inst, rng)
        params = SearchParams(CostParams(omega=50, mode="forbidden"), k_neighbors=8)
        descend(inst, sol, params, rng=rng)
        assert validate(inst, sol) == []


def test_descend_augmented_acceptance(rng):
    # under penalties the descent may end above the true-cost minimum but
    # must be a local minimum of the augmented cost
    inst = random_instance(rng, 12)
    pen = EdgePenalties(inst.n, weight=50)
    sol = random_solution(inst, rng)
    params = full_params(inst, mode="forbidden")
    descend(inst, sol, params, penalties=pen, rng=rng)
    for move in all_candidate_moves(inst, sol, params, penalties=pen):
        assert move.delta_aug >= 0


def test_penalize_longest_edge_first():
    inst = Instance("line", [(0, 0), (10, 0), (100, 0)], [0, 1, 1], capacity=2)
    sol = Solution.from_routes(inst, [[1, 2]])
    pen = EdgePenalties(inst.n, weight=1)
    penalize_edges(inst, sol, pen)
    # route edges: depot-1 (10), 1-2 (90), 2-depot (100): the return leg wins
    assert pen.lam[2][0] == 1
    assert pen.lam[1][2] == 0 and pen.lam[0][1] == 0


def test_penalize_rotation_by_hand():
    # edges 100, 90, 10: utilities drop as counters grow
    inst = Instance("line", [(0, 0), (10, 0), (100, 0)], [0, 1, 1], capacity=2)
    sol = Solution.from_routes(inst, [[1, 2]])
    pen = EdgePenalties(inst.n, weight=1)
    penalize_edges(inst, sol, pen)  # (2,0): 100 -> util 50
    penalize_edges(inst, sol, pen)  # (1,2): 90  -> util 45
    penalize_edges(inst, sol, pen)  # (2,0): 50 vs 45 vs 10 -> (2,0) again
    assert pen.lam[2][0] == 2
    assert pen.lam[1][2] == 1
    assert pen.lam[0][1] == 0


def test_penalize_empty_solution_noop():
    inst = Instance("e", [(0, 0), (1, 0)], [0, 1], capacity=1)
    sol = Solution.from_routes(inst, [[]])
    pen = EdgePenalties(inst.n, weight=1)
    assert penalize_edges(inst, sol, pen) == 0
    assert all(v == 0 for row in pen.lam for v in row)


def test_all_candidate_moves_accepts_penalties_kw(rng):
    inst = random_instance(rng, 6)
    sol = random_solution(inst, rng)
    pen = EdgePenalties(inst.n, weight=3)
    moves = all_candidate_moves(inst, sol, full_params(inst), penalties=pen)
    assert moves
