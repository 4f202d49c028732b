"""Pattern injection: high-order moves built from mined sequences.

Injecting a pattern into a solution deletes every edge incident to a
pattern vertex, wires the pattern itself as one fragment, and optimally
reconnects all resulting fragments with a pruned recursion. The move is
applied only when the reconnection strictly beats the original routes.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import permutations

from .clock import RECONNECT_NODE_UNITS
from .model import CostParams, Instance, Solution, route_distance


@dataclass(frozen=True)
class Fragment:
    """Open route piece with load/distance carried along concatenations.

    `seq` keeps the depot where the piece is anchored: beg fragments start
    with 0, end fragments end with 0, mid fragments are depot-free. The
    depot-only piece (0,) is a valid beg and a valid end.
    """

    seq: tuple
    load: int
    dist: int
    kind: str  # beg | mid | end | route

    def __post_init__(self):
        if self.kind not in ("beg", "mid", "end", "route"):
            raise ValueError(f"bad fragment kind {self.kind!r}")


def make_fragment(inst: Instance, seq, kind: str) -> Fragment:
    seq = tuple(seq)
    q = inst.demand
    d = inst.dist
    load = sum(q[v] for v in seq)
    dist = 0
    for a, b in zip(seq, seq[1:]):
        dist += d[a][b]
    return Fragment(seq, load, dist, kind)


def concat(a: Fragment, b: Fragment, inst: Instance) -> Fragment:
    """Join two fragments; load adds, distance adds plus the bridge edge."""
    if a.kind not in ("beg", "mid") or b.kind not in ("mid", "end"):
        raise ValueError(f"cannot concatenate {a.kind} with {b.kind}")
    if len(a.seq) > 1 and a.seq[-1] == 0:
        raise ValueError("left fragment already closed by the depot")
    if a.kind == "beg":
        kind = "route" if b.kind == "end" else "beg"
    else:
        kind = "mid" if b.kind == "mid" else "end"
    bridge = inst.dist[a.seq[-1]][b.seq[0]]
    return Fragment(a.seq + b.seq, a.load + b.load, a.dist + bridge + b.dist, kind)


def reverse_fragment(f: Fragment) -> Fragment:
    """Reverse a depot-free fragment; load and distance are unchanged."""
    if f.kind != "mid":
        raise ValueError("only mid fragments can be reversed")
    return Fragment(f.seq[::-1], f.load, f.dist, "mid")


@dataclass
class FragmentSets:
    """Fragments produced by cutting a pattern into a set of routes.

    `init_route_ids` are the touched route indices in the source solution;
    `init_cost` is their total cost, the bar any reconnection must beat.
    """

    r_beg: list
    r_mid: list  # the pattern is one of these
    r_end: list
    init_route_ids: list
    init_cost: float


def contains_pattern(sol: Solution, p) -> bool:
    """True if p or its mirror is a contiguous subsequence of a route."""
    p = tuple(p)
    if not p:
        return True
    where = None
    for r, route in enumerate(sol.routes):
        for i, c in enumerate(route):
            if c == p[0]:
                where = (r, i)
                break
        if where:
            break
    if where is None:
        return False
    r, i = where
    route = sol.routes[r]
    if i + len(p) <= len(route) and tuple(route[i:i + len(p)]) == p:
        return True
    if i - len(p) + 1 >= 0 and tuple(route[i - len(p) + 1:i + 1]) == p[::-1]:
        return True
    return False


def _raw_pieces(inst, sol, p, params):
    """Tuple-level fragmentation: ([(seq, load, dist)] x3, route_ids, init_cost)."""
    pset = set(p)
    route_ids = []
    for r, route in enumerate(sol.routes):
        if pset.intersection(route):
            route_ids.append(r)
    if not route_ids:
        raise RuntimeError("pattern vertices missing from solution")
    d = inst.dist
    q = inst.demand
    cap = inst.capacity
    omega = params.omega
    begs, mids, ends = [], [], []

    def piece(seq):
        load = 0
        dist = 0
        prev = None
        for v in seq:
            load += q[v]
            if prev is not None:
                dist += d[prev][v]
            prev = v
        return (seq, load, dist)

    init_cost = 0
    for r in route_ids:
        route = sol.routes[r]
        excess = sol.loads[r] - cap
        init_cost += sol.dists[r] + (omega * excess if excess > 0 else 0)
        runs = []
        cur = [0]  # first run starts at the depot
        for c in route:
            if c in pset:
                runs.append(cur)
                cur = []
            else:
                cur.append(c)
        cur.append(0)  # last run ends at the depot
        runs.append(cur)
        begs.append(piece(tuple(runs[0])))
        ends.append(piece(tuple(runs[-1])))
        for run in runs[1:-1]:
            if run:
                mids.append(piece(tuple(run)))
    mids.append(piece(tuple(p)))
    return begs, mids, ends, route_ids, init_cost


def fragmentize(inst: Instance, sol: Solution, p, params: CostParams) -> FragmentSets:
    """Cut every edge incident to a pattern vertex and classify the pieces."""
    begs, mids, ends, route_ids, init_cost = _raw_pieces(inst, sol, tuple(p), params)
    return FragmentSets(
        [Fragment(seq, load, dist, "beg") for seq, load, dist in begs],
        [Fragment(seq, load, dist, "mid") for seq, load, dist in mids],
        [Fragment(seq, load, dist, "end") for seq, load, dist in ends],
        route_ids,
        init_cost,
    )


def best_reconnect(sets: FragmentSets, inst: Instance, params: CostParams,
                   prune: bool = True, clock=None):
    """Minimum-cost complete reconnection of the fragment sets.

    Chains are grown from the first open beg fragment by appending mid
    fragments in either orientation or closing with an end fragment; a
    branch is cut as soon as the collective cost of open fragments and
    finished routes reaches the best known. Returns (routes, cost) with
    cost strictly below the original routes' cost, or None to signal that
    the solution should remain unchanged. In forbidden mode, branches
    creating an overload are abandoned.
    """
    if len(sets.r_beg) != len(sets.r_end):
        raise ValueError("fragment sets must pair beg and end fragments")
    for f in sets.r_mid:
        if f.kind != "mid":
            raise ValueError("mid set contains an anchored fragment")
    return _reconnect_raw(
        [(f.seq, f.load, f.dist) for f in sets.r_beg],
        [(f.seq, f.load, f.dist) for f in sets.r_mid],
        [(f.seq, f.load, f.dist) for f in sets.r_end],
        sets.init_cost, inst, params, prune, clock)


def _reconnect_raw(raw_begs, raw_mids, raw_ends, init_cost, inst, params,
                   prune=True, clock=None, debug=False):
    omega = params.omega
    cap = inst.capacity
    forbidden = params.mode == "forbidden"
    d = inst.dist
    q = inst.demand

    def fcost(load, dist):
        return dist + omega * (load - cap) if load > cap else dist

    def audit(chain, cur_seq, cur_load, cur_dist, mid_mask, end_mask, total, done):
        """Recompute the pruning total from raw sequences (debug only)."""
        def seq_cost(seq):
            dist = sum(d[a][b] for a, b in zip(seq, seq[1:]))
            return fcost(sum(q[v] for v in seq), dist)

        expect = sum(seq_cost(s) for s in done)
        if chain < k:
            expect += seq_cost(cur_seq)
            for i in range(chain + 1, k):
                expect += seq_cost(begs[i][0])
        for mi in range(nmid):
            if not mid_mask >> mi & 1:
                expect += seq_cost(mids[mi][0][0])
        for ei in range(k):
            if not end_mask >> ei & 1:
                expect += seq_cost(ends[ei][0])
        if expect != total:
            raise AssertionError(
                f"reconnection bookkeeping drift: tracked {total}, actual {expect}")

    # both mid orientations precomputed
    begs = raw_begs
    ends = raw_ends
    mids = [((seq, seq[::-1]), load, dist) for seq, load, dist in raw_mids]
    total0 = 0
    for seqs, load, dist in mids:
        if forbidden and load > cap:
            return None
        total0 += fcost(load, dist)
    for seq, load, dist in begs + ends:
        if forbidden and load > cap:
            return None
        total0 += fcost(load, dist)
    k = len(begs)
    nmid = len(mids)
    full_mask = (1 << nmid) - 1
    end_cost = [fcost(load, dist) for _, load, dist in ends]
    mid_cost = [fcost(load, dist) for _, load, dist in mids]

    best_cost = init_cost
    best_routes = None
    done: list = []
    nodes = 0

    def rec(chain, cur_seq, cur_load, cur_dist, mid_mask, end_mask, total):
        nonlocal best_cost, best_routes, nodes
        nodes += 1
        if debug:
            audit(chain, cur_seq, cur_load, cur_dist, mid_mask, end_mask,
                  total, done)
        if prune and total >= best_cost:
            return
        if chain == k:
            if total < best_cost:
                best_cost = total
                best_routes = list(done)
            return
        cur_cost = fcost(cur_load, cur_dist)
        last = cur_seq[-1]
        dlast = d[last]
        for mi in range(nmid):
            bit = 1 << mi
            if mid_mask & bit:
                continue
            seqs, load, dist = mids[mi]
            new_load = cur_load + load
            if forbidden and new_load > cap:
                continue
            base = total - cur_cost - mid_cost[mi]
            for seq in seqs:
                new_dist = cur_dist + dlast[seq[0]] + dist
                rec(chain, cur_seq + seq, new_load, new_dist,
                    mid_mask | bit, end_mask,
                    base + fcost(new_load, new_dist))
        if k - chain != 1 or mid_mask == full_mask:
            for ei in range(k):
                bit = 1 << ei
                if end_mask & bit:
                    continue
                seq, load, dist = ends[ei]
                new_load = cur_load + load
                if forbidden and new_load > cap:
                    continue
                new_dist = cur_dist + dlast[seq[0]] + dist
                new_total = total - cur_cost - end_cost[ei] \
                    + fcost(new_load, new_dist)
                done.append(cur_seq + seq)
                if chain + 1 == k:
                    rec(chain + 1, (0,), 0, 0, mid_mask, end_mask | bit, new_total)
                else:
                    nseq, nload, ndist = begs[chain + 1]
                    rec(chain + 1, nseq, nload, ndist,
                        mid_mask, end_mask | bit, new_total)
                done.pop()

    seq0, load0, dist0 = begs[0]
    rec(0, seq0, load0, dist0, 0, 0, total0)
    if clock is not None:
        clock.charge(nodes * RECONNECT_NODE_UNITS, "pils_inject")
    if best_routes is None:
        return None
    return [list(seq[1:-1]) for seq in best_routes], best_cost


def brute_force_reconnect(sets: FragmentSets, inst: Instance, params: CostParams):
    """Exhaustive reconnection oracle, independent of the concat bookkeeping.

    Enumerates every matching of end fragments to beg fragments and every
    ordered, oriented distribution of mid fragments over the chains, and
    recomputes each candidate's cost from raw distances and demands.
    Refuses combinatorially unsafe inputs.
    """
    k = len(sets.r_beg)
    m = len(sets.r_mid)
    if k != len(sets.r_end):
        raise ValueError("fragment sets must pair beg and end fragments")
    if k > 4 or k + m + len(sets.r_end) > 10:
        raise ValueError("fragment sets too large for exhaustive enumeration")
    d = inst.dist
    q = inst.demand
    omega = params.omega
    cap = inst.capacity
    forbidden = params.mode == "forbidden"
    beg_seqs = [f.seq for f in sets.r_beg]
    end_seqs = [f.seq for f in sets.r_end]
    mid_seqs = [f.seq for f in sets.r_mid]

    def raw_dist(seq):
        return sum(d[a][b] for a, b in zip(seq, seq[1:]))

    def raw_load(seq):
        return sum(q[v] for v in seq)

    beg_d = [raw_dist(s) for s in beg_seqs]
    end_d = [raw_dist(s) for s in end_seqs]
    mid_d = [raw_dist(s) for s in mid_seqs]
    beg_q = [raw_load(s) for s in beg_seqs]
    end_q = [raw_load(s) for s in end_seqs]
    mid_q = [raw_load(s) for s in mid_seqs]
    best_cost = sets.init_cost
    best_pick = None

    def splits(items, bins):
        if bins == 1:
            yield [items]
            return
        for cut in range(len(items) + 1):
            for tail in splits(items[cut:], bins - 1):
                yield [items[:cut]] + tail

    for end_perm in permutations(range(k)):
        for mid_perm in permutations(range(m)):
            for groups in splits(list(mid_perm), k):
                for mask in range(1 << m):
                    cost = 0
                    ok = True
                    for c in range(k):
                        tail = beg_seqs[c][-1]
                        load = beg_q[c]
                        cost += beg_d[c]
                        for mi in groups[c]:
                            piece = mid_seqs[mi]
                            head, last = piece[0], piece[-1]
                            if mask >> mi & 1:
                                head, last = last, head
                            cost += d[tail][head] + mid_d[mi]
                            load += mid_q[mi]
                            tail = last
                        e = end_perm[c]
                        cost += d[tail][end_seqs[e][0]] + end_d[e]
                        load += end_q[e]
                        if load > cap:
                            if forbidden:
                                ok = False
                                break
                            cost += omega * (load - cap)
                        if cost >= best_cost:
                            ok = False
                            break
                    if ok and cost < best_cost:
                        best_cost = cost
                        best_pick = (end_perm, [list(g) for g in groups], mask)
    if best_pick is None:
        return None
    end_perm, groups, mask = best_pick
    routes = []
    for c in range(k):
        seq = list(beg_seqs[c])
        for mi in groups[c]:
            piece = mid_seqs[mi]
            if mask >> mi & 1:
                piece = piece[::-1]
            seq.extend(piece)
        seq.extend(end_seqs[end_perm[c]])
        routes.append(seq)
    return [list(seq[1:-1]) for seq in routes], best_cost


def move_order(old_routes, new_routes) -> int:
    """Number of edges replaced by swapping old depot-anchored routes for new."""

    def edge_bag(routes):
        bag = Counter()
        for route in routes:
            prev = 0
            for c in list(route) + [0]:
                bag[(prev, c) if prev <= c else (c, prev)] += 1
                prev = c
        return bag

    old_bag = edge_bag(old_routes)
    new_bag = edge_bag(new_routes)
    return sum((old_bag - new_bag).values())


@dataclass
class InjectionParams:
    """Injection-side knobs: cost model, route-span cap, debug checking."""

    cost: CostParams
    max_routes: int = 4
    debug: bool = False


class _RouteIndex:
    """Successor/predecessor arrays for O(length) pattern containment."""

    def __init__(self, sol: Solution, n: int):
        self.succ = [0] * (n + 1)
        self.pred = [0] * (n + 1)
        self.route_of = [-1] * (n + 1)
        for r, route in enumerate(sol.routes):
            prev = 0
            for c in route:
                self.succ[prev] = c
                self.pred[c] = prev
                self.route_of[c] = r
                prev = c
            self.succ[prev] = 0
        self.succ[0] = 0
        self.pred[0] = 0

    def refresh(self, sol, route_ids):
        for r in route_ids:
            prev = 0
            for c in sol.routes[r]:
                if prev:
                    self.succ[prev] = c
                self.pred[c] = prev
                self.route_of[c] = r
                prev = c
            if prev:
                self.succ[prev] = 0

    def contains(self, p) -> bool:
        succ = self.succ
        pred = self.pred
        cur = p[0]
        for want in p[1:]:
            cur = succ[cur]
            if cur != want:
                break
        else:
            return True
        cur = p[0]
        for want in p[1:]:
            cur = pred[cur]
            if cur != want:
                return False
        return True


def pils_pass(inst: Instance, sol: Solution, candidates, params: InjectionParams,
              rng, clock=None, move_log=None, reject_cache=None) -> Solution:
    """One loop over the candidate patterns, applying every improving injection.

    Patterns already present are skipped, as are patterns spanning more
    than `max_routes` routes. Each applied reconnection strictly lowers
    the solution cost; `move_log` (if given) receives one record per
    applied move: (pattern_length, move_order, routes_involved, delta).

    `reject_cache` (a dict owned by the caller) memoizes failed
    injections against the content of the routes they touched, so a
    trajectory host does not recompute reconnections for parts of the
    solution that have not moved since the last attempt.
    """
    if not candidates:
        return sol
    order = list(candidates)
    rng.shuffle(order)
    index = _RouteIndex(sol, inst.n)
    route_hash: dict[int, int] = {}

    def rhash(r):
        h = route_hash.get(r)
        if h is None:
            h = hash(tuple(sol.routes[r]))
            route_hash[r] = h
        return h

    checks = 0
    for p in order:
        checks += 1
        if index.contains(p):
            continue
        route_of = index.route_of
        touched = sorted({route_of[c] for c in p})
        if len(touched) > params.max_routes:
            continue
        sig = None
        if reject_cache is not None:
            sig = tuple((r, rhash(r)) for r in touched)
            if reject_cache.get(p) == sig:
                continue
        begs, mids, ends, route_ids, init_cost = _raw_pieces(inst, sol, p, params.cost)
        if clock is not None:
            clock.charge(sum(len(sol.routes[r]) for r in route_ids), "pils_inject")
        result = _reconnect_raw(begs, mids, ends, init_cost, inst, params.cost,
                                clock=clock, debug=params.debug)
        if result is None:
            if sig is not None:
                reject_cache[p] = sig
            continue
        new_routes, new_cost = result
        old_routes = [sol.routes[r] for r in route_ids]
        order_k = move_order(old_routes, new_routes)
        delta = new_cost - init_cost
        for r, route in zip(route_ids, new_routes):
            sol.routes[r] = route
            sol.loads[r] = sum(inst.demand[c] for c in route)
            sol.dists[r] = route_distance(inst, route)
            route_hash.pop(r, None)
        index.refresh(sol, route_ids)
        if params.debug:
            _check_injection(inst, sol, p, route_ids, params.cost)
        if move_log is not None:
            move_log.append((len(p), order_k, len(route_ids), delta))
    if clock is not None:
        clock.charge(checks, "pils_inject")
    return sol


def _check_injection(inst, sol, p, route_ids, cost_params):
    if not contains_pattern(sol, p):
        raise AssertionError("applied injection lost its pattern")
    for r in route_ids:
        if sol.dists[r] != route_distance(inst, sol.routes[r]):
            raise AssertionError("route distance cache out of sync after injection")
        if sol.loads[r] != sum(inst.demand[c] for c in sol.routes[r]):
            raise AssertionError("route load cache out of sync after injection")
    if cost_params.mode == "forbidden":
        for r in route_ids:
            if sol.loads[r] > inst.capacity:
                raise AssertionError("forbidden-mode injection created an overload")
