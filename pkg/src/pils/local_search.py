"""Classical neighborhood descent: Relocate, Swap, 2-opt and 2-opt*.

Moves are generated around customer pairs (u, v) with v restricted to the
k nearest neighbors of u (granular search), plus the depot-edge 2-opt
reversals and empty-route targets needed to split or merge routes. All
deltas are exact integers; when edge penalties are supplied the augmented
delta drives acceptance while the true delta is still tracked for
reporting.

The descent uses don't-look bits to skip settled customers and always
finishes with full sweeps, so the returned solution is a genuine local
minimum of all four neighborhoods under the active cost.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import CostParams, Instance, Solution, route_distance


@dataclass
class SearchParams:
    """Knobs shared by every scan: cost model and candidate-list size."""

    cost: CostParams
    k_neighbors: int = 20


@dataclass
class MoveDelta:
    """One tentative move with its exact cost effect.

    Position semantics per kind:
      relocate      (r1, i) source slot of u; (r2, j) insertion slot in the
                    pre-move list of r2 (u ends up before old r2[j]).
      swap          (r1, i) and (r2, j) are the two swapped slots.
      two_opt       r1 == r2; reverse the segment [i..j] inclusive.
      two_opt_star  tails r1[i:] and r2[j:] are exchanged.
      two_opt_star_rev  r1 keeps its head and receives r2's head reversed:
                    r1' = r1[:i] + rev(r2[:j]); r2' = rev(r1[i:]) + r2[j:].
    """

    kind: str
    r1: int
    i: int
    r2: int
    j: int
    delta_cost: int
    delta_aug: int


class EdgePenalties:
    """Per-edge penalty counters with an integer weight.

    Augmented edge cost is c_ij + weight * lam_ij; counters start at zero
    and only ever grow via `penalize_edges`.
    """

    def __init__(self, n: int, weight: int = 1):
        if weight < 1:
            raise ValueError("penalty weight must be a positive integer")
        self.lam = [[0] * (n + 1) for _ in range(n + 1)]
        self.weight = weight

    def bump(self, a: int, b: int) -> None:
        self.lam[a][b] += 1
        self.lam[b][a] += 1


def penalize_edges(inst: Instance, sol: Solution, penalties: EdgePenalties) -> int:
    """Increment the counters of the maximal-utility edges of `sol`.

    Utility of an edge is length / (1 + current penalty), so long edges
    are hit first and repeat offenders lose priority. Returns the number
    of edges examined (no-op on an empty solution).
    """
    d = inst.dist
    lam = penalties.lam
    best_util = None
    best_edges: list[tuple[int, int]] = []
    examined = 0
    for route in sol.routes:
        if not route:
            continue
        prev = 0
        for c in list(route) + [0]:
            examined += 1
            util = d[prev][c] / (1 + lam[prev][c])
            if best_util is None or util > best_util:
                best_util = util
                best_edges = [(prev, c)]
            elif util == best_util:
                best_edges.append((prev, c))
            prev = c
    for a, b in best_edges:
        penalties.bump(a, b)
    return examined


class _ScanState:
    """Mutable index over a solution shared by move generation and apply.

    Generators yield improving moves only (score < 0 under the active
    cost) unless `all_moves` is set, which widens them to every evaluated
    candidate for delta-audit tests.
    """

    def __init__(self, inst, sol, params, penalties, all_moves=False):
        self.inst = inst
        self.sol = sol
        self.cap = inst.capacity
        self.omega = params.cost.omega
        self.forbidden = params.cost.mode == "forbidden"
        self.cand = inst.neighbors(params.k_neighbors)
        self.lam = penalties.lam if penalties is not None else None
        self.weight = penalties.weight if penalties is not None else 0
        self.all_moves = all_moves
        self.evals = 0
        self.pos: list[tuple[int, int]] = [(-1, -1)] * (inst.n + 1)
        for r, route in enumerate(sol.routes):
            for idx, c in enumerate(route):
                self.pos[c] = (r, idx)
        self._pl_cache: dict[int, list[int]] = {}
        self._empty_cache: int | None = -1  # -1 = stale

    def first_empty_route(self):
        if self._empty_cache == -1:
            self._empty_cache = None
            for r, route in enumerate(self.sol.routes):
                if not route:
                    self._empty_cache = r
                    break
        return self._empty_cache

    def _prefix_loads(self, r):
        cached = self._pl_cache.get(r)
        if cached is None:
            q = self.inst.demand
            total = 0
            cached = [0]
            for c in self.sol.routes[r]:
                total += q[c]
                cached.append(total)
            self._pl_cache[r] = cached
        return cached

    # Each _gen_* yields improving MoveDelta anchored at u.

    def _gen_relocate(self, u):
        sol = self.sol
        d = self.inst.dist
        q = self.inst.demand
        cap, omega, forbidden = self.cap, self.omega, self.forbidden
        lam, w = self.lam, self.weight
        loads = sol.loads
        routes = sol.routes
        pos = self.pos
        r1, i = pos[u]
        route1 = routes[r1]
        a = route1[i - 1] if i > 0 else 0
        b = route1[i + 1] if i + 1 < len(route1) else 0
        du = d[u]
        remove_gain = d[a][u] + du[b] - d[a][b]
        if lam is not None:
            lu = lam[u]
            remove_gain_aug = remove_gain + w * (lam[a][u] + lu[b] - lam[a][b])
        l1 = loads[r1]
        qu = q[u]
        all_moves = self.all_moves
        for v in self.cand[u]:
            r2, jv = pos[v]
            route2 = routes[r2]
            len2 = len(route2)
            if r1 == r2:
                pen = 0
            else:
                l2 = loads[r2]
                nl2 = l2 + qu
                if forbidden:
                    if nl2 > cap:
                        continue
                    pen = 0
                elif l1 > cap or l2 > cap or nl2 > cap:
                    ex = lambda t: t - cap if t > cap else 0
                    pen = omega * (ex(l1 - qu) + ex(nl2) - ex(l1) - ex(l2))
                else:
                    pen = 0
            for after in (True, False):
                if after:
                    x = v
                    y = route2[jv + 1] if jv + 1 < len2 else 0
                    slot = jv + 1
                else:
                    x = route2[jv - 1] if jv > 0 else 0
                    y = v
                    slot = jv
                if x == u or y == u:
                    continue
                self.evals += 1
                delta = d[x][u] + du[y] - d[x][y] - remove_gain + pen
                if lam is not None:
                    aug = delta + w * (lam[x][u] + lu[y] - lam[x][y]) \
                        - (remove_gain_aug - remove_gain)
                    score = aug
                else:
                    aug = delta
                    score = delta
                if score < 0 or all_moves:
                    yield MoveDelta("relocate", r1, i, r2, slot, delta, aug)
        empty = self.first_empty_route()
        if empty is not None and len(route1) > 1:
            self.evals += 1
            nl2 = qu
            ok = True
            pen = 0
            if forbidden:
                ok = nl2 <= cap
            elif l1 > cap or nl2 > cap:
                ex = lambda t: t - cap if t > cap else 0
                pen = omega * (ex(l1 - qu) + ex(nl2) - ex(l1))
            if ok:
                delta = 2 * du[0] - remove_gain + pen
                if lam is not None:
                    aug = delta + w * 2 * lu[0] - (remove_gain_aug - remove_gain)
                    score = aug
                else:
                    aug = delta
                    score = delta
                if score < 0 or all_moves:
                    yield MoveDelta("relocate", r1, i, empty, 0, delta, aug)

    def _gen_swap(self, u):
        sol = self.sol
        d = self.inst.dist
        q = self.inst.demand
        cap, omega, forbidden = self.cap, self.omega, self.forbidden
        lam, w = self.lam, self.weight
        loads = sol.loads
        routes = sol.routes
        pos = self.pos
        all_moves = self.all_moves
        r1, i = pos[u]
        route1 = routes[r1]
        a1 = route1[i - 1] if i > 0 else 0
        b1 = route1[i + 1] if i + 1 < len(route1) else 0
        du = d[u]
        qu = q[u]
        for v in self.cand[u]:
            r2, j = pos[v]
            route2 = routes[r2]
            self.evals += 1
            if r1 == r2 and (i - j == 1 or j - i == 1):
                lo, hi = (i, j) if i < j else (j, i)
                cl, ch = route1[lo], route1[hi]
                p = route1[lo - 1] if lo > 0 else 0
                s = route1[hi + 1] if hi + 1 < len(route1) else 0
                delta = d[p][ch] + d[cl][s] - d[p][cl] - d[ch][s]
                if lam is not None:
                    aug = delta + w * (lam[p][ch] + lam[cl][s] - lam[p][cl] - lam[ch][s])
                    score = aug
                else:
                    aug = delta
                    score = delta
                if score < 0 or all_moves:
                    yield MoveDelta("swap", r1, lo, r1, hi, delta, aug)
                continue
            if r1 == r2:
                pen = 0
            else:
                qv = q[v]
                l1, l2 = loads[r1], loads[r2]
                nl1 = l1 - qu + qv
                nl2 = l2 - qv + qu
                if forbidden:
                    if nl1 > cap or nl2 > cap:
                        continue
                    pen = 0
                elif l1 > cap or l2 > cap or nl1 > cap or nl2 > cap:
                    ex = lambda t: t - cap if t > cap else 0
                    pen = omega * (ex(nl1) + ex(nl2) - ex(l1) - ex(l2))
                else:
                    pen = 0
            a2 = route2[j - 1] if j > 0 else 0
            b2 = route2[j + 1] if j + 1 < len(route2) else 0
            dv = d[v]
            delta = (d[a1][v] + dv[b1] + d[a2][u] + du[b2]
                     - d[a1][u] - du[b1] - d[a2][v] - dv[b2]) + pen
            if lam is not None:
                lu, lv = lam[u], lam[v]
                aug = delta + w * (lam[a1][v] + lv[b1] + lam[a2][u] + lu[b2]
                                   - lam[a1][u] - lu[b1] - lam[a2][v] - lv[b2])
                score = aug
            else:
                aug = delta
                score = delta
            if score < 0 or all_moves:
                yield MoveDelta("swap", r1, i, r2, j, delta, aug)

    def _segment_move(self, route, r, a, b):
        """Delta for reversing route[a..b] inclusive, or None."""
        d = self.inst.dist
        p = route[a - 1] if a > 0 else 0
        s = route[b + 1] if b + 1 < len(route) else 0
        ca, cb = route[a], route[b]
        delta = d[p][cb] + d[ca][s] - d[p][ca] - d[cb][s]
        if self.lam is not None:
            lam, w = self.lam, self.weight
            aug = delta + w * (lam[p][cb] + lam[ca][s] - lam[p][ca] - lam[cb][s])
            score = aug
        else:
            aug = delta
            score = delta
        if score < 0 or self.all_moves:
            return MoveDelta("two_opt", r, a, r, b, delta, aug)
        return None

    def _gen_two_opt(self, u):
        pos = self.pos
        r1, i = pos[u]
        route1 = self.sol.routes[r1]
        for v in self.cand[u]:
            r2, j = pos[v]
            if r2 != r1:
                continue
            lo, hi = (i, j) if i < j else (j, i)
            if hi - lo >= 2:
                self.evals += 2
                mv = self._segment_move(route1, r1, lo + 1, hi)
                if mv is not None:
                    yield mv
                mv = self._segment_move(route1, r1, lo, hi - 1)
                if mv is not None:
                    yield mv
        # depot-anchored reversals: prefix up to u, suffix from u
        if i >= 1:
            self.evals += 1
            mv = self._segment_move(route1, r1, 0, i)
            if mv is not None:
                yield mv
        if i + 1 < len(route1):
            self.evals += 1
            mv = self._segment_move(route1, r1, i, len(route1) - 1)
            if mv is not None:
                yield mv

    def _gen_two_opt_star(self, u):
        sol = self.sol
        d = self.inst.dist
        cap, omega, forbidden = self.cap, self.omega, self.forbidden
        lam, w = self.lam, self.weight
        loads = sol.loads
        routes = sol.routes
        pos = self.pos
        all_moves = self.all_moves
        r1, i = pos[u]
        route1 = routes[r1]
        x = route1[i + 1] if i + 1 < len(route1) else 0
        pl1 = self._prefix_loads(r1)
        l1 = loads[r1]
        head1 = pl1[i + 1]
        tail1 = l1 - head1
        du = d[u]
        dux = du[x]
        for v in self.cand[u]:
            r2, j = pos[v]
            if r2 == r1:
                continue
            route2 = routes[r2]
            l2 = loads[r2]
            pl2 = self._prefix_loads(r2)
            # tails after u and from v are exchanged: new edges (u,v),(pv,x)
            pv = route2[j - 1] if j > 0 else 0
            self.evals += 1
            nl1 = head1 + (l2 - pl2[j])
            nl2 = pl2[j] + tail1
            ok = True
            pen = 0
            if forbidden:
                ok = nl1 <= cap and nl2 <= cap
            elif l1 > cap or l2 > cap or nl1 > cap or nl2 > cap:
                ex = lambda t: t - cap if t > cap else 0
                pen = omega * (ex(nl1) + ex(nl2) - ex(l1) - ex(l2))
            if ok:
                delta = du[v] + d[pv][x] - dux - d[pv][v] + pen
                if lam is not None:
                    aug = delta + w * (lam[u][v] + lam[pv][x] - lam[u][x] - lam[pv][v])
                    score = aug
                else:
                    aug = delta
                    score = delta
                if score < 0 or all_moves:
                    yield MoveDelta("two_opt_star", r1, i + 1, r2, j, delta, aug)
            # heads joined reversed: new edges (u,v),(x,y)
            y = route2[j + 1] if j + 1 < len(route2) else 0
            self.evals += 1
            nl1 = head1 + pl2[j + 1]
            nl2 = tail1 + (l2 - pl2[j + 1])
            ok = True
            pen = 0
            if forbidden:
                ok = nl1 <= cap and nl2 <= cap
            elif l1 > cap or l2 > cap or nl1 > cap or nl2 > cap:
                ex = lambda t: t - cap if t > cap else 0
                pen = omega * (ex(nl1) + ex(nl2) - ex(l1) - ex(l2))
            if ok:
                delta = du[v] + d[x][y] - dux - d[v][y] + pen
                if lam is not None:
                    aug = delta + w * (lam[u][v] + lam[x][y] - lam[u][x] - lam[v][y])
                    score = aug
                else:
                    aug = delta
                    score = delta
                if score < 0 or all_moves:
                    yield MoveDelta("two_opt_star_rev", r1, i + 1, r2, j + 1, delta, aug)
        empty = self.first_empty_route()
        if empty is not None and i + 1 < len(route1):
            self.evals += 1
            nl1 = head1
            nl2 = tail1
            ok = nl1 <= cap and nl2 <= cap if forbidden else True
            pen = 0
            if not forbidden and (l1 > cap or nl1 > cap or nl2 > cap):
                ex = lambda t: t - cap if t > cap else 0
                pen = omega * (ex(nl1) + ex(nl2) - ex(l1))
            if ok:
                delta = du[0] + d[0][x] - dux + pen
                if lam is not None:
                    aug = delta + w * (lam[u][0] + lam[0][x] - lam[u][x])
                    score = aug
                else:
                    aug = delta
                    score = delta
                if score < 0 or all_moves:
                    yield MoveDelta("two_opt_star", r1, i + 1, empty, 0, delta, aug)

    _GENS = {
        "relocate": _gen_relocate,
        "swap": _gen_swap,
        "two_opt": _gen_two_opt,
        "two_opt_star": _gen_two_opt_star,
    }

    def moves_for(self, u, kinds):
        for kind in kinds:
            yield from self._GENS[kind](self, u)

    def first_improving(self, u, kinds):
        for kind in kinds:
            for mv in self._GENS[kind](self, u):
                return mv
        return None

    def reindex_route(self, r):
        for idx, c in enumerate(self.sol.routes[r]):
            self.pos[c] = (r, idx)
        self._pl_cache.pop(r, None)
        self._empty_cache = -1

    def apply(self, move: MoveDelta) -> None:
        sol = self.sol
        inst = self.inst
        q = inst.demand
        routes = sol.routes
        k = move.kind
        if k == "relocate":
            u = routes[move.r1].pop(move.i)
            j = move.j
            if move.r1 == move.r2 and j > move.i:
                j -= 1
            routes[move.r2].insert(j, u)
            sol.loads[move.r1] -= q[u]
            sol.loads[move.r2] += q[u]
        elif k == "swap":
            a, b = routes[move.r1][move.i], routes[move.r2][move.j]
            routes[move.r1][move.i] = b
            routes[move.r2][move.j] = a
            if move.r1 != move.r2:
                sol.loads[move.r1] += q[b] - q[a]
                sol.loads[move.r2] += q[a] - q[b]
        elif k == "two_opt":
            r = routes[move.r1]
            r[move.i:move.j + 1] = reversed(r[move.i:move.j + 1])
        elif k == "two_opt_star":
            ra, rb = routes[move.r1], routes[move.r2]
            ta, tb = ra[move.i:], rb[move.j:]
            routes[move.r1] = ra[:move.i] + tb
            routes[move.r2] = rb[:move.j] + ta
            sol.loads[move.r1] = sum(q[c] for c in routes[move.r1])
            sol.loads[move.r2] = sum(q[c] for c in routes[move.r2])
        elif k == "two_opt_star_rev":
            ra, rb = routes[move.r1], routes[move.r2]
            ha, ta = ra[:move.i], ra[move.i:]
            hb, tb = rb[:move.j], rb[move.j:]
            routes[move.r1] = ha + hb[::-1]
            routes[move.r2] = ta[::-1] + tb
            sol.loads[move.r1] = sum(q[c] for c in routes[move.r1])
            sol.loads[move.r2] = sum(q[c] for c in routes[move.r2])
        else:
            raise ValueError(f"unknown move kind {k!r}")
        sol.dists[move.r1] = route_distance(inst, routes[move.r1])
        if move.r2 != move.r1:
            sol.dists[move.r2] = route_distance(inst, routes[move.r2])
        self.reindex_route(move.r1)
        if move.r2 != move.r1:
            self.reindex_route(move.r2)


ALL_KINDS = ("relocate", "swap", "two_opt", "two_opt_star")


def _scan(inst, sol, params, penalties, kinds, rng=None, best=False,
          clock=None, all_moves=False):
    state = _ScanState(inst, sol, params, penalties, all_moves=all_moves)
    aug = penalties is not None
    order = list(range(1, inst.n + 1))
    if rng is not None:
        rng.shuffle(order)
    found = None
    for u in order:
        for mv in state.moves_for(u, kinds):
            score = mv.delta_aug if aug else mv.delta_cost
            if score >= 0:
                continue
            if not best:
                found = mv
                break
            if found is None or score < (found.delta_aug if aug else found.delta_cost):
                found = mv
        if found is not None and not best:
            break
    if clock is not None:
        clock.charge(state.evals, "ls")
    return found


def scan_relocate(inst, sol, params, penalties=None, rng=None, best=False, clock=None):
    """Best or first improving single-customer relocation."""
    return _scan(inst, sol, params, penalties, ("relocate",), rng, best, clock)


def scan_swap(inst, sol, params, penalties=None, rng=None, best=False, clock=None):
    """Best or first improving pairwise exchange."""
    return _scan(inst, sol, params, penalties, ("swap",), rng, best, clock)


def scan_2opt(inst, sol, params, penalties=None, rng=None, best=False, clock=None):
    """Best or first improving intra-route segment reversal."""
    return _scan(inst, sol, params, penalties, ("two_opt",), rng, best, clock)


def scan_2opt_star(inst, sol, params, penalties=None, rng=None, best=False, clock=None):
    """Best or first improving inter-route tail exchange (both orientations)."""
    return _scan(inst, sol, params, penalties, ("two_opt_star",), rng, best, clock)


def all_candidate_moves(inst, sol, params, penalties=None):
    """Every evaluated candidate move (improving or not); test support."""
    state = _ScanState(inst, sol, params, penalties, all_moves=True)
    out = []
    for u in range(1, inst.n + 1):
        out.extend(state.moves_for(u, ALL_KINDS))
    return out


def apply_move(inst: Instance, sol: Solution, move: MoveDelta,
               params: SearchParams, penalties=None) -> None:
    """Apply one MoveDelta to `sol` in place, keeping caches coherent."""
    _ScanState(inst, sol, params, penalties).apply(move)


def descend(inst, sol, params, penalties=None, rng=None, clock=None) -> Solution:
    """First-improvement descent to a local minimum of all four neighborhoods.

    Moves are accepted on the augmented delta when `penalties` is given,
    on the true delta otherwise. The input solution is modified in place
    and also returned.
    """
    state = _ScanState(inst, sol, params, penalties)
    order = list(range(1, inst.n + 1))
    if rng is not None:
        rng.shuffle(order)
    dont_look = [False] * (inst.n + 1)

    def wake(move):
        for r in (move.r1, move.r2):
            for c in state.sol.routes[r]:
                dont_look[c] = False

    def sweep(use_bits):
        hit = False
        for u in order:
            if use_bits and dont_look[u]:
                continue
            moved = False
            while True:
                mv = state.first_improving(u, ALL_KINDS)
                if mv is None:
                    break
                state.apply(mv)
                wake(mv)
                dont_look[u] = False
                moved = True
                hit = True
            if not moved:
                dont_look[u] = True
        return hit

    while True:
        while sweep(True):
            pass
        if not sweep(False):
            break
    if clock is not None:
        clock.charge(state.evals, "ls")
    return sol
