"""Two metaheuristic hosts embedding pattern injection.

`run_hgs` is a compact hybrid genetic search: order crossover on giant
tours, optimal tour splitting, classical-neighborhood descent, repair,
cost-ranked survivor selection and stagnation-triggered diversification.
`run_gls` is a compact guided local search: a single trajectory driven by
edge penalization. Both call pattern injection immediately before each
local-search phase and extract patterns from local minima with a fixed
probability, and both run against the deterministic work clock so a
(seed, config) pair fully determines the run.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .clock import EXTRACT_WINDOW_UNITS, UNITS_PER_SECOND, WorkClock
from .injection import InjectionParams, pils_pass
from .local_search import EdgePenalties, SearchParams, descend, penalize_edges
from .model import CostParams, Instance, Solution, is_feasible, solution_cost
from .patterns import PatternPool


@dataclass
class HostConfig:
    """Run parameters; n-dependent fields left None resolve at run start
    (phi_freq = 5n, phi_size = n) and p_ex defaults per host (0.10 for
    hgs, 1.0 for gls)."""

    t_max: float = 60.0
    seed: int = 0
    pils: bool = True
    p_ex: float | None = None
    phi_freq: int | None = None
    phi_size: int | None = None
    l_min: int = 3
    l_max: int = 5
    k_neighbors: int = 20
    max_routes: int = 4
    mu: int = 25
    offspring: int = 40
    it_div: int = 500
    units_per_second: int = UNITS_PER_SECOND
    debug: bool = False

    def __post_init__(self):
        if self.p_ex is not None and not 0.0 <= self.p_ex <= 1.0:
            raise ValueError("p_ex must be in [0, 1]")
        if self.l_min < 1 or self.l_max < self.l_min:
            raise ValueError("need 1 <= l_min <= l_max")

    def resolve(self, inst: Instance, host: str) -> "HostConfig":
        cfg = replace(self)
        if cfg.phi_freq is None:
            cfg.phi_freq = 5 * inst.n
        if cfg.phi_size is None:
            cfg.phi_size = inst.n
        if cfg.p_ex is None:
            cfg.p_ex = 0.10 if host == "hgs" else 1.0
        if cfg.phi_size > cfg.phi_freq:
            raise ValueError("phi_size must not exceed phi_freq")
        return cfg


@dataclass
class RunResult:
    best: Solution
    best_cost: int
    events: list = field(default_factory=list)   # (virt_ms, real_ms, event, cost, pils_cum_virt_ms)
    moves: list = field(default_factory=list)    # (pattern_len, move_order, routes, delta)
    pool: PatternPool | None = None
    total_units: int = 0
    bucket_units: dict = field(default_factory=dict)
    pils_share: float = 0.0
    virt_ms: int = 0
    real_ms: int = 0


class _Run:
    """Shared per-run state: clock, rng, logging, best-so-far tracking."""

    def __init__(self, inst, cfg, host):
        self.inst = inst
        self.cfg = cfg.resolve(inst, host)
        self.rng = random.Random(self.cfg.seed)
        self.clock = WorkClock(self.cfg.t_max, self.cfg.units_per_second)
        self.pool = PatternPool(self.cfg.l_min, self.cfg.l_max, self.cfg.phi_freq)
        self.events = []
        self.moves = []
        self.best = None
        self.best_cost = None
        self.pils_enabled = self.cfg.pils and (self.cfg.phi_size > 0 or self.cfg.p_ex > 0)

    def log(self, event, cost):
        self.events.append((self.clock.virt_ms(), self.clock.real_ms(), event,
                            cost, self.clock.pils_virt_ms()))

    def offer_best(self, sol, cost):
        if is_feasible(self.inst, sol) and (self.best_cost is None or cost < self.best_cost):
            self.best = sol.copy()
            self.best_cost = cost
            self.log("new_best", cost)

    def inject(self, sol, params: InjectionParams, reject_cache=None):
        if self.cfg.phi_size <= 0:
            return
        cands = self.pool.sample_candidates(self.cfg.phi_size, self.rng)
        self.clock.charge(len(cands), "pils_inject")
        if cands:
            pils_pass(self.inst, sol, cands, params, self.rng,
                      clock=self.clock, move_log=self.moves,
                      reject_cache=reject_cache)
            self.log("pils_inject", solution_cost(self.inst, sol, params.cost))

    def maybe_extract(self, sol, cost):
        if self.cfg.p_ex <= 0:
            return
        if self.rng.random() < self.cfg.p_ex:
            windows = self.pool.extract(sol, cost=cost)
            self.clock.charge(windows * EXTRACT_WINDOW_UNITS, "pils_extract")
            self.log("pils_extract", cost)

    def result(self):
        return RunResult(
            best=self.best,
            best_cost=self.best_cost,
            events=self.events,
            moves=self.moves,
            pool=self.pool,
            total_units=self.clock.units,
            bucket_units=dict(self.clock.by_bucket),
            pils_share=self.clock.pils_share_percent(),
            virt_ms=self.clock.virt_ms(),
            real_ms=self.clock.real_ms(),
        )


def ox_crossover(p1, p2, rng) -> list[int]:
    """Classical order crossover: keep a slice of p1 in place, fill the
    rest with p2's customers in cyclic order after the slice."""
    n = len(p1)
    if n == 0 or len(p2) != n or set(p1) != set(p2) or len(set(p1)) != n:
        raise ValueError("parents must be permutations of the same customers")
    a = rng.randrange(n)
    b = rng.randrange(n)
    if a > b:
        a, b = b, a
    child = [0] * n
    used = set()
    for i in range(a, b + 1):
        child[i] = p1[i]
        used.add(p1[i])
    fill = [c for i in range(n) if (c := p2[(b + 1 + i) % n]) not in used]
    for offset, c in enumerate(fill):
        child[(b + 1 + offset) % n] = c
    return child


def split(inst: Instance, tour, clock=None) -> Solution:
    """Optimal capacity-feasible partition of a giant tour into routes
    (shortest path on the split graph)."""
    n = len(tour)
    if sorted(tour) != list(range(1, inst.n + 1)):
        raise ValueError("tour must be a permutation of all customers")
    d = inst.dist
    q = inst.demand
    cap = inst.capacity
    INF = float("inf")
    pot = [0] + [INF] * n
    pred = [0] * (n + 1)
    arcs = 0
    for i in range(1, n + 1):
        load = 0
        inner = 0
        j = i
        while j >= 1:
            c = tour[j - 1]
            load += q[c]
            if load > cap:
                break
            if j < i:
                inner += d[c][tour[j]]
            arcs += 1
            cost = pot[j - 1] + d[0][c] + inner + d[tour[i - 1]][0]
            if cost < pot[i]:
                pot[i] = cost
                pred[i] = j - 1
            j -= 1
    if clock is not None:
        clock.charge(arcs, "other")
    routes = []
    i = n
    while i > 0:
        j = pred[i]
        routes.append(tour[j:i])
        i = j
    routes.reverse()
    return Solution.from_routes(inst, routes)


def construct_initial(inst: Instance, rng, clock=None) -> Solution:
    """Randomized nearest-neighbor construction respecting capacity."""
    d = inst.dist
    q = inst.demand
    cap = inst.capacity
    unvisited = set(range(1, inst.n + 1))
    routes = []
    work = 0
    while unvisited:
        route = []
        load = 0
        cur = 0
        while True:
            feas = [c for c in unvisited if load + q[c] <= cap]
            work += len(feas)
            if not feas:
                break
            feas.sort(key=lambda c: (d[cur][c], c))
            pick = feas[rng.randrange(min(3, len(feas)))]
            route.append(pick)
            load += q[pick]
            cur = pick
            unvisited.discard(pick)
        routes.append(route)
    if clock is not None:
        clock.charge(work, "other")
    return Solution.from_routes(inst, routes)


def repair(inst: Instance, sol: Solution, params: SearchParams,
           rng=None, clock=None) -> tuple[Solution, bool]:
    """Restore feasibility by relocating customers out of overloaded routes
    into least-cost feasible positions (opening a route if necessary),
    then descend in forbidden mode."""
    if is_feasible(inst, sol):
        return sol, True
    d = inst.dist
    q = inst.demand
    cap = inst.capacity
    work = 0
    while True:
        over = [(sol.loads[r] - cap, r) for r in range(len(sol.routes))
                if sol.loads[r] > cap]
        if not over:
            break
        _, r = max(over)
        route = sol.routes[r]
        best = None  # (delta, idx, target_route, slot)
        for idx, u in enumerate(route):
            if q[u] == 0:
                continue
            a = route[idx - 1] if idx > 0 else 0
            b = route[idx + 1] if idx + 1 < len(route) else 0
            gain = d[a][u] + d[u][b] - d[a][b]
            for r2, target in enumerate(sol.routes):
                if r2 == r or sol.loads[r2] + q[u] > cap:
                    continue
                prev = 0
                for slot in range(len(target) + 1):
                    nxt = target[slot] if slot < len(target) else 0
                    work += 1
                    delta = d[prev][u] + d[u][nxt] - d[prev][nxt] - gain
                    if best is None or delta < best[0]:
                        best = (delta, idx, r2, slot)
                    prev = nxt if slot < len(target) else 0
            work += 1
            delta = 2 * d[0][u] - gain
            if best is None or delta < best[0]:
                best = (delta, idx, -1, 0)
        if best is None:
            if clock is not None:
                clock.charge(work, "other")
            return sol, False
        _, idx, r2, slot = best
        u = route.pop(idx)
        if r2 < 0:
            sol.routes.append([])
            sol.loads.append(0)
            sol.dists.append(0)
            r2 = len(sol.routes) - 1
            slot = 0
        sol.routes[r2].insert(slot, u)
        sol.loads[r] -= q[u]
        sol.loads[r2] += q[u]
        sol.resync(inst)
    if clock is not None:
        clock.charge(work, "other")
    forcing = SearchParams(CostParams(params.cost.omega, "forbidden"), params.k_neighbors)
    descend(inst, sol, forcing, rng=rng, clock=clock)
    return sol, True


def _signature(sol: Solution):
    return tuple(sorted(tuple(r) if tuple(r) <= tuple(r[::-1]) else tuple(r[::-1])
                        for r in sol.routes if r))


def select_survivors(population, mu):
    """Keep the mu best by cost, dropping duplicate solutions first."""
    ranked = sorted(population, key=lambda ind: ind[0])
    seen = set()
    unique, dupes = [], []
    for ind in ranked:
        sig = _signature(ind[1])
        if sig in seen:
            dupes.append(ind)
        else:
            seen.add(sig)
            unique.append(ind)
    survivors = unique[:mu]
    if len(survivors) < mu:
        survivors.extend(dupes[:mu - len(survivors)])
    return survivors


def diversify(population, inst, params, rng, clock=None):
    """Replace the worst half with fresh constructed-and-descended
    solutions; the best individual always survives."""
    ranked = sorted(population, key=lambda ind: ind[0])
    keep = max(1, len(ranked) - len(ranked) // 2)
    fresh = []
    for _ in range(len(ranked) - keep):
        sol = construct_initial(inst, rng, clock)
        descend(inst, sol, params, rng=rng, clock=clock)
        fresh.append((solution_cost(inst, sol, params.cost), sol))
    return ranked[:keep] + fresh


def run_hgs(inst: Instance, config: HostConfig) -> RunResult:
    """Genetic host: crossover offspring get pattern injection, then local
    search, then repair; extraction fires on the resulting local minima."""
    run = _Run(inst, config, "hgs")
    cfg = run.cfg
    rng, clock = run.rng, run.clock
    cost_params = CostParams.for_instance(inst, "penalized")
    ls_params = SearchParams(cost_params, cfg.k_neighbors)
    inj_params = InjectionParams(CostParams(cost_params.omega, "penalized"),
                                 cfg.max_routes, cfg.debug)

    population = []
    for k in range(cfg.mu):
        if k > 0 and clock.expired():
            break
        tour = list(range(1, inst.n + 1))
        rng.shuffle(tour)
        clock.charge(inst.n, "other")
        sol = split(inst, tour, clock)
        descend(inst, sol, ls_params, rng=rng, clock=clock)
        if not is_feasible(inst, sol):
            sol, ok = repair(inst, sol, ls_params, rng, clock)
            if not ok:
                continue
        cost = solution_cost(inst, sol, cost_params)
        population.append((cost, sol))
        run.offer_best(sol, cost)
    run.log("ls", run.best_cost if run.best_cost is not None else -1)

    stagnation = 0
    while not clock.expired() and population:
        def tournament():
            a = population[rng.randrange(len(population))]
            b = population[rng.randrange(len(population))]
            return a if a[0] <= b[0] else b

        p1 = tournament()
        p2 = tournament()
        child_tour = ox_crossover(p1[1].giant_tour(), p2[1].giant_tour(), rng)
        clock.charge(inst.n, "other")
        child = split(inst, child_tour, clock)
        run.log("crossover", solution_cost(inst, child, cost_params))
        if run.pils_enabled:
            run.inject(child, inj_params)
        descend(inst, child, ls_params, rng=rng, clock=clock)
        if not is_feasible(inst, child):
            child, ok = repair(inst, child, ls_params, rng, clock)
            if not ok:
                continue
        cost = solution_cost(inst, child, cost_params)
        run.log("ls", cost)
        if run.pils_enabled:
            run.maybe_extract(child, cost)
        prev_best = run.best_cost
        run.offer_best(child, cost)
        stagnation = 0 if (prev_best is None or (run.best_cost is not None
                                                 and run.best_cost < prev_best)) else stagnation + 1
        population.append((cost, child))
        if len(population) >= cfg.mu + cfg.offspring:
            population = select_survivors(population, cfg.mu)
        if stagnation >= cfg.it_div:
            population = diversify(population, inst, ls_params, rng, clock)
            for c, s in population:
                run.offer_best(s, c)
            run.log("diversify", population[0][0])
            stagnation = 0
    return run.result()


def run_gls(inst: Instance, config: HostConfig) -> RunResult:
    """Trajectory host: penalize edges, inject patterns, descend under the
    augmented cost, extract; the best solution is tracked on true cost."""
    run = _Run(inst, config, "gls")
    cfg = run.cfg
    rng, clock = run.rng, run.clock
    cost_params = CostParams.for_instance(inst, "forbidden")
    ls_params = SearchParams(cost_params, cfg.k_neighbors)
    inj_params = InjectionParams(CostParams(cost_params.omega, "forbidden"),
                                 cfg.max_routes, cfg.debug)

    sol = construct_initial(inst, rng, clock)
    descend(inst, sol, ls_params, rng=rng, clock=clock)
    cost = solution_cost(inst, sol, cost_params)
    run.log("ls", cost)
    run.offer_best(sol, cost)

    edges = sum(len(r) + 1 for r in sol.routes if r)
    weight = max(1, round(0.1 * sol.total_distance() / max(1, edges)))
    penalties = EdgePenalties(inst.n, weight)
    reject_cache: dict = {}

    while not clock.expired():
        examined = penalize_edges(inst, sol, penalties)
        clock.charge(examined, "other")
        run.log("penalize", solution_cost(inst, sol, cost_params))
        if run.pils_enabled:
            run.inject(sol, inj_params, reject_cache)
            run.offer_best(sol, solution_cost(inst, sol, cost_params))
        descend(inst, sol, ls_params, penalties=penalties, rng=rng, clock=clock)
        cost = solution_cost(inst, sol, cost_params)
        run.log("ls", cost)
        run.offer_best(sol, cost)
        if run.pils_enabled:
            run.maybe_extract(sol, cost)
    return run.result()
