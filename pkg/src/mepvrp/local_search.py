"""Education: first-improvement local search over granular neighbourhoods.

Moves: relocate (client after a neighbour, or to the front of the
neighbour's route, or into an unused vehicle), swap, intra-route 2-opt,
inter-route 2-opt* (tail exchange) and, with clusters, in-place cluster
reselection.

Distance and load deltas are O(1) from cached prefix sums. When schedules or
backhaul loads matter, candidate routes are re-simulated in full, after a
lower-bound check on the distance delta rules out hopeless moves.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from .cost import CostEvaluator, RouteStats, simulate_route
from .instance import UNBOUNDED, ProblemData
from .rng import RandomNumberGenerator
from .solution import Route, Solution


@dataclass(frozen=True)
class NeighborLists:
    k: int
    lists: tuple[tuple[int, ...], ...]

    def __getitem__(self, client: int) -> tuple[int, ...]:
        return self.lists[client]


def build_neighbor_lists(data: ProblemData, k: int) -> NeighborLists:
    """The ``k`` nearest other clients of every client, ties by lower id."""
    if k < 1:
        raise ValueError("k must be at least 1")
    clients = data.client_ids
    dist = data.dist
    lists: list[tuple[int, ...]] = [()] * data.num_nodes
    for u in clients:
        ranked = sorted((v for v in clients if v != u), key=lambda v: (dist[u][v], v))
        lists[u] = tuple(ranked[:k])
    return NeighborLists(k=k, lists=tuple(lists))


@dataclass(frozen=True)
class EducateParams:
    k_neighbors: int = 20
    max_rounds: int = 1000


class LocalSearch:
    """Reusable local search bound to one instance.

    ``check=True`` re-simulates every applied move and asserts the cached
    route costs agree with a full simulation (used by tests).
    """

    def __init__(self, data: ProblemData, params: EducateParams | None = None, check: bool = False):
        self.data = data
        self.params = params or EducateParams()
        k = max(1, min(self.params.k_neighbors, max(1, data.num_clients - 1)))
        self.neighbors = build_neighbor_lists(data, k)
        self.check = check
        n = data.num_nodes
        depots = set(data.depots)
        if data.open_routes:
            # Arriving back at a depot is free on open routes.
            self.D = [[0 if j in depots else data.dist[i][j] for j in range(n)] for i in range(n)]
        else:
            self.D = [list(row) for row in data.dist]
        self.fast = not data.is_timed and data.backhaul_mode == "none"
        self.strict = data.backhaul_mode == "strict"
        self.symmetric = data.is_symmetric
        self.q = data.demand

    # -- route cache -------------------------------------------------------

    def _setup(self, solution: Solution, evaluator: CostEvaluator) -> None:
        data = self.data
        self.lc = evaluator.load_coeffs[0]
        self.tc = evaluator.tw_coeff
        self.dc = evaluator.dist_coeff
        self.budget = data.prize_budget
        self.R: list[list[int]] = []
        self.vt: list[int] = []
        used = [0] * len(data.vehicle_types)
        for r in solution.routes():
            self.R.append(r.visits())
            self.vt.append(r.vehicle_type)
            if 0 <= r.vehicle_type < len(used):
                used[r.vehicle_type] += 1
        for t, vtype in enumerate(data.vehicle_types):
            for _ in range(max(0, vtype.count - used[t])):
                self.R.append([])
                self.vt.append(t)
        m = len(self.R)
        vts = data.vehicle_types
        self.dep = [vts[t].depot for t in self.vt]
        self.cap = [vts[t].capacity for t in self.vt]
        self.maxd = [vts[t].max_distance if vts[t].max_distance is not None else UNBOUNDED for t in self.vt]
        self.dist = [0] * m
        self.load = [0] * m
        self.pen = [0] * m
        self.cost = [0] * m
        self.cum: list[list[int]] = [[] for _ in range(m)]
        self.pref: list[list[int]] = [[] for _ in range(m)]
        self.prec = [0] * m
        self.stats: list[RouteStats | None] = [None] * m
        self.route_of = [-1] * data.num_nodes
        self.pos_of = [-1] * data.num_nodes
        for r in range(m):
            self._refresh(r)
        self.total_dist = sum(self.dist)
        self.clock = 0
        self.stamp = [0] * m

    def _refresh(self, r: int) -> None:
        visits = self.R[r]
        D = self.D
        q = self.q
        dep = self.dep[r]
        cum = []
        pref = []
        d = 0
        load = 0
        prev = dep
        for pos, v in enumerate(visits):
            d += D[prev][v]
            cum.append(d)
            load += q[v]
            pref.append(load)
            self.route_of[v] = r
            self.pos_of[v] = pos
            prev = v
        if visits:
            d += D[prev][dep]
        self.cum[r] = cum
        self.pref[r] = pref
        self.dist[r] = d
        self.load[r] = load
        if self.fast:
            pen = self._fast_pen(r, d, load)
        else:
            stats = simulate_route(visits, self.vt[r], self.data)
            self.stats[r] = stats
            self.prec[r] = stats.precedence_violations
            pen = self._pen(stats)
        self.pen[r] = pen
        self.cost[r] = d + pen

    def _fast_pen(self, r: int, d: int, load: int) -> float:
        pen = 0
        if load > self.cap[r]:
            pen += self.lc * (load - self.cap[r])
        if d > self.maxd[r]:
            pen += self.dc * (d - self.maxd[r])
        return pen

    def _pen(self, s: RouteStats) -> float:
        return self.lc * s.excess_load + self.tc * s.time_warp + self.dc * (s.excess_distance + s.excess_duration)

    def _budget_delta(self, ddist: int) -> float:
        b = self.budget
        if b is None:
            return 0
        before = max(0, self.total_dist - b)
        after = max(0, self.total_dist + ddist - b)
        return self.dc * (after - before)

    # -- move evaluation ---------------------------------------------------

    def _commit(self, changes: list[tuple[int, list[int]]], ddist: int) -> None:
        for r, visits in changes:
            self.R[r] = visits
        self.clock += 1
        for r, _ in changes:
            self._refresh(r)
            self.stamp[r] = self.clock
        self.total_dist += ddist
        if self.check:
            self._verify()

    def _try(self, changes, ddist: int, fast_costs) -> bool:
        """Apply ``changes`` (route index, thunk -> new visits) if they improve.

        ``fast_costs`` holds the exact new route costs on the fast path, or
        ``None`` to fall back to re-simulation.
        """
        old = 0
        for r, _ in changes:
            old += self.cost[r]
        bdelta = self._budget_delta(ddist)
        if fast_costs is not None:
            if sum(fast_costs) + bdelta - old < 0:
                self._commit([(r, make()) for r, make in changes], ddist)
                return True
            return False
        # Lower bound: penalties can at best vanish.
        olddist = 0
        for r, _ in changes:
            olddist += self.dist[r]
        if olddist + ddist + bdelta - old >= 0:
            return False
        built = [(r, make()) for r, make in changes]
        new = 0
        prec = 0
        oldprec = 0
        data = self.data
        for r, visits in built:
            s = simulate_route(visits, self.vt[r], data)
            new += s.distance + self._pen(s)
            prec += s.precedence_violations
            oldprec += self.prec[r]
        if self.strict and prec > oldprec:
            return False
        if new + bdelta - old < 0:
            self._commit(built, ddist)
            return True
        return False

    def _verify(self) -> None:
        for r, visits in enumerate(self.R):
            s = simulate_route(visits, self.vt[r], self.data)
            assert s.distance == self.dist[r], (r, s.distance, self.dist[r])
            expect = s.distance + self._pen(s)
            assert abs(expect - self.cost[r]) < 1e-6, (r, expect, self.cost[r])
        assert self.total_dist == sum(self.dist)

    def _pred(self, r: int, i: int) -> int:
        return self.R[r][i - 1] if i > 0 else self.dep[r]

    def _succ(self, r: int, i: int) -> int:
        route = self.R[r]
        return route[i + 1] if i + 1 < len(route) else self.dep[r]

    def relocate(self, u: int, v: int) -> bool:
        """Move ``u`` to directly after ``v``."""
        ru, iu = self.route_of[u], self.pos_of[u]
        rv, iv = self.route_of[v], self.pos_of[v]
        if ru == rv and iv == iu - 1:
            return False
        D = self.D
        pu, xu = self._pred(ru, iu), self._succ(ru, iu)
        y = self._succ(rv, iv)
        drem = D[pu][xu] - D[pu][u] - D[u][xu]
        dins = D[v][u] + D[u][y] - D[v][y]
        ddist = drem + dins
        pen = self.pen
        if ddist >= (pen[ru] if ru == rv else pen[ru] + pen[rv]):
            return False
        Ru, Rv = self.R[ru], self.R[rv]
        if ru == rv:
            def make():
                lst = Ru[:iu] + Ru[iu + 1:]
                at = iv if iv < iu else iv - 1
                lst.insert(at + 1, u)
                return lst
            fast = None
            if self.fast:
                nd = self.dist[ru] + ddist
                fast = [nd + self._fast_pen(ru, nd, self.load[ru])]
            return self._try([(ru, make)], ddist, fast)
        fast = None
        if self.fast:
            qu = self.q[u]
            nd1, nl1 = self.dist[ru] + drem, self.load[ru] - qu
            nd2, nl2 = self.dist[rv] + dins, self.load[rv] + qu
            fast = [nd1 + self._fast_pen(ru, nd1, nl1), nd2 + self._fast_pen(rv, nd2, nl2)]
        return self._try(
            [(ru, lambda: Ru[:iu] + Ru[iu + 1:]), (rv, lambda: Rv[:iv + 1] + [u] + Rv[iv + 1:])],
            ddist,
            fast,
        )

    def relocate_front(self, u: int, rv: int) -> bool:
        """Move ``u`` to the first position of route ``rv`` (possibly empty)."""
        ru, iu = self.route_of[u], self.pos_of[u]
        if ru == rv and iu == 0:
            return False
        D = self.D
        pu, xu = self._pred(ru, iu), self._succ(ru, iu)
        dep = self.dep[rv]
        Rv = self.R[rv]
        y = Rv[0] if Rv else dep
        drem = D[pu][xu] - D[pu][u] - D[u][xu]
        dins = D[dep][u] + D[u][y] - D[dep][y]
        ddist = drem + dins
        pen = self.pen
        if ddist >= (pen[ru] if ru == rv else pen[ru] + pen[rv]):
            return False
        Ru = self.R[ru]
        if ru == rv:
            fast = None
            if self.fast:
                nd = self.dist[ru] + ddist
                fast = [nd + self._fast_pen(ru, nd, self.load[ru])]
            return self._try([(ru, lambda: [u] + Ru[:iu] + Ru[iu + 1:])], ddist, fast)
        fast = None
        if self.fast:
            qu = self.q[u]
            nd1, nl1 = self.dist[ru] + drem, self.load[ru] - qu
            nd2, nl2 = self.dist[rv] + dins, self.load[rv] + qu
            fast = [nd1 + self._fast_pen(ru, nd1, nl1), nd2 + self._fast_pen(rv, nd2, nl2)]
        return self._try(
            [(ru, lambda: Ru[:iu] + Ru[iu + 1:]), (rv, lambda: [u] + Rv)],
            ddist,
            fast,
        )

    def swap(self, u: int, v: int) -> bool:
        ru, iu = self.route_of[u], self.pos_of[u]
        rv, iv = self.route_of[v], self.pos_of[v]
        D = self.D
        pu, xu = self._pred(ru, iu), self._succ(ru, iu)
        pv, xv = self._pred(rv, iv), self._succ(rv, iv)
        Ru, Rv = self.R[ru], self.R[rv]
        if ru == rv:
            if iv == iu + 1:
                ddist = D[pu][v] + D[v][u] + D[u][xv] - D[pu][u] - D[u][v] - D[v][xv]
            elif iv == iu - 1:
                ddist = D[pv][u] + D[u][v] + D[v][xu] - D[pv][v] - D[v][u] - D[u][xu]
            else:
                ddist = (
                    D[pu][v] + D[v][xu] - D[pu][u] - D[u][xu]
                    + D[pv][u] + D[u][xv] - D[pv][v] - D[v][xv]
                )
            if ddist >= self.pen[ru]:
                return False

            def make():
                lst = list(Ru)
                lst[iu], lst[iv] = v, u
                return lst
            fast = None
            if self.fast:
                nd = self.dist[ru] + ddist
                fast = [nd + self._fast_pen(ru, nd, self.load[ru])]
            return self._try([(ru, make)], ddist, fast)
        du = D[pu][v] + D[v][xu] - D[pu][u] - D[u][xu]
        dv = D[pv][u] + D[u][xv] - D[pv][v] - D[v][xv]
        ddist = du + dv
        if ddist >= self.pen[ru] + self.pen[rv]:
            return False

        def make_u():
            lst = list(Ru)
            lst[iu] = v
            return lst

        def make_v():
            lst = list(Rv)
            lst[iv] = u
            return lst
        fast = None
        if self.fast:
            shift = self.q[v] - self.q[u]
            nd1, nl1 = self.dist[ru] + du, self.load[ru] + shift
            nd2, nl2 = self.dist[rv] + dv, self.load[rv] - shift
            fast = [nd1 + self._fast_pen(ru, nd1, nl1), nd2 + self._fast_pen(rv, nd2, nl2)]
        return self._try([(ru, make_u), (rv, make_v)], ddist, fast)

    def two_opt(self, u: int, v: int) -> bool:
        """Intra-route 2-opt making ``u`` and ``v`` adjacent by a reversal."""
        ru, iu = self.route_of[u], self.pos_of[u]
        rv, iv = self.route_of[v], self.pos_of[v]
        if ru != rv or not self.symmetric:
            return False
        R = self.R[ru]
        D = self.D
        if iv >= iu + 2:
            a, b = iu, iv            # reverse R[a+1 .. b]
        elif iu >= iv + 2:
            a, b = iv, iu
        else:
            return False
        first, last = R[a], R[b]
        nxt_a = R[a + 1]
        after = self._succ(ru, b)
        ddist = D[first][last] + D[nxt_a][after] - D[first][nxt_a] - D[last][after]
        if ddist >= self.pen[ru]:
            return False

        def make():
            return R[:a + 1] + R[a + 1:b + 1][::-1] + R[b + 1:]
        fast = None
        if self.fast:
            nd = self.dist[ru] + ddist
            fast = [nd + self._fast_pen(ru, nd, self.load[ru])]
        return self._try([(ru, make)], ddist, fast)

    def two_opt_star(self, u: int, v: int) -> bool:
        """Exchange the tails after ``u`` and after ``v`` between their routes."""
        ru, iu = self.route_of[u], self.pos_of[u]
        rv, iv = self.route_of[v], self.pos_of[v]
        if ru == rv:
            return False
        Ru, Rv = self.R[ru], self.R[rv]
        D = self.D
        cu, cv = self.cum[ru], self.cum[rv]
        dep_u, dep_v = self.dep[ru], self.dep[rv]
        if iv + 1 < len(Rv):
            nd1 = cu[iu] + D[u][Rv[iv + 1]] + cv[-1] - cv[iv + 1] + D[Rv[-1]][dep_u]
        else:
            nd1 = cu[iu] + D[u][dep_u]
        if iu + 1 < len(Ru):
            nd2 = cv[iv] + D[v][Ru[iu + 1]] + cu[-1] - cu[iu + 1] + D[Ru[-1]][dep_v]
        else:
            nd2 = cv[iv] + D[v][dep_v]
        ddist = nd1 + nd2 - self.dist[ru] - self.dist[rv]
        if ddist >= self.pen[ru] + self.pen[rv]:
            return False
        fast = None
        if self.fast:
            pu, pv = self.pref[ru], self.pref[rv]
            nl1 = pu[iu] + self.load[rv] - pv[iv]
            nl2 = pv[iv] + self.load[ru] - pu[iu]
            fast = [nd1 + self._fast_pen(ru, nd1, nl1), nd2 + self._fast_pen(rv, nd2, nl2)]
        return self._try(
            [(ru, lambda: Ru[:iu + 1] + Rv[iv + 1:]), (rv, lambda: Rv[:iv + 1] + Ru[iu + 1:])],
            ddist,
            fast,
        )

    def to_empty(self, u: int) -> bool:
        """Move ``u`` into the cheapest unused vehicle, if any."""
        best = None
        D = self.D
        for r, route in enumerate(self.R):
            if route:
                continue
            d = self.dep[r]
            c = D[d][u] + D[u][d]
            if best is None or c < best[0]:
                best = (c, r)
        if best is None:
            return False
        return self.relocate_front(u, best[1])

    def reselect(self, u: int) -> bool:
        """Replace ``u`` in place by another member of its cluster."""
        cluster = self.data.cluster_of[u]
        if cluster is None:
            return False
        ru, iu = self.route_of[u], self.pos_of[u]
        D = self.D
        pu, xu = self._pred(ru, iu), self._succ(ru, iu)
        Ru = self.R[ru]
        for w in self.data.clusters[cluster]:
            if w == u or self.route_of[w] >= 0:
                continue
            ddist = D[pu][w] + D[w][xu] - D[pu][u] - D[u][xu]
            if ddist >= self.pen[ru]:
                continue

            def make(w=w):
                lst = list(Ru)
                lst[iu] = w
                return lst
            fast = None
            if self.fast:
                nd, nl = self.dist[ru] + ddist, self.load[ru] - self.q[u] + self.q[w]
                fast = [nd + self._fast_pen(ru, nd, nl)]
            if self._try([(ru, make)], ddist, fast):
                self.route_of[u] = -1
                self.pos_of[u] = -1
                return True
        return False

    # -- driver ----------------------------------------------------------------

    def educate(
        self,
        solution: Solution,
        evaluator: CostEvaluator,
        rng: RandomNumberGenerator,
        deadline: float | None = None,
    ) -> Solution:
        """Improve ``solution`` until no move helps, ``max_rounds`` pass, or
        ``time.perf_counter()`` reaches ``deadline``."""
        self._setup(solution, evaluator)
        route_of = self.route_of
        neighbors = self.neighbors.lists
        clustered = self.data.has_clusters
        # A pair is re-examined only when one of its routes changed since u's
        # last scan. A global budget couples all routes, so it disables this.
        skip_unchanged = self.budget is None
        tested = [-1] * self.data.num_nodes
        stamp = self.stamp
        rounds = 0
        improved = True
        while improved and rounds < self.params.max_rounds:
            improved = False
            rounds += 1
            order = [v for route in self.R for v in route]
            order.sort()
            rng.shuffle(order)
            for u in order:
                if route_of[u] < 0:
                    continue
                if deadline is not None and time.perf_counter() >= deadline:
                    return self._build()
                last = tested[u]
                tested[u] = self.clock
                for v in neighbors[u]:
                    if route_of[v] < 0 or route_of[u] < 0:
                        continue
                    if skip_unchanged and stamp[route_of[u]] <= last and stamp[route_of[v]] <= last:
                        continue
                    if self.relocate(u, v) or self.swap(u, v) or self.two_opt(u, v) or self.two_opt_star(u, v):
                        improved = True
                        continue
                    if self.pos_of[v] == 0 and self.relocate_front(u, route_of[v]):
                        improved = True
                if route_of[u] < 0:
                    continue
                if self.to_empty(u):
                    improved = True
                if clustered and self.reselect(u):
                    improved = True
        return self._build()

    def _build(self) -> Solution:
        data = self.data
        routes = []
        for r, visits in enumerate(self.R):
            if not visits:
                continue
            stats = self.stats[r] if not self.fast else None
            routes.append(Route(data, visits, self.vt[r], stats=stats))
        return Solution(data, routes)


def educate(
    solution: Solution,
    data: ProblemData,
    evaluator: CostEvaluator,
    rng: RandomNumberGenerator,
    params: EducateParams | None = None,
) -> Solution:
    """One-shot education of ``solution``; see :class:`LocalSearch`."""
    return LocalSearch(data, params).educate(solution, evaluator, rng)

