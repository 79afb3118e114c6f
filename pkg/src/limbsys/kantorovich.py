"""Exact primal-dual solver for the discrete transportation problem.

The solver is a network simplex on the bipartite transportation graph: the
basis is a spanning tree over all row and column nodes, so every iterate is a
vertex of the transportation polytope and the terminal support is acyclic by
construction.  In rational mode every quantity is a ``fractions.Fraction``
and optimality is certified exactly (zero duality gap, zero-tolerance
complementary slackness); float inputs convert losslessly because binary
floats are rationals.

Pricing uses a float mirror of the exact slacks to locate candidate entering
arcs quickly, then confirms each candidate with exact arithmetic, and always
finishes with a full exact scan, so the certificate never depends on float
rounding.  Ties are broken by lowest ``(i, j)``; after a pivot budget the
rule degrades to Bland's (first eligible in scan order), which guarantees
termination under degeneracy.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import MassMismatch, ShapeMismatch
from .measures import (
    MARGINAL_ABS_TOL,
    CostMatrix,
    Coupling,
    DiscreteMeasure,
    Number,
    masses_close,
    to_exact,
)

#: Default zero-set tolerance in float mode, as a multiple of ``max |c|``.
ZERO_SET_REL_TOL = 1e-9
#: Relative duality-gap tolerance accepted in float mode.
GAP_REL_TOL = 1e-9
#: Support masses below this multiple of the total mass are pruned (float mode).
SUPPORT_REL_THRESHOLD = 1e-12


@dataclass(frozen=True)
class DualPotentials:
    """Kantorovich dual pair: one potential per row site and per column site.

    Feasibility means ``q[i] + r[j] <= c[i][j]`` everywhere; the pair is
    normalized so that ``r[0] == 0``.
    """

    q: tuple[Number, ...]
    r: tuple[Number, ...]

    def slack(self, cost: CostMatrix, i: int, j: int) -> Number:
        return cost.entries[i][j] - self.q[i] - self.r[j]


@dataclass(frozen=True)
class Solution:
    """Optimal coupling plus the dual certificate produced alongside it."""

    coupling: Coupling
    potentials: DualPotentials
    primal_value: Number
    dual_value: Number
    zero_set: tuple[tuple[int, int], ...]
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    cost: CostMatrix
    exact: bool

    @cached_property
    def zero_set_fibers(self) -> dict[int, tuple[int, ...]]:
        """Zero-set partners per row site."""
        fibers: dict[int, list[int]] = {}
        for i, j in self.zero_set:
            fibers.setdefault(i, []).append(j)
        return {i: tuple(sorted(js)) for i, js in fibers.items()}


@dataclass(frozen=True)
class CertificateCheck:
    name: str
    passed: bool
    violation: float


@dataclass(frozen=True)
class CertificateReport:
    checks: tuple[CertificateCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CertificateCheck:
        return next(c for c in self.checks if c.name == name)


class _Tree:
    """Spanning-tree basis with flows, rebuilt after every pivot.

    Nodes are ``0..m-1`` for rows and ``m..m+n-1`` for columns; the root is
    always column node ``m`` (column 0), which pins ``r[0] = 0``.
    """

    __slots__ = ("m", "n", "arcs", "flow", "parent", "parent_arc", "depth", "order")

    def __init__(self, m: int, n: int, arcs: set, flow: dict):
        self.m = m
        self.n = n
        self.arcs = arcs
        self.flow = flow
        self.rebuild()

    def rebuild(self) -> None:
        m, n = self.m, self.n
        size = m + n
        adj: list[list[int]] = [[] for _ in range(size)]
        for i, j in self.arcs:
            adj[i].append(m + j)
            adj[m + j].append(i)
        root = m
        parent = [-1] * size
        parent_arc: list[tuple[int, int] | None] = [None] * size
        depth = [0] * size
        order = [root]
        parent[root] = root
        k = 0
        while k < len(order):
            u = order[k]
            k += 1
            for v in adj[u]:
                if parent[v] == -1:
                    parent[v] = u
                    parent_arc[v] = (v, u - m) if v < m else (u, v - m)
                    depth[v] = depth[u] + 1
                    order.append(v)
        if len(order) != size:
            raise RuntimeError("internal error: basis does not span all nodes")
        parent[root] = -1
        self.parent = parent
        self.parent_arc = parent_arc
        self.depth = depth
        self.order = order

    def potentials(self, cost: Sequence[Sequence[Number]], zero: Number):
        m = self.m
        q: list[Number] = [zero] * m
        r: list[Number] = [zero] * self.n
        for v in self.order[1:]:
            i, j = self.parent_arc[v]  # type: ignore[misc]
            if v < m:
                q[i] = cost[i][j] - r[j]
            else:
                r[j] = cost[i][j] - q[i]
        return q, r

    def cycle_with(self, i: int, j: int) -> list[tuple[int, int]]:
        """Arcs of the unique tree cycle closed by entering arc ``(i, j)``.

        The entering arc comes first; signs alternate ``+,-,+,-,...`` along
        the returned list, so even positions gain flow and odd ones donate.
        """
        m = self.m
        u, v = i, m + j
        path_u: list[int] = [u]
        path_v: list[int] = [v]
        du, dv = self.depth[u], self.depth[v]
        while du > dv:
            u = self.parent[u]
            path_u.append(u)
            du -= 1
        while dv > du:
            v = self.parent[v]
            path_v.append(v)
            dv -= 1
        while u != v:
            u = self.parent[u]
            v = self.parent[v]
            path_u.append(u)
            path_v.append(v)
        nodes = path_u + list(reversed(path_v[:-1]))
        arcs = [(i, j)]
        for a, b in zip(nodes, nodes[1:]):
            arcs.append((a, b - m) if a < m else (b, a - m))
        return arcs


def _northwest_corner(mu: list, nu: list):
    """Initial spanning-tree basis; exactly ``m + n - 1`` arcs, staircase shaped."""
    m, n = len(mu), len(nu)
    a = list(mu)
    b = list(nu)
    arcs = set()
    flow = {}
    i = j = 0
    while True:
        t = a[i] if a[i] <= b[j] else b[j]
        arcs.add((i, j))
        flow[(i, j)] = t
        a[i] -= t
        b[j] -= t
        if i == m - 1 and j == n - 1:
            break
        # Exhaust the row first on ties so exactly m+n-1 arcs are produced.
        if a[i] == 0 and i < m - 1:
            i += 1
        else:
            j += 1
    return arcs, flow


def _zero_pairs(cost: CostMatrix, q, r, tol) -> tuple[tuple[int, int], ...]:
    out = []
    for i in range(cost.rows):
        row = cost.entries[i]
        qi = q[i]
        for j in range(cost.cols):
            if row[j] - qi - r[j] <= tol:
                out.append((i, j))
    return tuple(out)


def solve(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cost: CostMatrix,
    *,
    exact: bool | None = None,
    zero_tol: Number | None = None,
    support_threshold: Number | None = None,
    pivot_budget: int | None = None,
    pivot_seed: int = 0,
) -> Solution:
    """Solve ``min <c, gamma>`` over couplings of ``(mu, nu)``.

    Parameters
    ----------
    exact : bool, optional
        Force the arithmetic backend.  By default rational arithmetic is
        used when the instance is at most 64x64 or when all inputs are
        already exact; larger float instances run in float mode.
    pivot_seed : int
        Permutes the scan order used for tie-breaking.  Any seed yields an
        optimal solution; for instances with a unique optimizer the returned
        coupling is identical across seeds.

    Returns
    -------
    Solution
        Feasible optimal coupling, feasible dual potentials attaining the
        same value, and the zero set of the dual slack.
    """
    m, n = len(mu), len(nu)
    if cost.rows != m or cost.cols != n:
        raise ShapeMismatch(f"cost is {cost.rows}x{cost.cols}, measures are {m} and {n}")
    if m == 0 or n == 0:
        if float(mu.total_mass) != 0.0 or float(nu.total_mass) != 0.0:
            raise MassMismatch("empty side cannot carry mass")
        pots = DualPotentials(q=(0,) * m, r=(0,) * n)
        return Solution(Coupling((m, n), []), pots, 0, 0, (), mu, nu, cost, exact=True)

    if exact is None:
        exact = (m <= 64 and n <= 64) or (mu.is_exact and nu.is_exact and cost.is_exact)

    if exact:
        mu_w = [to_exact(w) for w in mu.weights]
        nu_w = [to_exact(w) for w in nu.weights]
        c = [[to_exact(v) for v in row] for row in cost.entries]
        zero: Number = Fraction(0)
        if sum(mu_w) != sum(nu_w):
            raise MassMismatch(f"total masses differ: {sum(mu_w)} vs {sum(nu_w)}")
    else:
        mu_w = [float(w) for w in mu.weights]
        nu_w = [float(w) for w in nu.weights]
        c = cost.as_float_rows()
        zero = 0.0
        if not masses_close(sum(mu_w), sum(nu_w), exact=False):
            raise MassMismatch(f"total masses differ: {sum(mu_w)} vs {sum(nu_w)}")
        # Absorb float rounding so the network is exactly balanced.
        nu_w[-1] = max(0.0, sum(mu_w) - sum(nu_w[:-1]))

    cf = np.array([[float(v) for v in row] for row in c], dtype=np.float64)
    scale_c = max(1.0, float(np.max(np.abs(cf))))
    screen_tol = 1e-11 * scale_c
    if pivot_budget is None:
        pivot_budget = max(400, 40 * (m + n))
    order_key = None
    if pivot_seed:
        order_key = np.random.default_rng(pivot_seed).permutation(m * n)

    arcs, flow = _northwest_corner(mu_w, nu_w)
    tree = _Tree(m, n, arcs, flow)

    pivots = 0
    while True:
        q, r = tree.potentials(c, zero)
        bland = pivots >= pivot_budget
        entering = _price(c, cf, q, r, m, n, exact, bland, screen_tol, order_key)
        if entering is None:
            break

        cyc = tree.cycle_with(*entering)
        theta = None
        leaving = None
        for pos in range(1, len(cyc), 2):
            arc = cyc[pos]
            f = tree.flow[arc]
            if theta is None or f < theta or (f == theta and arc < leaving):
                theta = f
                leaving = arc
        for pos, arc in enumerate(cyc):
            if pos == 0:
                tree.flow[arc] = theta
            elif pos % 2:
                tree.flow[arc] -= theta
            else:
                tree.flow[arc] += theta
        tree.arcs.discard(leaving)
        tree.arcs.add(entering)
        del tree.flow[leaving]
        tree.rebuild()
        pivots += 1

    q, r = tree.potentials(c, zero)
    total = sum(mu_w, start=zero)
    if exact:
        threshold: Number = 0
    elif support_threshold is not None:
        threshold = support_threshold
    else:
        threshold = SUPPORT_REL_THRESHOLD * float(total)
    entries = [(i, j, f) for (i, j), f in tree.flow.items() if f > threshold]
    coupling = Coupling((m, n), entries)

    primal = sum((c[i][j] * f for i, j, f in entries), start=zero)
    dual = sum((qi * w for qi, w in zip(q, mu_w)), start=zero) + sum(
        (rj * w for rj, w in zip(r, nu_w)), start=zero
    )
    if exact and primal != dual:
        raise RuntimeError("internal error: nonzero duality gap in rational mode")

    if zero_tol is None:
        zero_tol = 0 if exact else ZERO_SET_REL_TOL * cost.max_abs
    z = _zero_pairs(cost, q, r, zero_tol)
    return Solution(
        coupling=coupling,
        potentials=DualPotentials(q=tuple(q), r=tuple(r)),
        primal_value=primal,
        dual_value=dual,
        zero_set=z,
        mu=mu,
        nu=nu,
        cost=cost,
        exact=exact,
    )


def _price(c, cf, q, r, m, n, exact, bland, screen_tol, order_key):
    """Entering-arc selection; ``None`` certifies optimality.

    Float screening proposes candidates cheaply; exact mode confirms each
    candidate and, when the screen is silent, performs the authoritative
    full exact scan (which doubles as Bland's rule after the pivot budget).
    """
    if not bland:
        qf = np.array([float(v) for v in q])
        rf = np.array([float(v) for v in r])
        slack_f = (cf - qf[:, None] - rf[None, :]).reshape(-1)
        while True:
            flat = int(np.argmin(slack_f))
            val = slack_f[flat]
            if val >= -screen_tol:
                break
            if order_key is not None:
                ties = np.flatnonzero(slack_f == val)
                if len(ties) > 1:
                    flat = int(min(ties, key=lambda t: order_key[t]))
            i, j = divmod(flat, n)
            if not exact:
                return (i, j)
            if c[i][j] - q[i] - r[j] < 0:
                return (i, j)
            slack_f[flat] = np.inf  # float mirror lied; mask and retry
    if not exact:
        if not bland:
            return None
        # Bland in float mode: first arc below the screening tolerance.
        qf = np.array([float(v) for v in q])
        rf = np.array([float(v) for v in r])
        slack_f = (cf - qf[:, None] - rf[None, :]).reshape(-1)
        idx = np.arange(m * n) if order_key is None else np.argsort(order_key)
        for flat in idx:
            if slack_f[flat] < -screen_tol:
                return divmod(int(flat), n)
        return None
    # Authoritative exact scan.
    best = None
    for i in range(m):
        qi = q[i]
        ci = c[i]
        for j in range(n):
            s = ci[j] - qi - r[j]
            if s < 0:
                if bland:
                    return (i, j)
                key = order_key[i * n + j] if order_key is not None else i * n + j
                if best is None or s < best[0] or (s == best[0] and key < best[1]):
                    best = (s, key, i, j)
    if best is None:
        return None
    return (best[2], best[3])


def zero_set(solution: Solution, tol: Number | None = None) -> tuple[tuple[int, int], ...]:
    """All pairs whose dual slack ``c - q - r`` is at most ``tol``.

    ``tol`` defaults to 0 in rational mode and to ``1e-9 * max|c|`` in float
    mode.  The result always contains the support of the optimal coupling.
    """
    if tol is None:
        tol = 0 if solution.exact else ZERO_SET_REL_TOL * solution.cost.max_abs
    return _zero_pairs(solution.cost, solution.potentials.q, solution.potentials.r, tol)


def verify_certificate(solution: Solution) -> CertificateReport:
    """Re-derive every optimality condition from scratch.

    Checks marginals, dual feasibility, tightness of the infimal transform,
    complementary slackness and the duality gap, reporting the worst
    violation of each.  Only the stored coupling, potentials, measures and
    costs are consulted, so the report is independent of the solver path.
    """
    c = solution.cost.entries
    m, n = solution.cost.rows, solution.cost.cols
    q, r = solution.potentials.q, solution.potentials.r
    gamma = solution.coupling
    exact = solution.exact
    mass_tol = 0.0 if exact else MARGINAL_ABS_TOL
    checks: list[CertificateCheck] = []

    row_sums: list[Number] = [0] * m
    col_sums: list[Number] = [0] * n
    for i, j, mass in gamma.entries:
        row_sums[i] += mass
        col_sums[j] += mass
    row_dev = max((abs(float(row_sums[i] - solution.mu.weights[i])) for i in range(m)), default=0.0)
    col_dev = max((abs(float(col_sums[j] - solution.nu.weights[j])) for j in range(n)), default=0.0)
    checks.append(CertificateCheck("row_marginals", row_dev <= mass_tol, row_dev))
    checks.append(CertificateCheck("col_marginals", col_dev <= mass_tol, col_dev))

    feas_tol = 0.0 if exact else 1e-9 * max(1.0, solution.cost.max_abs)
    worst = 0.0
    for i in range(m):
        for j in range(n):
            s = float(c[i][j] - q[i] - r[j])
            if -s > worst:
                worst = -s
    checks.append(CertificateCheck("dual_feasibility", worst <= feas_tol, worst))

    tight_dev = 0.0
    for i in range(m):
        if solution.mu.weights[i] > 0 and n:
            best = min(c[i][j] - r[j] for j in range(n))
            tight_dev = max(tight_dev, abs(float(best - q[i])))
    checks.append(CertificateCheck("c_transform_tightness", tight_dev <= feas_tol, tight_dev))

    slack_dev = 0.0
    for i, j, _ in gamma.entries:
        slack_dev = max(slack_dev, abs(float(c[i][j] - q[i] - r[j])))
    cs_tol = 0.0 if exact else ZERO_SET_REL_TOL * max(1.0, solution.cost.max_abs)
    checks.append(CertificateCheck("complementary_slackness", slack_dev <= cs_tol, slack_dev))

    primal = sum((c[i][j] * mass for i, j, mass in gamma.entries), start=0)
    dual = sum(qi * wi for qi, wi in zip(q, solution.mu.weights)) + sum(
        rj * wj for rj, wj in zip(r, solution.nu.weights)
    )
    gap = abs(float(primal - dual))
    gap_tol = 0.0 if exact else GAP_REL_TOL * max(1.0, abs(float(primal)))
    checks.append(CertificateCheck("duality_gap", gap <= gap_tol, gap))

    value_dev = max(abs(float(primal - solution.primal_value)), abs(float(dual - solution.dual_value)))
    checks.append(CertificateCheck("stated_values", value_dev <= gap_tol, value_dev))

    return CertificateReport(tuple(checks))
