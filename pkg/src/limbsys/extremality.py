"""Extremality certificates for couplings in their transportation polytope.

Three routes, deliberately independent of each other:

* ``forest_certificate`` — graph-theoretic: extreme iff the support graph is
  acyclic, with an explicit alternating perturbation as counterexample.
* ``rank_certificate`` — linear-algebraic: extreme iff the evaluation map
  ``(u, v) -> (u_i + v_j)`` restricted to the support has full rank, computed
  by exact Gaussian elimination.
* ``brute_force_oracle`` — enumerative: all vertices of the polytope are
  listed by walking the basis graph; extreme iff the coupling is one of them.

A negative verdict always ships a constructive witness: two distinct
couplings with the same marginals averaging to the input.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import gcd

from .errors import TooLarge
from .measures import Coupling, Number, to_exact
from .support import build_support_graph, acyclicity_test, connected_components

#: Default cell-count cap for the enumeration oracle.
BRUTE_FORCE_MAX_CELLS = 36


@dataclass(frozen=True)
class MethodVerdict:
    """Single method's answer plus its evidence."""

    method: str
    extremal: bool
    witness: tuple[Coupling, Coupling] | None = None
    witness_cycle: tuple[int, ...] | None = None
    rank: int | None = None
    deficit: int | None = None
    n_vertices: int | None = None


@dataclass(frozen=True)
class ExtremalityVerdict:
    """Aggregate of the requested methods; ``agree`` covers all of them."""

    verdicts: tuple[MethodVerdict, ...]
    agree: bool
    extremal: bool

    def by_method(self, name: str) -> MethodVerdict:
        return next(v for v in self.verdicts if v.method == name)


def check_extremality(coupling: Coupling, methods=("forest", "rank"), max_size: int = BRUTE_FORCE_MAX_CELLS) -> ExtremalityVerdict:
    """Run the requested certificates and report whether they agree."""
    runners = {
        "forest": forest_certificate,
        "rank": rank_certificate,
        "brute": lambda c: brute_force_oracle(c, max_size=max_size),
    }
    verdicts = tuple(runners[m](coupling) for m in methods)
    answers = {v.extremal for v in verdicts}
    return ExtremalityVerdict(verdicts, agree=len(answers) == 1, extremal=verdicts[0].extremal)


def forest_certificate(coupling: Coupling) -> MethodVerdict:
    """Extremal iff the support graph is a forest.

    A cycle permits mass to circulate: alternately adding and removing half
    the minimum cycle mass produces two distinct couplings with the same
    marginals whose average is the input, disproving extremality
    constructively.
    """
    report = acyclicity_test(build_support_graph(coupling))
    if report.is_forest:
        return MethodVerdict("forest", True)
    cyc = report.witness_cycle
    assert cyc is not None
    k = len(cyc) // 2
    edges_plus = []  # (x_t, y_t)
    edges_minus = []  # (x_{t+1}, y_t)
    for t in range(k):
        x, y = cyc[2 * t], cyc[2 * t + 1]
        x_next = cyc[(2 * t + 2) % (2 * k)]
        edges_plus.append((x, y))
        edges_minus.append((x_next, y))
    eps = _half(min(coupling.mass_at(i, j) for i, j in edges_plus + edges_minus))
    gamma0, gamma1 = _perturb(coupling, edges_plus, edges_minus, eps)
    return MethodVerdict("forest", False, witness=(gamma0, gamma1), witness_cycle=cyc)


def _half(mass: Number) -> Number:
    return mass / 2.0 if isinstance(mass, float) else Fraction(mass) / 2


def _perturb(coupling: Coupling, plus, minus, eps) -> tuple[Coupling, Coupling]:
    d0 = dict(coupling.as_dict)
    d1 = dict(coupling.as_dict)
    for e in plus:
        d0[e] = d0[e] + eps
        d1[e] = d1[e] - eps
    for e in minus:
        d0[e] = d0[e] - eps
        d1[e] = d1[e] + eps
    return Coupling(coupling.shape, d0), Coupling(coupling.shape, d1)


def rank_certificate(coupling: Coupling) -> MethodVerdict:
    """Douglas-Lindenstrauss style rank test, discrete form.

    Builds the ``|support| x (rows + cols)`` matrix of the evaluation map
    ``(u, v) -> (u_i + v_j)`` over the support and computes its rank by exact
    fraction-free elimination.  Extremal iff the rank equals the support
    size; a row dependency is a circulation and yields the witness pair.
    """
    support = coupling.support
    s = len(support)
    if s == 0:
        return MethodVerdict("rank", True, rank=0, deficit=0)
    m, n = coupling.shape
    mat = [[Fraction(0)] * (m + n) for _ in range(s)]
    for row, (i, j) in enumerate(support):
        mat[row][i] = Fraction(1)
        mat[row][m + j] = Fraction(1)
    rank, dependency = _rank_with_dependency(mat)
    deficit = s - rank
    if deficit == 0:
        return MethodVerdict("rank", True, rank=rank, deficit=0)
    # dependency: nonzero lambda with sum of lambda_e * (row of e) = 0, i.e. a
    # circulation on the support; scale it so both perturbations stay >= 0.
    circulation = {support[e]: lam for e, lam in enumerate(dependency) if lam != 0}
    eps = _half(min(coupling.mass_at(i, j) / abs(lam) for (i, j), lam in circulation.items()))
    d0 = dict(coupling.as_dict)
    d1 = dict(coupling.as_dict)
    for e, lam in circulation.items():
        d0[e] = d0[e] + eps * lam
        d1[e] = d1[e] - eps * lam
    gamma0, gamma1 = Coupling(coupling.shape, d0), Coupling(coupling.shape, d1)
    return MethodVerdict("rank", False, witness=(gamma0, gamma1), rank=rank, deficit=deficit)


def _rank_with_dependency(mat: list[list[Fraction]]) -> tuple[int, list[Fraction] | None]:
    """Gaussian elimination over the rationals, tracking row operations.

    Returns the rank and, when rows are dependent, the coefficients of one
    vanishing combination of the original rows.
    """
    rows = len(mat)
    cols = len(mat[0])
    # augment with identity to recover the combination
    work = [list(r) + [Fraction(int(t == idx)) for t in range(rows)] for idx, r in enumerate(mat)]
    rank = 0
    for col in range(cols):
        pivot = None
        for r in range(rank, rows):
            if work[r][col] != 0:
                pivot = r
                break
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        pr = work[rank]
        inv = 1 / pr[col]
        for t in range(col, cols + rows):
            pr[t] *= inv
        for r in range(rows):
            if r != rank and work[r][col] != 0:
                f = work[r][col]
                wr = work[r]
                for t in range(col, cols + rows):
                    wr[t] -= f * pr[t]
        rank += 1
        if rank == rows:
            break
    if rank == rows:
        return rank, None
    # any zeroed row exposes a dependency among the original rows
    for r in range(rows):
        if all(work[r][t] == 0 for t in range(cols)):
            return rank, work[r][cols:]
    raise RuntimeError("internal error: deficient matrix without zero row")  # pragma: no cover


def brute_force_oracle(coupling: Coupling, max_size: int = BRUTE_FORCE_MAX_CELLS) -> MethodVerdict:
    """Membership test against the full vertex list of the polytope.

    Only available in rational mode and for at most ``max_size`` cells.
    Float masses are converted through their exact binary values first.
    """
    m, n = coupling.shape
    if m * n > max_size:
        raise TooLarge(f"{m}x{n} exceeds the {max_size}-cell brute-force bound")
    gamma = coupling.to_exact()
    mu = [to_exact(w) for w in gamma.row_marginal.weights]
    nu = [to_exact(w) for w in gamma.col_marginal.weights]
    vertices = enumerate_vertices(mu, nu)
    target = gamma.as_dict
    hit = any(v == target for v in vertices)
    if hit:
        return MethodVerdict("brute", True, n_vertices=len(vertices))
    witness = _witness_from_cycle(gamma)
    return MethodVerdict("brute", False, witness=witness, n_vertices=len(vertices))


def _witness_from_cycle(gamma: Coupling) -> tuple[Coupling, Coupling]:
    """Self-contained cycle search on the support (kept separate from the
    forest certificate so the oracle's evidence does not depend on it).

    Prunes leaves until only the 2-core remains, then walks it greedily;
    the first repeated node closes a simple cycle.
    """
    adj: dict[tuple[str, int], set[tuple[str, int]]] = {}
    for i, j in gamma.support:
        adj.setdefault(("x", i), set()).add(("y", j))
        adj.setdefault(("y", j), set()).add(("x", i))
    leaves = [u for u, nb in adj.items() if len(nb) <= 1]
    while leaves:
        u = leaves.pop()
        for v in adj.pop(u, ()):  # may already be gone
            adj[v].discard(u)
            if len(adj[v]) == 1:
                leaves.append(v)
    assert adj, "non-vertex coupling must contain a support cycle"
    start = min(adj)
    path = [start]
    index = {start: 0}
    prev = None
    while True:
        u = path[-1]
        v = min(w for w in adj[u] if w != prev)
        if v in index:
            cycle_nodes = path[index[v]:]
            break
        index[v] = len(path)
        path.append(v)
        prev = u
    if cycle_nodes[0][0] == "y":
        cycle_nodes = cycle_nodes[1:] + cycle_nodes[:1]
    flat = [idx for _, idx in cycle_nodes]
    k = len(flat) // 2
    plus = [(flat[2 * t], flat[2 * t + 1]) for t in range(k)]
    minus = [(flat[(2 * t + 2) % (2 * k)], flat[2 * t + 1]) for t in range(k)]
    eps = _half(min(gamma.mass_at(i, j) for i, j in plus + minus))
    return _perturb(gamma, plus, minus, eps)


def enumerate_vertices(mu: list[Fraction], nu: list[Fraction]) -> list[dict]:
    """All vertices of the transportation polytope of ``(mu, nu)``.

    Scales the masses to integers, walks the graph of feasible spanning-tree
    bases by single pivots (visiting every leaving-arc choice so degenerate
    vertices are fully explored), and deduplicates vertices by their
    canonical sparse form.  Bases travel as bitmasks over the cells and
    flows as integer lists, so the walk costs no rational arithmetic.
    Returns couplings as entry dictionaries with ``Fraction`` masses.
    """
    if sum(mu) != sum(nu):
        raise ValueError("vertex enumeration requires balanced marginals")
    rows = [i for i, w in enumerate(mu) if w > 0]
    cols = [j for j, w in enumerate(nu) if w > 0]
    if not rows or not cols:
        return [{}]
    denom = reduce(lambda acc, f: acc * f.denominator // gcd(acc, f.denominator), [*mu, *nu], 1)
    a = [int(mu[i] * denom) for i in rows]
    b = [int(nu[j] * denom) for j in cols]
    m, n = len(a), len(b)
    size = m + n
    cells = m * n

    basis0, flow0 = _nw_corner_int(a, b)
    seen_bases = {basis0}
    stack = [(basis0, flow0)]
    vertices: dict[tuple, dict] = {}
    parent = [0] * size
    depth = [0] * size
    order = [0] * size
    adj: list[list[int]] = [[] for _ in range(size)]

    while stack:
        basis, flows = stack.pop()
        if flows not in vertices:
            vertices[flows] = {
                (rows[e // n], cols[e % n]): Fraction(flows[e], denom)
                for e in range(cells)
                if flows[e] > 0
            }
        # tree structure for this basis, rooted at column node m
        for lst in adj:
            lst.clear()
        bits = basis
        while bits:
            low = bits & -bits
            e = low.bit_length() - 1
            bits ^= low
            i, j = divmod(e, n)
            adj[i].append(m + j)
            adj[m + j].append(i)
        for v in range(size):
            parent[v] = -2
        parent[m] = -1
        depth[m] = 0
        order[0] = m
        fill = 1
        k = 0
        while k < fill:
            u = order[k]
            k += 1
            du = depth[u]
            for v in adj[u]:
                if parent[v] == -2:
                    parent[v] = u
                    depth[v] = du + 1
                    order[fill] = v
                    fill += 1
        for e in range(cells):
            if basis >> e & 1:
                continue
            i, j = divmod(e, n)
            cyc = _cycle_arcs(parent, depth, m, n, i, j)
            theta = min(flows[cyc[p]] for p in range(1, len(cyc), 2))
            for p in range(1, len(cyc), 2):
                if flows[cyc[p]] != theta:
                    continue
                nb = basis ^ (1 << cyc[p]) | (1 << e)
                if nb in seen_bases:
                    continue
                seen_bases.add(nb)
                nf = list(flows)
                nf[e] = theta
                for pos in range(1, len(cyc)):
                    if pos % 2:
                        nf[cyc[pos]] -= theta
                    else:
                        nf[cyc[pos]] += theta
                stack.append((nb, tuple(nf)))
    return list(vertices.values())


def _nw_corner_int(a: list[int], b: list[int]) -> tuple[int, tuple[int, ...]]:
    m, n = len(a), len(b)
    ra, rb = list(a), list(b)
    basis = 0
    flow = [0] * (m * n)
    i = j = 0
    while True:
        t = min(ra[i], rb[j])
        basis |= 1 << (i * n + j)
        flow[i * n + j] = t
        ra[i] -= t
        rb[j] -= t
        if i == m - 1 and j == n - 1:
            break
        if ra[i] == 0 and i < m - 1:
            i += 1
        else:
            j += 1
    return basis, tuple(flow)


def _cycle_arcs(parent, depth, m: int, n: int, i: int, j: int) -> list[int]:
    """Flat cell indices of the cycle closed by cell ``(i, j)``; alternating
    gain/donate starting with the entering cell."""
    u, v = i, m + j
    path_u, path_v = [u], [v]
    while depth[u] > depth[v]:
        u = parent[u]
        path_u.append(u)
    while depth[v] > depth[u]:
        v = parent[v]
        path_v.append(v)
    while u != v:
        u = parent[u]
        v = parent[v]
        path_u.append(u)
        path_v.append(v)
    nodes = path_u + list(reversed(path_v[:-1]))
    arcs = [i * n + j]
    prev = nodes[0]
    for b in nodes[1:]:
        arcs.append(prev * n + b - m if prev < m else b * n + prev - m)
        prev = b
    return arcs
