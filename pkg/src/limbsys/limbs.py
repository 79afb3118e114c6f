"""Numbered limb systems: decomposition of forest supports and the backward
reconstruction of the unique coupling vanishing outside a system.

A numbered limb system is an ordered list of partial maps, odd limbs mapping
row sites to column sites (graphs) and even limbs the reverse (antigraphs),
together with disjoint index classes ``I_0, I_1, ...`` alternating between
the column and row side, such that ``Dom(f_k) + Ran(f_{k+1})`` lies in
``I_k``.  On a tree every admissible numbering is a depth numbering from some
root, so ``decompose`` roots each component at the node of minimal
eccentricity on the admissible side, which yields the minimum possible number
of limbs; ties go to the lowest site index.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from .errors import Infeasible, MassMismatch, NotAForest
from .measures import (
    Coupling,
    DiscreteMeasure,
    Number,
    PartialMap,
    pushforward_coupling,
)
from .support import Node, SupportGraph, acyclicity_test, connected_components

#: float-mode floor below which a recursion residual counts as negative.
NEGATIVE_TOL = 1e-10


@dataclass(frozen=True)
class NumberedLimbSystem:
    """Limbs ``f_1..f_N`` (1-based) and classes ``I_0..I_N``.

    ``limbs[k-1]`` is ``f_k``: direction ``"XY"`` for odd ``k``, ``"YX"`` for
    even ``k``.  ``classes[k]`` is ``I_k``: column sites for even ``k``, row
    sites for odd ``k``.
    """

    limbs: tuple[PartialMap, ...]
    classes: tuple[frozenset[int], ...]

    def __init__(self, limbs, classes):
        limbs = tuple(limbs)
        classes = tuple(frozenset(c) for c in classes)
        if len(classes) != len(limbs) + 1:
            raise ValueError("need exactly one more class than limbs")
        for k, f in enumerate(limbs, start=1):
            want = "XY" if k % 2 else "YX"
            if f.direction != want:
                raise ValueError(f"limb {k} must have direction {want}")
        object.__setattr__(self, "limbs", limbs)
        object.__setattr__(self, "classes", classes)

    @property
    def n_limbs(self) -> int:
        return len(self.limbs)

    def limb(self, k: int) -> PartialMap:
        """``f_k`` for ``1 <= k <= N``."""
        return self.limbs[k - 1]

    @cached_property
    def relation(self) -> frozenset[tuple[int, int]]:
        """Union of all graph and antigraph edges, in (row, col) convention."""
        out: set[tuple[int, int]] = set()
        for f in self.limbs:
            out |= f.edges
        return frozenset(out)


@dataclass(frozen=True)
class LimbReconstruction:
    """Per-limb couplings and trace measures produced by ``reconstruct``."""

    gammas: tuple[Coupling, ...]
    etas: tuple[DiscreteMeasure, ...]
    total: Coupling

    def gamma(self, k: int) -> Coupling:
        return self.gammas[k - 1]

    def eta(self, k: int) -> DiscreteMeasure:
        return self.etas[k - 1]


@dataclass(frozen=True)
class ValidationItem:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    items: tuple[ValidationItem, ...]

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    def item(self, name: str) -> ValidationItem:
        return next(i for i in self.items if i.name == name)


def decompose(graph: SupportGraph, root_side: str = "y") -> NumberedLimbSystem:
    """Decompose a forest support into a numbered limb system.

    Every tree component is rooted at the node of minimal eccentricity on
    the root side (ties to the lowest index); each node's parent edge joins
    the limb equal to the node's depth.  With ``root_side="y"`` roots sit in
    ``I_0`` and the number of limbs is the maximum rooted depth over
    components, which is the fewest limbs any numbering of this forest can
    have.  ``root_side="x-shifted"`` exhibits the alternative numbering with
    roots in ``I_1`` and an empty first limb.

    Raises
    ------
    NotAForest
        If the graph contains a cycle (the witness travels with the error).
    """
    if root_side not in ("y", "x-shifted"):
        raise ValueError("root_side must be 'y' or 'x-shifted'")
    report = acyclicity_test(graph)
    if not report.is_forest:
        raise NotAForest("support graph contains a cycle", witness_cycle=report.witness_cycle)

    shift = 0 if root_side == "y" else 1
    root_parity = "y" if root_side == "y" else "x"
    assignments: dict[int, list[tuple[int, int]]] = {}
    class_sites: dict[int, set[int]] = {0: set()}
    max_class = 0

    for comp in connected_components(graph):
        root = _min_eccentricity_root(graph, comp, root_parity)
        depth = {root: 0}
        order = [root]
        k = 0
        while k < len(order):
            u = order[k]
            k += 1
            for v in graph.neighbors(u):
                if v not in depth:
                    depth[v] = depth[u] + 1
                    order.append(v)
                    kk = depth[v] + shift
                    # child maps to its parent: X->Y at odd depth+shift, Y->X at even
                    assignments.setdefault(kk, []).append((v[1], u[1]))
        for v, d in depth.items():
            cls = d + shift
            class_sites.setdefault(cls, set()).add(v[1])
            max_class = max(max_class, cls)

    limbs = [
        PartialMap("XY" if k % 2 else "YX", assignments.get(k, []))
        for k in range(1, max_class + 1)
    ]
    classes = [class_sites.get(k, set()) for k in range(max_class + 1)]
    return NumberedLimbSystem(limbs, classes)


def _min_eccentricity_root(graph: SupportGraph, comp: frozenset[Node], parity: str) -> Node:
    """Node of the requested side with minimal tree eccentricity in ``comp``.

    Uses the two-sweep diameter trick, valid on trees: eccentricity of any
    node is its distance to the farther diameter endpoint.
    """
    start = min(comp)
    dist0 = _bfs_dist(graph, start, comp)
    a = _argmax_node(dist0)
    dist_a = _bfs_dist(graph, a, comp)
    b = _argmax_node(dist_a)
    dist_b = _bfs_dist(graph, b, comp)
    candidates = [v for v in comp if v[0] == parity]
    if not candidates:
        raise NotAForest("component has no admissible root side")  # pragma: no cover
    return min(candidates, key=lambda v: (max(dist_a[v], dist_b[v]), v[1]))


def _bfs_dist(graph: SupportGraph, start: Node, comp: frozenset[Node]) -> dict[Node, int]:
    dist = {start: 0}
    order = [start]
    k = 0
    while k < len(order):
        u = order[k]
        k += 1
        for v in graph.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                order.append(v)
    return dist


def _argmax_node(dist: dict[Node, int]) -> Node:
    best = max(dist.values())
    return min(v for v, d in dist.items() if d == best)


def validate(system: NumberedLimbSystem) -> ValidationReport:
    """Mechanically check every defining property of a numbered limb system."""
    items: list[ValidationItem] = []
    limbs, classes = system.limbs, system.classes
    n = len(limbs)

    ok = True
    detail = ""
    for k, f in enumerate(limbs, start=1):
        want = "XY" if k % 2 else "YX"
        if f.direction != want:  # pragma: no cover - constructor enforces it
            ok, detail = False, f"limb {k} has direction {f.direction}"
    items.append(ValidationItem("alternating_directions", ok, detail))

    x_classes = [classes[k] for k in range(1, n + 1, 2)]
    y_classes = [classes[k] for k in range(0, n + 1, 2)]
    items.append(
        ValidationItem(
            "x_classes_disjoint",
            _pairwise_disjoint(x_classes),
            "odd classes share a row site" if not _pairwise_disjoint(x_classes) else "",
        )
    )
    items.append(
        ValidationItem(
            "y_classes_disjoint",
            _pairwise_disjoint(y_classes),
            "even classes share a column site" if not _pairwise_disjoint(y_classes) else "",
        )
    )

    ok = True
    detail = ""
    for k in range(0, n + 1):
        dom = limbs[k - 1].domain if k >= 1 else frozenset()
        ran = limbs[k].range if k < n else frozenset()
        if not (dom | ran) <= classes[k]:
            ok = False
            detail = f"Dom(f_{k}) union Ran(f_{k + 1}) escapes I_{k}"
            break
    items.append(ValidationItem("containment", ok, detail))

    graph_doms = [limbs[k - 1].domain for k in range(1, n + 1, 2)]
    anti_doms = [limbs[k - 1].domain for k in range(2, n + 1, 2)]
    items.append(
        ValidationItem("graph_domains_disjoint", _pairwise_disjoint(graph_doms))
    )
    items.append(
        ValidationItem("antigraph_domains_disjoint", _pairwise_disjoint(anti_doms))
    )

    seen: set[tuple[int, int]] = set()
    overlap = False
    for f in limbs:
        if seen & f.edges:
            overlap = True
            break
        seen |= f.edges
    items.append(
        ValidationItem(
            "limb_edges_disjoint", not overlap, "two limbs share an edge" if overlap else ""
        )
    )

    used_x = {x for f in limbs for x, _ in f.edges}
    used_y = {y for f in limbs for _, y in f.edges}
    cov_x = set().union(*x_classes) if x_classes else set()
    cov_y = set().union(*y_classes) if y_classes else set()
    items.append(
        ValidationItem(
            "classes_cover_used_sites",
            used_x <= cov_x and used_y <= cov_y,
        )
    )
    return ValidationReport(tuple(items))


def _pairwise_disjoint(sets) -> bool:
    seen: set = set()
    for s in sets:
        if seen & s:
            return False
        seen |= s
    return True


def reconstruct(
    system: NumberedLimbSystem,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
) -> LimbReconstruction:
    """Recover the unique coupling of ``(mu, nu)`` vanishing outside the system.

    Works backward from the last limb: the trace measure of limb ``N`` is
    the restriction of the relevant marginal to ``Dom(f_N)``, and each
    earlier limb receives whatever its side's marginal has left after the
    next limb's coupling is subtracted.  A negative residual at any stage
    proves that no nonnegative coupling vanishes outside the system.

    Raises
    ------
    MassMismatch
        If the marginals carry different total mass.
    Infeasible
        If some stage produces a negative weight, or the assembled total
        fails to reproduce the marginals.
    """
    exact = mu.is_exact and nu.is_exact
    if exact:
        if mu.total_mass != nu.total_mass:
            raise MassMismatch("marginals carry different total mass")
    elif abs(float(mu.total_mass) - float(nu.total_mass)) > 1e-9 * max(
        1.0, float(mu.total_mass)
    ):
        raise MassMismatch("marginals carry different total mass")
    neg_floor = 0 if exact else -NEGATIVE_TOL

    m, n = len(mu), len(nu)
    shape = (m, n)
    N = system.n_limbs
    gammas: list[Coupling] = [Coupling(shape, [])] * N
    etas: list[DiscreteMeasure] = [DiscreteMeasure((), ())] * N

    next_gamma: Coupling | None = None
    for k in range(N, 0, -1):
        f = system.limb(k)
        if k % 2:  # graph: trace lives on the row side
            base = mu.weights
            consumed = next_gamma.row_marginal.weights if next_gamma is not None else None
        else:  # antigraph: trace lives on the column side
            base = nu.weights
            consumed = next_gamma.col_marginal.weights if next_gamma is not None else None
        pts: list[int] = []
        wts: list[Number] = []
        for site in sorted(f.domain):
            w = base[site] - (consumed[site] if consumed is not None else 0)
            if w < neg_floor:
                raise Infeasible(
                    f"stage {k}: residual mass {w} at site {site}",
                    stage=k,
                    site=site,
                    deficit=-w,
                )
            if w > 0:
                pts.append(site)
                wts.append(w)
        eta = DiscreteMeasure(pts, wts)
        gamma = pushforward_coupling(f, eta, shape=shape)
        etas[k - 1] = eta
        gammas[k - 1] = gamma
        next_gamma = gamma

    total_entries: dict[tuple[int, int], Number] = {}
    for g in gammas:
        for i, j, mass in g.entries:
            total_entries[(i, j)] = total_entries.get((i, j), 0) + mass
    total = Coupling(shape, total_entries)

    row, col = total.row_marginal.weights, total.col_marginal.weights

    def _off(a: Number, b: Number) -> bool:
        return a != b if exact else abs(float(a) - float(b)) > NEGATIVE_TOL

    for i in range(m):
        if _off(row[i], mu.weights[i]):
            raise Infeasible(
                f"assembled coupling misses row marginal at site {i}",
                stage=0,
                site=i,
                deficit=mu.weights[i] - row[i],
            )
    for j in range(n):
        if _off(col[j], nu.weights[j]):
            raise Infeasible(
                f"assembled coupling misses column marginal at site {j}",
                stage=0,
                site=j,
                deficit=nu.weights[j] - col[j],
            )
    return LimbReconstruction(tuple(gammas), tuple(etas), total)


def uniqueness_check(
    system: NumberedLimbSystem,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    candidate: Coupling,
) -> bool:
    """True iff ``candidate`` is the coupling determined by the system.

    The candidate must vanish outside the system's relation; the theorem
    then says there is at most one such coupling with the given marginals,
    namely the reconstruction, so equality is checked entrywise.
    """
    stray = [e for e in candidate.support if e not in system.relation]
    if stray:
        raise ValueError(f"candidate carries mass outside the system, e.g. at {stray[0]}")
    rec = reconstruct(system, mu, nu)
    if candidate.is_exact and rec.total.is_exact:
        return rec.total.as_dict == candidate.as_dict
    keys = set(rec.total.as_dict) | set(candidate.as_dict)
    return all(
        abs(float(rec.total.mass_at(*k)) - float(candidate.mass_at(*k))) <= NEGATIVE_TOL
        for k in keys
    )


def verify_recursion(
    system: NumberedLimbSystem,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    rec: LimbReconstruction,
) -> float:
    """Independent audit of a reconstruction against the defining equations.

    Re-evaluates, with direct dictionary arithmetic and no shared helpers,
    both the push-forward representation of each ``gamma_k`` and the
    alternating-marginal formula for each ``eta_k``, plus the overall
    marginal identity.  Returns the maximum absolute violation, computed in
    the reconstruction's own arithmetic (an exact 0 in rational mode).
    """
    worst: Number = 0
    N = system.n_limbs
    for k in range(1, N + 1):
        f = system.limb(k)
        fmap = dict(f.assignments)
        eta = {p: w for p, w in zip(rec.eta(k).points, rec.eta(k).weights)}
        gamma = {(i, j): mass for i, j, mass in rec.gamma(k).entries}

        # representation: gamma_k must be eta_k pushed along f_k, exactly
        expected = {}
        for p, w in eta.items():
            if w == 0:
                continue
            pair = (p, fmap[p]) if k % 2 else (fmap[p], p)
            expected[pair] = w
        for pair in set(expected) | set(gamma):
            dev = abs(expected.get(pair, 0) - gamma.get(pair, 0))
            worst = max(worst, dev)

        # alternating marginals: eta_k = (side marginal - next limb's share)|Dom f_k
        consumed: dict[int, Number] = {}
        if k < N:
            for i, j, mass in rec.gamma(k + 1).entries:
                site = i if k % 2 else j
                consumed[site] = consumed.get(site, 0) + mass
        base = mu.weights if k % 2 else nu.weights
        for site in f.domain:
            want = base[site] - consumed.get(site, 0)
            dev = abs(want - eta.get(site, 0))
            worst = max(worst, dev)
        for site in eta:
            if site not in f.domain:
                worst = max(worst, abs(eta[site]))

    # total = sum of limbs and has the prescribed marginals
    acc: dict[tuple[int, int], Number] = {}
    for k in range(1, N + 1):
        for i, j, mass in rec.gamma(k).entries:
            acc[(i, j)] = acc.get((i, j), 0) + mass
    for pair in set(acc) | set(rec.total.as_dict):
        worst = max(worst, abs(acc.get(pair, 0) - rec.total.mass_at(*pair)))
    rows: list[Number] = [0] * len(mu)
    cols: list[Number] = [0] * len(nu)
    for (i, j), mass in acc.items():
        rows[i] += mass
        cols[j] += mass
    for i, w in enumerate(mu.weights):
        worst = max(worst, abs(rows[i] - w))
    for j, w in enumerate(nu.weights):
        worst = max(worst, abs(cols[j] - w))
    return worst
