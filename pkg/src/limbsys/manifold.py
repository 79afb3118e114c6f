"""Gridded one-dimensional manifolds, cost functions, twist/subtwist
certification, marked points, and the circular-town demonstration.

The twist conditions are certified by a per-pair census of discrete critical
points of ``x -> c(x, y1) - c(x, y2)``.  Sites are grouped into maximal runs
of equal value (so an exact two-site tie at an extremum counts once, as a
flagged plateau rather than two extrema); a run is a local minimum when both
neighboring runs are larger, symmetrically for maxima.  Runs of three or
more equal sites mark the pair as degenerate: the grid is too coarse to
classify it.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import MassMismatch
from .kantorovich import Solution, solve
from .limbs import NumberedLimbSystem, ValidationReport, decompose, reconstruct, validate
from .measures import CostMatrix, Coupling, DiscreteMeasure, Number, PartialMap, to_exact
from .support import build_support_graph
from . import serialize

#: Fraction of the density maximum below which demo densities are clipped.
DENSITY_FLOOR_REL = 1e-12
#: Relative tolerance (times max |c|) for float-mode marked-point detection.
MARKED_REL_TOL = 1e-9


@dataclass(frozen=True)
class GridManifold:
    """Uniform grid on the circle of circumference ``2*pi`` or on ``[0, 1]``."""

    kind: str
    n: int

    def __init__(self, kind: str, n: int):
        if kind not in ("circle", "interval"):
            raise ValueError("kind must be 'circle' or 'interval'")
        if n < 2 or (kind == "interval" and n < 2):
            raise ValueError("need at least two grid sites")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "n", n)

    @cached_property
    def coords(self) -> tuple[float, ...]:
        if self.kind == "circle":
            return tuple(2.0 * math.pi * i / self.n for i in range(self.n))
        return tuple(i / (self.n - 1) for i in range(self.n))

    @property
    def wraps(self) -> bool:
        return self.kind == "circle"


@dataclass(frozen=True)
class CostFunction:
    """Closed-form cost ``c(x, y)`` evaluated on grid coordinates."""

    name: str
    fn: Callable[[float, float], float]

    def __call__(self, x: float, y: float) -> float:
        return self.fn(x, y)


COST_LIBRARY = {
    "circle_cos": CostFunction("circle_cos", lambda x, y: 1.0 - math.cos(x - y)),
    "quadratic": CostFunction("quadratic", lambda x, y: 0.5 * (x - y) ** 2),
    "negative_product": CostFunction("negative_product", lambda x, y: -x * y),
    "constant": CostFunction("constant", lambda x, y: 0.0),
}


def cost_by_name(name: str) -> CostFunction:
    try:
        return COST_LIBRARY[name]
    except KeyError:
        raise ValueError(f"unknown cost {name!r}; known: {sorted(COST_LIBRARY)}") from None


def cost_matrix(x_grid: GridManifold, y_grid: GridManifold, cost: CostFunction) -> CostMatrix:
    return CostMatrix(
        [[cost(x, y) for y in y_grid.coords] for x in x_grid.coords]
    )


@dataclass(frozen=True)
class PairCensus:
    """Critical-point census of one difference function ``c(., y1) - c(., y2)``."""

    interior_minima: int
    interior_maxima: int
    plateaus: int
    endpoint_minima: int
    endpoint_maxima: int
    degenerate: bool
    constant: bool
    subtwist_ok: bool
    argmin_site: int
    argmax_site: int


@dataclass(frozen=True)
class TwistReport:
    """Per-pair census plus the resulting classification.

    ``classification`` is ``"twisted"`` when no pair has interior critical
    points, ``"subtwisted"`` when every pair has at most one interior
    minimum run and one interior maximum run, each globally extremal, and
    ``"neither"`` otherwise (including whenever any pair is degenerate).
    """

    kind: str
    n: int
    cost_name: str
    classification: str
    census: dict[tuple[int, int], PairCensus]
    degenerate_pairs: tuple[tuple[int, int], ...]

    def pair(self, y1: int, y2: int) -> PairCensus:
        return self.census[(y1, y2)]


def twist_census(manifold: GridManifold, cost: CostFunction | CostMatrix) -> TwistReport:
    """Census of discrete critical points for every ordered pair ``y1 != y2``.

    On the circle the neighbor relation wraps; on the interval the two
    boundary sites are excluded from interior counts and reported
    separately.  A vectorized strict-comparison pass handles tie-free pairs;
    pairs containing equal adjacent values fall back to an exact
    run-collapsing scan.
    """
    n = manifold.n
    if n < 4:
        raise ValueError("twist census needs a grid of at least 4 sites")
    if isinstance(cost, CostMatrix):
        if cost.rows != n or cost.cols != n:
            raise ValueError("cost matrix does not match the grid")
        cmat = np.array(cost.as_float_rows())
        cost_name = "matrix"
    else:
        cmat = np.array(cost_matrix(manifold, manifold, cost).as_float_rows())
        cost_name = cost.name

    census: dict[tuple[int, int], PairCensus] = {}
    for y1 in range(n):
        diff = cmat[:, [y1]] - cmat  # column y2 holds c(., y1) - c(., y2)
        if manifold.wraps:
            up = np.roll(diff, 1, axis=0)  # value at the previous site
            down = np.roll(diff, -1, axis=0)
            down2 = np.roll(diff, -2, axis=0)
            eq = diff == down
            # runs of equal values are collapsed: a two-site tie counts as a
            # single extremum at its lower end, and is reported as a plateau
            strict_min = (diff < up) & (diff < down)
            strict_max = (diff > up) & (diff > down)
            tie_min = eq & (diff < up) & (down < down2)
            tie_max = eq & (diff > up) & (down > down2)
            long_run = (eq & np.roll(eq, -1, axis=0)).any(axis=0)
            n_min = strict_min.sum(axis=0) + tie_min.sum(axis=0)
            n_max = strict_max.sum(axis=0) + tie_max.sum(axis=0)
            n_plat = eq.sum(axis=0)
            first_min = diff.argmin(axis=0)
            first_max = diff.argmax(axis=0)
            for y2 in range(n):
                if y2 == y1:
                    continue
                if long_run[y2]:
                    census[(y1, y2)] = _censr(list(diff[:, y2]), wraps=True)
                else:
                    # circle column with runs <= 2: min and max runs
                    # alternate around the cycle, so counts (1, 1) already
                    # imply both extrema are global.
                    census[(y1, y2)] = PairCensus(
                        interior_minima=int(n_min[y2]),
                        interior_maxima=int(n_max[y2]),
                        plateaus=int(n_plat[y2]),
                        endpoint_minima=0,
                        endpoint_maxima=0,
                        degenerate=False,
                        constant=False,
                        subtwist_ok=n_min[y2] == 1 and n_max[y2] == 1,
                        argmin_site=int(first_min[y2]),
                        argmax_site=int(first_max[y2]),
                    )
        else:
            for y2 in range(n):
                if y2 == y1:
                    continue
                census[(y1, y2)] = _censr(list(diff[:, y2]), wraps=False)

    degenerate_pairs = tuple(sorted(p for p, c in census.items() if c.degenerate))
    if degenerate_pairs:
        classification = "neither"
    elif all(c.interior_minima == 0 and c.interior_maxima == 0 for c in census.values()):
        classification = "twisted"
    elif all(c.subtwist_ok for c in census.values()):
        classification = "subtwisted"
    else:
        classification = "neither"
    return TwistReport(
        kind=manifold.kind,
        n=n,
        cost_name=cost_name,
        classification=classification,
        census=census,
        degenerate_pairs=degenerate_pairs,
    )


def _censr(v: list[float], wraps: bool) -> PairCensus:
    """Run-collapsing census of one difference function."""
    n = len(v)
    if all(x == v[0] for x in v):
        return PairCensus(0, 0, 1, 0, 0, True, True, False, 0, 0)
    runs: list[list[int]] = []
    if wraps:
        start = next(i for i in range(n) if v[i] != v[i - 1])
        cur = [start]
        for t in range(1, n):
            i = (start + t) % n
            if v[i] == v[cur[-1]]:
                cur.append(i)
            else:
                runs.append(cur)
                cur = [i]
        runs.append(cur)
    else:
        cur = [0]
        for i in range(1, n):
            if v[i] == v[cur[-1]]:
                cur.append(i)
            else:
                runs.append(cur)
                cur = [i]
        runs.append(cur)

    k = len(runs)
    int_min = int_max = end_min = end_max = plateaus = 0
    degenerate = False
    min_runs: list[int] = []
    max_runs: list[int] = []
    for t, run in enumerate(runs):
        val = v[run[0]]
        if len(run) >= 2:
            plateaus += 1
        if len(run) >= 3:
            degenerate = True
        if wraps:
            left = v[runs[t - 1][0]]
            right = v[runs[(t + 1) % k][0]]
            if val < left and val < right:
                int_min += 1
                min_runs.append(t)
            elif val > left and val > right:
                int_max += 1
                max_runs.append(t)
        else:
            if t == 0 or t == k - 1:
                other = v[runs[1][0]] if t == 0 else v[runs[k - 2][0]]
                if val < other:
                    end_min += 1
                else:
                    end_max += 1
                continue
            left, right = v[runs[t - 1][0]], v[runs[t + 1][0]]
            if val < left and val < right:
                int_min += 1
                min_runs.append(t)
            elif val > left and val > right:
                int_max += 1
                max_runs.append(t)

    gmin, gmax = min(v), max(v)
    ok = int_min <= 1 and int_max <= 1
    if ok and int_min == 1:
        t = min_runs[0]
        ok = v[runs[t][0]] == gmin and all(
            v[r[0]] > gmin for s, r in enumerate(runs) if s != t
        )
    if ok and int_max == 1:
        t = max_runs[0]
        ok = v[runs[t][0]] == gmax and all(
            v[r[0]] < gmax for s, r in enumerate(runs) if s != t
        )
    argmin_site = min(min((r for r in runs if v[r[0]] == gmin), key=lambda r: r[0]))
    argmax_site = min(min((r for r in runs if v[r[0]] == gmax), key=lambda r: r[0]))
    return PairCensus(
        interior_minima=int_min,
        interior_maxima=int_max,
        plateaus=plateaus,
        endpoint_minima=end_min,
        endpoint_maxima=end_max,
        degenerate=degenerate,
        constant=False,
        subtwist_ok=ok and not degenerate,
        argmin_site=argmin_site,
        argmax_site=argmax_site,
    )


def cross_difference(cost: CostFunction, x: float, y: float, xp: float, yp: float) -> float:
    """``c(x,y) + c(x',y') - c(x,y') - c(x',y)`` on coordinates."""
    return cost(x, y) + cost(xp, yp) - cost(x, yp) - cost(xp, y)


def cross_difference_entries(cost: CostMatrix, i: int, j: int, ip: int, jp: int) -> Number:
    """Cross-difference evaluated on matrix entries (index form)."""
    c = cost.entries
    return c[i][j] + c[ip][jp] - c[i][jp] - c[ip][j]


def h_values(solution: Solution, cost: CostMatrix | None = None) -> dict[tuple[int, int], Number]:
    """Marked-point function on the zero set.

    For ``(x1, y1)`` in the zero set, ``h`` is the infimum of the
    cross-difference ``D(x1, y1, x, y2)`` over all grid sites ``x`` and all
    ``y2`` that are zero-set partners of ``x1``; taking ``y2 = y1`` shows
    ``h <= 0`` everywhere.  In rational mode the arithmetic is exact.
    """
    cost = cost if cost is not None else solution.cost
    if solution.exact:
        c = [[to_exact(v) for v in row] for row in cost.entries]
    else:
        c = cost.entries
    m = cost.rows
    fibers = solution.zero_set_fibers
    # best[(y1, y2)] = max over x of c[x][y1] - c[x][y2]
    best: dict[tuple[int, int], Number] = {}
    out: dict[tuple[int, int], Number] = {}
    for x1, y1 in solution.zero_set:
        h = None
        for y2 in fibers[x1]:
            key = (y1, y2)
            if key not in best:
                best[key] = max(c[x][y1] - c[x][y2] for x in range(m))
            val = (c[x1][y1] - c[x1][y2]) - best[key]
            if h is None or val < h:
                h = val
        out[(x1, y1)] = h
    return out


def marked_points(
    solution: Solution,
    cost: CostMatrix | None = None,
    tol: Number | None = None,
) -> tuple[tuple[int, int], ...]:
    """Zero-set points where the marked-point function vanishes.

    These are the points admitting no better-placed competitor, and they
    select the graph side of the two-limb split of the zero set.
    """
    if tol is None:
        tol = 0 if solution.exact else MARKED_REL_TOL * (cost or solution.cost).max_abs
    hs = h_values(solution, cost)
    return tuple(sorted(p for p, h in hs.items() if h >= -tol))


@dataclass(frozen=True)
class MarkedSplit:
    """Two-limb split of a support with the graph side chosen by marking."""

    system: NumberedLimbSystem | None
    validation: ValidationReport | None
    graph_edges: tuple[tuple[int, int], ...]
    antigraph_edges: tuple[tuple[int, int], ...]
    ambiguous_sites: tuple[int, ...]
    valid: bool
    reconstruction_matches: bool


def marked_limb_split(solution: Solution, marked: tuple[tuple[int, int], ...] | None = None) -> MarkedSplit:
    """Split the optimal support into graph and antigraph by marked points.

    Support edges at marked zero-set points form the first limb (one per
    row site; a row with two marked edges is reported as ambiguous and the
    lowest column wins), the remainder the second.  The split is validated
    mechanically and, when valid, the backward reconstruction from the split
    is compared against the solver's coupling: agreement certifies that the
    coupling is the unique one vanishing outside the split.
    """
    if marked is None:
        marked = marked_points(solution)
    marked_set = set(marked)
    support = solution.coupling.support
    f1: dict[int, int] = {}
    ambiguous: list[int] = []
    rest: list[tuple[int, int]] = []
    for i, j in support:
        if (i, j) in marked_set:
            if i in f1:
                ambiguous.append(i)
                rest.append((i, max(j, f1[i])))
                f1[i] = min(j, f1[i])
            else:
                f1[i] = j
        else:
            rest.append((i, j))
    f2: dict[int, int] = {}
    valid = True
    for i, j in rest:
        if j in f2:
            valid = False
            break
        f2[j] = i
    graph_edges = tuple(sorted(f1.items()))
    anti_edges = tuple(sorted((i, j) for j, i in f2.items()))
    if not valid:
        return MarkedSplit(None, None, graph_edges, anti_edges, tuple(ambiguous), False, False)

    touched_y = {j for _, j in support}
    touched_x = {i for i, _ in support}
    if f2:
        limbs = [PartialMap("XY", f1), PartialMap("YX", f2)]
        classes = [touched_y - set(f2), touched_x, set(f2)]
    else:
        limbs = [PartialMap("XY", f1)]
        classes = [touched_y, touched_x]
    system = NumberedLimbSystem(limbs, classes)
    report = validate(system)
    matches = False
    if report.passed:
        try:
            rec = reconstruct(system, solution.mu, solution.nu)
            if solution.exact:
                matches = rec.total.as_dict == solution.coupling.as_dict
            else:
                keys = set(rec.total.as_dict) | set(solution.coupling.as_dict)
                matches = all(
                    abs(float(rec.total.mass_at(*k)) - float(solution.coupling.mass_at(*k)))
                    <= 1e-9 * max(1.0, float(solution.coupling.total_mass))
                    for k in keys
                )
        except MassMismatch:
            matches = False
        except Exception:
            matches = False
    return MarkedSplit(
        system=system,
        validation=report,
        graph_edges=graph_edges,
        antigraph_edges=anti_edges,
        ambiguous_sites=tuple(ambiguous),
        valid=report.passed,
        reconstruction_matches=matches,
    )


def circular_distance(a: float, b: float) -> float:
    d = abs(a - b) % (2.0 * math.pi)
    return min(d, 2.0 * math.pi - d)


def peaked_density(grid: GridManifold, center: float, sharpness: float) -> DiscreteMeasure:
    """Smooth non-vanishing density peaked at ``center``, exactly normalized.

    Weights are proportional to ``exp(sharpness * cos(theta - center))`` on
    the circle (a von Mises bump) and to the same formula through the chart
    ``x -> 2*pi*x`` on the interval.  Values are clipped below at 1e-12 of
    the maximum and normalized in exact arithmetic so the total mass is
    exactly 1.
    """
    raw = []
    for x in grid.coords:
        t = x if grid.kind == "circle" else 2.0 * math.pi * x
        raw.append(math.exp(sharpness * math.cos(t - center)))
    floor = DENSITY_FLOOR_REL * max(raw)
    raw = [max(w, floor) for w in raw]
    exact = [Fraction(w) for w in raw]
    total = sum(exact)
    return DiscreteMeasure(range(grid.n), [w / total for w in exact])


@dataclass(frozen=True)
class CircleDemoReport:
    """Everything the circular-town pipeline measured, plus artifact paths."""

    n: int
    kappa: float
    exact: bool
    solution: Solution
    limb_count: int
    system: NumberedLimbSystem
    marked: tuple[tuple[int, int], ...]
    split: MarkedSplit
    split_agrees_with_decompose: bool
    max_fiber_size: int
    t_plus: dict[int, int]
    t_minus: dict[int, int]
    cross_lake_mass: Number
    pivot_stable: bool
    files: tuple[str, ...]


def circle_demo(
    n: int,
    peak_sharpness: float = 4.0,
    *,
    exact: bool | None = True,
    out_dir: str | None = None,
    perturbed_solves: int = 2,
) -> CircleDemoReport:
    """Full pipeline on the circular town: peaked densities at the north and
    south poles, angular-cosine cost, solve/decompose/mark/report.

    ``t_plus`` collects support pairs moving mass by less than a quarter
    turn, ``t_minus`` the rest ("across the lake"); ``cross_lake_mass`` is
    the mass leaving the northern half-circle for the southern one.
    """
    if n < 16:
        raise ValueError("circle demo needs n >= 16")
    grid = GridManifold("circle", n)
    cost = cost_matrix(grid, grid, COST_LIBRARY["circle_cos"])
    mu = peaked_density(grid, math.pi / 2, peak_sharpness)
    nu = peaked_density(grid, 3 * math.pi / 2, peak_sharpness)
    sol = solve(mu, nu, cost, exact=exact)

    graph = build_support_graph(sol.coupling)
    system = decompose(graph)
    marked = marked_points(sol)
    split = marked_limb_split(sol, marked)
    agree = split.valid and split.system is not None and set(split.graph_edges) == set(
        system.limb(1).edges if system.n_limbs >= 1 else ()
    )

    fibers: dict[int, list[int]] = {}
    for i, j in sol.coupling.support:
        fibers.setdefault(i, []).append(j)
    max_fiber = max((len(v) for v in fibers.values()), default=0)
    coords = grid.coords
    t_plus: dict[int, int] = {}
    t_minus: dict[int, int] = {}
    for i, js in fibers.items():
        for j in js:
            if circular_distance(coords[i], coords[j]) <= math.pi / 2:
                t_plus[i] = j
            else:
                t_minus[i] = j

    north = {i for i in range(n) if circular_distance(coords[i], math.pi / 2) <= math.pi / 2}
    south = {j for j in range(n) if circular_distance(coords[j], 3 * math.pi / 2) <= math.pi / 2}
    cross = sum(
        (mass for i, j, mass in sol.coupling.entries if i in north and j in south),
        start=Fraction(0) if sol.exact else 0.0,
    )

    stable = True
    for seed in range(1, perturbed_solves + 1):
        alt = solve(mu, nu, cost, exact=exact, pivot_seed=seed)
        if alt.coupling.as_dict != sol.coupling.as_dict:
            stable = False
            break

    files: tuple[str, ...] = ()
    if out_dir is not None:
        files = _write_demo_artifacts(out_dir, grid, sol, system, split)

    return CircleDemoReport(
        n=n,
        kappa=peak_sharpness,
        exact=sol.exact,
        solution=sol,
        limb_count=system.n_limbs,
        system=system,
        marked=marked,
        split=split,
        split_agrees_with_decompose=agree,
        max_fiber_size=max_fiber,
        t_plus=t_plus,
        t_minus=t_minus,
        cross_lake_mass=cross,
        pivot_stable=stable,
        files=files,
    )


def _write_demo_artifacts(out_dir, grid, sol, system, split) -> tuple[str, ...]:
    os.makedirs(out_dir, exist_ok=True)
    coords = grid.coords
    paths = []

    path = os.path.join(out_dir, "support.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "phi", "mass"])
        for i, j, mass in sol.coupling.entries:
            w.writerow([repr(coords[i]), repr(coords[j]), repr(float(mass))])
    paths.append(path)

    path = os.path.join(out_dir, "potentials.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["site", "theta", "q", "r"])
        for i in range(grid.n):
            w.writerow(
                [
                    i,
                    repr(coords[i]),
                    repr(float(sol.potentials.q[i])),
                    repr(float(sol.potentials.r[i])),
                ]
            )
    paths.append(path)

    path = os.path.join(out_dir, "limbs.json")
    payload = serialize.system_to_json(system)
    payload["marked_split_valid"] = split.valid
    payload["marked_graph_edges"] = [list(e) for e in split.graph_edges]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(path)

    path = os.path.join(out_dir, "support.svg")
    with open(path, "w") as fh:
        fh.write(_support_svg(grid, sol, split))
    paths.append(path)
    return tuple(paths)


def _support_svg(grid, sol, split) -> str:
    """Deterministic scatter of the support on the flat torus."""
    size = 640
    pad = 40
    span = 2.0 * math.pi
    graph_edges = set(split.graph_edges)

    def sx(theta: float) -> float:
        return pad + (size - 2 * pad) * theta / span

    def sy(phi: float) -> float:
        return size - pad - (size - 2 * pad) * phi / span

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<rect x="{pad}" y="{pad}" width="{size - 2 * pad}" height="{size - 2 * pad}" '
        'fill="none" stroke="black"/>',
    ]
    # guide lines phi - theta = +-pi/2, +-3pi/2 on the torus
    for shift in (math.pi / 2, 3 * math.pi / 2, -math.pi / 2, -3 * math.pi / 2):
        for wrap in (-span, 0.0, span):
            x0, y0 = 0.0, shift + wrap
            x1, y1 = span, span + shift + wrap
            out.append(
                f'<line x1="{sx(x0):.2f}" y1="{sy(y0):.2f}" x2="{sx(x1):.2f}" '
                f'y2="{sy(y1):.2f}" stroke="#999" stroke-dasharray="4 4"/>'
            )
    coords = grid.coords
    total = float(sol.coupling.total_mass) or 1.0
    for i, j, mass in sol.coupling.entries:
        r = 2.0 + 6.0 * math.sqrt(float(mass) / total)
        color = "#1f77b4" if (i, j) in graph_edges else "#d62728"
        out.append(
            f'<circle cx="{sx(coords[i]):.2f}" cy="{sy(coords[j]):.2f}" r="{r:.2f}" '
            f'fill="{color}" fill-opacity="0.8"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
