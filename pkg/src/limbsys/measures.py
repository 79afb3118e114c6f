"""Core value types: discrete measures, cost matrices, couplings, partial maps.

All types are immutable after construction and all operations are pure, so
values can be shared freely across threads.  Masses and costs are carried
either as exact ``fractions.Fraction`` values (rational mode) or as ``float``
(float mode); a single object never mixes the two.  Couplings are canonically
sparse: an exact zero mass is structurally absent, which makes "support" a
syntactic property of the data rather than a tolerance question.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import isfinite
from typing import Iterable, Literal, Mapping, Sequence, Union

from .errors import DomainMismatch, ShapeMismatch

Number = Union[int, float, Fraction]

#: Relative tolerance for total-mass comparisons in float mode.
MASS_REL_TOL = 1e-12
#: Absolute per-entry tolerance for marginal agreement in float mode.
MARGINAL_ABS_TOL = 1e-10


def is_exact_number(x: Number) -> bool:
    """True when ``x`` belongs to the exact rational backend."""
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def to_exact(x: Number) -> Fraction:
    """Exact rational image of ``x``.

    Floats convert through their binary value, so the conversion is lossless.
    """
    return x if isinstance(x, Fraction) else Fraction(x)


def masses_close(a: Number, b: Number, *, exact: bool) -> bool:
    if exact:
        return a == b
    scale = max(abs(float(a)), abs(float(b)), 1.0)
    return abs(float(a) - float(b)) <= MASS_REL_TOL * scale


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted finite point set.

    Parameters
    ----------
    points : tuple of int
        Site identifiers, unique, in display order.  For measures paired
        with matrix-indexed objects they are the row/column indices
        ``0..n-1`` and association is positional.
    weights : tuple
        One nonnegative weight per point.
    """

    points: tuple[int, ...]
    weights: tuple[Number, ...]

    def __init__(self, points: Sequence[int], weights: Sequence[Number]):
        points = tuple(points)
        weights = tuple(weights)
        if len(points) != len(weights):
            raise ValueError("points and weights must have equal length")
        if len(set(points)) != len(points):
            raise ValueError("point identifiers must be unique")
        for w in weights:
            if w < 0:
                raise ValueError(f"negative weight {w!r}")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_weights(cls, weights: Sequence[Number]) -> "DiscreteMeasure":
        """Measure on sites ``0..n-1`` with the given weights."""
        return cls(range(len(weights)), weights)

    @classmethod
    def uniform(cls, n: int, total: Number = 1) -> "DiscreteMeasure":
        """Uniform measure of mass ``total`` on ``n`` sites (exact weights)."""
        w = Fraction(total, n) if n else Fraction(0)
        return cls(range(n), (w,) * n)

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def total_mass(self) -> Number:
        return sum(self.weights, start=0)

    @cached_property
    def is_exact(self) -> bool:
        return all(is_exact_number(w) for w in self.weights)

    @cached_property
    def support(self) -> tuple[int, ...]:
        """Points carrying strictly positive weight."""
        return tuple(p for p, w in zip(self.points, self.weights) if w > 0)

    def weight_of(self, point: int) -> Number:
        return self.weights[self._index[point]]

    @cached_property
    def _index(self) -> dict[int, int]:
        return {p: k for k, p in enumerate(self.points)}

    def to_exact(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, tuple(to_exact(w) for w in self.weights))

    def to_float(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, tuple(float(w) for w in self.weights))


@dataclass(frozen=True)
class CostMatrix:
    """Dense rectangular matrix of finite transportation costs."""

    rows: int
    cols: int
    entries: tuple[tuple[Number, ...], ...]

    def __init__(self, entries: Sequence[Sequence[Number]]):
        entries = tuple(tuple(row) for row in entries)
        rows = len(entries)
        cols = len(entries[0]) if rows else 0
        for row in entries:
            if len(row) != cols:
                raise ValueError("cost rows must have equal length")
            for c in row:
                if isinstance(c, float) and not isfinite(c):
                    raise ValueError(f"non-finite cost {c!r}")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "CostMatrix":
        return cls(((0,) * cols,) * rows)

    def entry(self, i: int, j: int) -> Number:
        return self.entries[i][j]

    @cached_property
    def is_exact(self) -> bool:
        return all(is_exact_number(c) for row in self.entries for c in row)

    @cached_property
    def max_abs(self) -> float:
        if self.rows == 0 or self.cols == 0:
            return 0.0
        return max(abs(float(c)) for row in self.entries for c in row)

    def to_exact(self) -> "CostMatrix":
        return CostMatrix(tuple(tuple(to_exact(c) for c in row) for row in self.entries))

    def as_float_rows(self) -> list[list[float]]:
        return [[float(c) for c in row] for row in self.entries]


@dataclass(frozen=True)
class Coupling:
    """Sparse nonnegative matrix with prescribed marginals.

    ``entries`` holds ``(i, j, mass)`` triples sorted lexicographically by
    ``(i, j)`` with every mass strictly positive; zeros are never stored.
    """

    shape: tuple[int, int]
    entries: tuple[tuple[int, int, Number], ...]

    def __init__(
        self,
        shape: tuple[int, int],
        entries: Union[Mapping[tuple[int, int], Number], Iterable[tuple[int, int, Number]]],
    ):
        rows, cols = shape
        if isinstance(entries, Mapping):
            items = [(i, j, m) for (i, j), m in entries.items()]
        else:
            items = [(i, j, m) for i, j, m in entries]
        seen: set[tuple[int, int]] = set()
        clean: list[tuple[int, int, Number]] = []
        for i, j, m in items:
            if not (0 <= i < rows and 0 <= j < cols):
                raise ValueError(f"entry ({i},{j}) outside shape {shape}")
            if (i, j) in seen:
                raise ValueError(f"duplicate entry ({i},{j})")
            seen.add((i, j))
            if m < 0:
                raise ValueError(f"negative mass {m!r} at ({i},{j})")
            if m > 0:
                clean.append((i, j, m))
        clean.sort(key=lambda e: (e[0], e[1]))
        object.__setattr__(self, "shape", (rows, cols))
        object.__setattr__(self, "entries", tuple(clean))

    @cached_property
    def as_dict(self) -> dict[tuple[int, int], Number]:
        return {(i, j): m for i, j, m in self.entries}

    @cached_property
    def support(self) -> tuple[tuple[int, int], ...]:
        return tuple((i, j) for i, j, _ in self.entries)

    def mass_at(self, i: int, j: int) -> Number:
        return self.as_dict.get((i, j), 0)

    @cached_property
    def total_mass(self) -> Number:
        return sum((m for _, _, m in self.entries), start=0)

    @cached_property
    def is_exact(self) -> bool:
        return all(is_exact_number(m) for _, _, m in self.entries)

    @cached_property
    def row_marginal(self) -> DiscreteMeasure:
        rows, _ = self.shape
        acc: list[Number] = [0] * rows
        for i, _, m in self.entries:
            acc[i] += m
        return DiscreteMeasure.from_weights(acc)

    @cached_property
    def col_marginal(self) -> DiscreteMeasure:
        _, cols = self.shape
        acc: list[Number] = [0] * cols
        for _, j, m in self.entries:
            acc[j] += m
        return DiscreteMeasure.from_weights(acc)

    def to_exact(self) -> "Coupling":
        return Coupling(self.shape, [(i, j, to_exact(m)) for i, j, m in self.entries])


Direction = Literal["XY", "YX"]


@dataclass(frozen=True)
class PartialMap:
    """Single-valued assignment from a subset of one index space to the other.

    Direction ``"XY"`` maps row sites to column sites (a graph when drawn in
    the product space); ``"YX"`` maps column sites to row sites (an
    antigraph).
    """

    direction: Direction
    assignments: tuple[tuple[int, int], ...]

    def __init__(self, direction: Direction, assignments: Union[Mapping[int, int], Iterable[tuple[int, int]]]):
        if direction not in ("XY", "YX"):
            raise ValueError(f"direction must be 'XY' or 'YX', got {direction!r}")
        if isinstance(assignments, Mapping):
            pairs = sorted(assignments.items())
        else:
            pairs = sorted(assignments)
        keys = [k for k, _ in pairs]
        if len(set(keys)) != len(keys):
            raise ValueError("partial map must be single-valued")
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "assignments", tuple(pairs))

    @cached_property
    def mapping(self) -> dict[int, int]:
        return dict(self.assignments)

    @cached_property
    def domain(self) -> frozenset[int]:
        return frozenset(k for k, _ in self.assignments)

    @cached_property
    def range(self) -> frozenset[int]:
        return frozenset(v for _, v in self.assignments)

    @cached_property
    def edges(self) -> frozenset[tuple[int, int]]:
        """Edges in (row, col) convention, regardless of direction."""
        if self.direction == "XY":
            return frozenset((x, y) for x, y in self.assignments)
        return frozenset((x, y) for y, x in self.assignments)

    def __len__(self) -> int:
        return len(self.assignments)


def marginals(coupling: Coupling) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """Row-sum and column-sum measures of a coupling."""
    return coupling.row_marginal, coupling.col_marginal


def pushforward_coupling(
    pmap: PartialMap,
    eta: DiscreteMeasure,
    shape: tuple[int, int] | None = None,
) -> Coupling:
    """Coupling concentrated on the graph (or antigraph) of ``pmap``.

    For an ``"XY"`` map the result places mass ``eta[i]`` at ``(i, f(i))``;
    for ``"YX"`` it places ``eta[j]`` at ``(f(j), j)``.  Zero-weight points of
    ``eta`` are ignored, so they need not lie in the map's domain.

    Raises
    ------
    DomainMismatch
        If some positively weighted point of ``eta`` has no assignment.
    """
    f = pmap.mapping
    triples: list[tuple[int, int, Number]] = []
    for p, w in zip(eta.points, eta.weights):
        if w == 0:
            continue
        if p not in f:
            raise DomainMismatch(f"point {p} carries mass but is not in the map's domain")
        if pmap.direction == "XY":
            triples.append((p, f[p], w))
        else:
            triples.append((f[p], p, w))
    if shape is None:
        max_i = max((i for i, _, _ in triples), default=-1)
        max_j = max((j for _, j, _ in triples), default=-1)
        shape = (max_i + 1, max_j + 1)
    return Coupling(shape, triples)


def add(couplings: Sequence[Coupling]) -> Coupling:
    """Entrywise sum of couplings of a common shape."""
    if not couplings:
        raise ValueError("add() requires at least one coupling")
    shape = couplings[0].shape
    acc: dict[tuple[int, int], Number] = {}
    for c in couplings:
        if c.shape != shape:
            raise ShapeMismatch(f"cannot add shapes {shape} and {c.shape}")
        for i, j, m in c.entries:
            acc[(i, j)] = acc.get((i, j), 0) + m
    return Coupling(shape, acc)


def scale(coupling: Coupling, factor: Number) -> Coupling:
    """Coupling with every mass multiplied by a nonnegative ``factor``."""
    if factor < 0:
        raise ValueError("scale factor must be nonnegative")
    return Coupling(coupling.shape, [(i, j, m * factor) for i, j, m in coupling.entries])
