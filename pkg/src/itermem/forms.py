"""Differential forms on an open chart of R^d.

Coefficients are :class:`~itermem.expr.Expression` objects keyed by strictly
increasing 1-based multi-indices; a missing key means a zero coefficient.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import expr as ex
from .errors import BasisError, FormError, NotClosedError

Index = tuple[int, ...]


def default_variables(dim: int, prefix: str = "x") -> tuple[str, ...]:
    return tuple(f"{prefix}{i}" for i in range(1, dim + 1))


def sort_index(index: Sequence[int]) -> tuple[int, Index]:
    """Return (sign, sorted index) of a wedge of coordinate differentials.

    The sign is 0 when an index repeats.
    """
    index = list(index)
    if len(set(index)) != len(index):
        return 0, ()
    sign = 1
    # insertion sort, counting transpositions
    for i in range(1, len(index)):
        j = i
        while j > 0 and index[j - 1] > index[j]:
            index[j - 1], index[j] = index[j], index[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(index)


class DifferentialForm:
    """A degree-``degree`` form on a ``dim``-dimensional chart.

    ``coeffs`` maps multi-indices to expressions or source strings.  Indices
    that are not increasing are sorted (with the permutation sign); repeated
    indices contribute nothing.
    """

    __slots__ = ("dim", "degree", "variables", "coeffs")

    def __init__(self, dim: int, degree: int, coeffs: Mapping | None = None,
                 variables: Sequence[str] | None = None):
        if dim < 0 or not 0 <= degree:
            raise FormError(f"invalid form shape dim={dim} degree={degree}")
        variables = tuple(variables) if variables is not None else default_variables(dim)
        if len(variables) != dim:
            raise FormError(f"{dim} variables expected, got {len(variables)}")
        table: dict[Index, ex.Expression] = {}
        for index, value in (coeffs or {}).items():
            index = (index,) if isinstance(index, int) else tuple(index)
            if len(index) != degree:
                raise FormError(f"index {index} does not have length {degree}")
            if any(not 1 <= i <= dim for i in index):
                raise FormError(f"index {index} out of range for dimension {dim}")
            sign, key = sort_index(index)
            if sign == 0:
                continue
            e = ex.as_expression(value, variables)
            if sign < 0:
                e = -e
            if key in table:
                e = table[key] + e
            table[key] = e
        table = {k: v for k, v in sorted(table.items()) if not v.is_zero}
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "coeffs", table)

    def __setattr__(self, name, value):
        raise AttributeError("DifferentialForm is immutable")

    # -- constructors --------------------------------------------------------

    @classmethod
    def zero(cls, dim, degree, variables=None):
        return cls(dim, degree, {}, variables)

    @classmethod
    def function(cls, value, dim, variables=None):
        """The 0-form given by an expression (or its source text)."""
        return cls(dim, 0, {(): value}, variables)

    @classmethod
    def one(cls, dim, variables=None):
        return cls.function("1", dim, variables)

    @classmethod
    def coordinate(cls, i, dim, variables=None):
        """The differential dx_i."""
        return cls(dim, 1, {(i,): "1"}, variables)

    # -- basics ----------------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def __getitem__(self, index) -> ex.Expression:
        index = (index,) if isinstance(index, int) else tuple(index)
        sign, key = sort_index(index)
        e = self.coeffs.get(key)
        if e is None or sign == 0:
            return ex.constant(0.0, self.variables)
        return e if sign > 0 else -e

    def __repr__(self):
        return f"DifferentialForm({self.dim}, {self.degree}, {self.to_dict()!r})"

    def __str__(self):
        if not self.coeffs:
            return "0"
        terms = []
        for index, e in self.coeffs.items():
            basis = "^".join(f"d{self.variables[i - 1]}" for i in index)
            terms.append(f"({e})" + (f"*{basis}" if basis else ""))
        return " + ".join(terms)

    def to_dict(self) -> dict[str, str]:
        return {",".join(map(str, k)): str(v) for k, v in self.coeffs.items()}

    def _check_compatible(self, other):
        if not isinstance(other, DifferentialForm):
            raise TypeError(f"expected a DifferentialForm, got {type(other).__name__}")
        if other.dim != self.dim:
            raise FormError(f"dimension mismatch: {self.dim} vs {other.dim}")
        if other.variables != self.variables:
            raise FormError("forms are declared over different coordinates")

    def __add__(self, other):
        self._check_compatible(other)
        if other.degree != self.degree:
            raise FormError("cannot add forms of different degree")
        table = dict(self.coeffs)
        for k, v in other.coeffs.items():
            table[k] = table[k] + v if k in table else v
        return DifferentialForm(self.dim, self.degree, table, self.variables)

    def __neg__(self):
        return DifferentialForm(self.dim, self.degree,
                                {k: -v for k, v in self.coeffs.items()}, self.variables)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, factor) -> "DifferentialForm":
        """Multiply by a number or by a scalar expression."""
        f = ex.as_expression(factor, self.variables) if not isinstance(factor, ex.Expression) else factor
        return DifferentialForm(self.dim, self.degree,
                                {k: v * f for k, v in self.coeffs.items()}, self.variables)

    def __mul__(self, other):
        if isinstance(other, DifferentialForm):
            return wedge(self, other)
        return self.scale(other)

    __rmul__ = scale

    def __xor__(self, other):
        return wedge(self, other)

    def close_to(self, other, points, atol=1e-9) -> bool:
        """Numerical equality at sample points (array of shape (m, dim))."""
        diff = self - other
        vals = evaluate_coefficients(diff, points)
        return all(np.max(np.abs(v)) <= atol for v in vals.values())


def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    a._check_compatible(b)
    degree = a.degree + b.degree
    table: dict[Index, ex.Expression] = {}
    if degree <= a.dim:
        for (ia, ea), (ib, eb) in itertools.product(a.coeffs.items(), b.coeffs.items()):
            sign, key = sort_index(ia + ib)
            if sign == 0:
                continue
            term = ea * eb if sign > 0 else -(ea * eb)
            table[key] = table[key] + term if key in table else term
    return DifferentialForm(a.dim, degree, table, a.variables)


def exterior_derivative(a: DifferentialForm) -> DifferentialForm:
    table: dict[Index, ex.Expression] = {}
    if a.degree + 1 <= a.dim:
        for index, e in a.coeffs.items():
            for i in range(1, a.dim + 1):
                de = e.derivative(a.variables[i - 1])
                if de.is_zero:
                    continue
                sign, key = sort_index((i,) + index)
                if sign == 0:
                    continue
                term = de if sign > 0 else -de
                table[key] = table[key] + term if key in table else term
    return DifferentialForm(a.dim, a.degree + 1, table, a.variables)


def evaluate_coefficients(a: DifferentialForm, points) -> dict[Index, np.ndarray]:
    """Coefficient values at an array of points of shape (..., dim)."""
    points = np.asarray(points, dtype=float)
    if points.shape[-1] != a.dim:
        raise FormError(f"points have {points.shape[-1]} coordinates, form lives in {a.dim}")
    env = {name: points[..., i] for i, name in enumerate(a.variables)}
    shape = points.shape[:-1]
    out = {}
    for index, e in a.coeffs.items():
        with np.errstate(all="ignore"):
            val = e.evaluate_at(env)
        out[index] = np.broadcast_to(np.asarray(val, dtype=float), shape)
    return out


def evaluate_form(a: DifferentialForm, point) -> dict[Index, float]:
    """Numeric coefficient table at a single point.

    Every increasing multi-index of the form's degree is present, zeros
    included, so tables of equal-degree forms are directly comparable.
    """
    point = np.asarray(point, dtype=float)
    values = evaluate_coefficients(a, point)
    if a.degree > a.dim:
        return {}
    table = {}
    for index in itertools.combinations(range(1, a.dim + 1), a.degree):
        v = values.get(index)
        table[index] = 0.0 if v is None else float(v)
    for v in table.values():
        if not np.isfinite(v):
            raise ex.DomainError("non-finite coefficient")
    return table


# -- decomposition of wedges in a 2-form basis ----------------------------------

@dataclass
class BasisDecomposition:
    """Result of :func:`express_in_basis`.

    ``c[i, j, k]`` (0-based) is the coefficient of ``V[k]`` in
    ``W[i] ^ W[j]``.  ``generators[k]`` maps 1-based pairs ``(i, j)`` with
    ``i < j`` to the coefficient of ``[X_i, X_j]`` in the k-th relation.
    """

    c: np.ndarray
    residual: float
    generators: list[dict[tuple[int, int], float]] = field(default_factory=list)

    def coefficient(self, i: int, j: int, k: int) -> float:
        """1-based accessor matching the usual c_ijk notation."""
        return float(self.c[i - 1, j - 1, k - 1])

    def generator_strings(self, tol: float = 1e-12) -> list[str]:
        out = []
        for gen in self.generators:
            terms = [f"{v:+.12g}*[X{i},X{j}]" for (i, j), v in gen.items() if abs(v) > tol]
            out.append(" ".join(terms) if terms else "0")
        return out


def express_in_basis(W: Sequence[DifferentialForm], V: Sequence[DifferentialForm],
                     sample_count: int = 64, tol: float = 1e-8, box=(-1.0, 1.0),
                     seed: int = 0, closed_tol: float = 1e-9) -> BasisDecomposition:
    """Solve ``W[i] ^ W[j] = sum_k c[i,j,k] V[k]`` pointwise by least squares.

    Points are drawn uniformly from ``box`` (a (lo, hi) pair applied to every
    axis, or a per-axis sequence of pairs).  Raises :class:`NotClosedError`
    when some ``W[i]`` is not closed and :class:`BasisError` when the basis is
    degenerate or the residual exceeds ``tol``.
    """
    if not W or not V:
        raise FormError("W and V must be non-empty")
    dim = W[0].dim
    for w in W:
        if w.degree != 1 or w.dim != dim:
            raise FormError("W must consist of 1-forms on a common chart")
    for v in V:
        if v.degree != 2 or v.dim != dim:
            raise FormError("V must consist of 2-forms on the chart of W")
    rng = np.random.default_rng(seed)
    lo, hi = _box_bounds(box, dim)
    pts = lo + (hi - lo) * rng.random((sample_count, dim))

    for i, w in enumerate(W, start=1):
        dw = evaluate_coefficients(exterior_derivative(w), pts)
        worst = max((float(np.max(np.abs(v))) for v in dw.values()), default=0.0)
        if worst > closed_tol:
            raise NotClosedError(f"W[{i}] is not closed (|dW| up to {worst:.3g})")

    pairs = list(itertools.combinations(range(1, dim + 1), 2))

    def stack(form):
        vals = evaluate_coefficients(form, pts)
        cols = [vals.get(p, np.zeros(sample_count)) for p in pairs]
        return np.stack(cols, axis=-1) if cols else np.zeros((sample_count, 0))

    basis = np.stack([stack(v) for v in V], axis=-1)  # (S, P, l)
    ranks = [np.linalg.matrix_rank(b, tol=1e-10) for b in basis]
    if min(ranks, default=0) < len(V):
        raise BasisError("V is not pointwise linearly independent on the sample set")
    A = basis.reshape(-1, len(V))
    m, l = len(W), len(V)
    c = np.zeros((m, m, l))
    residual = 0.0
    for i in range(m):
        for j in range(m):
            b = stack(wedge(W[i], W[j])).reshape(-1)
            sol, *_ = np.linalg.lstsq(A, b, rcond=None)
            c[i, j] = sol
            residual = max(residual, float(np.max(np.abs(A @ sol - b), initial=0.0)))
    c[np.abs(c) < 1e-14] = 0.0
    if residual > tol:
        raise BasisError(f"W^W is not spanned by V (residual {residual:.3g})", residual)
    generators = []
    for k in range(l):
        gen = {}
        for i, j in itertools.combinations(range(m), 2):
            gen[(i + 1, j + 1)] = float(c[i, j, k] - c[j, i, k])
        generators.append(gen)
    return BasisDecomposition(c, residual, generators)


def _box_bounds(box, dim):
    box = np.asarray(box, dtype=float)
    if box.shape == (2,):
        return np.full(dim, box[0]), np.full(dim, box[1])
    if box.shape == (dim, 2):
        return box[:, 0], box[:, 1]
    raise FormError("box must be (lo, hi) or one (lo, hi) pair per axis")
