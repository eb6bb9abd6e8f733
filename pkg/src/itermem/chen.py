"""Iterated integrals of 1-forms along paths and their generating series.

Word convention: the coefficient of the word ``(i1, ..., ik)`` is

    integral over 0 < t1 < ... < tk < 1 of a_{i1}(t1) ... a_{ik}(tk) dt

where ``a_i dt`` is the pullback of the i-th form, so the first letter is
integrated earliest.  With this convention the series of a concatenation is
the product of the series, the earlier path on the left.

All integrals use running inner integrals: on a 1-D grid with cumulative
weights ``Q`` the vector ``r = Q @ (a * r_prev)`` holds the inner integral at
every node, so a k-fold integral costs k matrix-vector products.
"""
from __future__ import annotations

import itertools
from typing import Mapping, Sequence

import numpy as np

from . import quadrature as qd
from .errors import GeometryError, SeriesError
from .forms import DifferentialForm, evaluate_form, exterior_derivative, wedge
from .geometry import Membrane, Path, PiecewiseMembrane, SymbolicMembrane
from .reports import CheckReport, compare
from .shuffles import apply_to_word, enumerate_sh

Word = tuple[int, ...]


def _check_one_forms(gamma: Membrane, forms: Sequence[DifferentialForm]):
    if not gamma.is_path:
        raise GeometryError(f"expected a path, got a {gamma.cube_dim}-membrane")
    for f in forms:
        if f.degree != 1:
            raise GeometryError(f"iterated path integrals need 1-forms, got degree {f.degree}")
        if f.dim != gamma.ambient_dim:
            raise GeometryError(f"form lives in dimension {f.dim}, path in {gamma.ambient_dim}")


def _grid(gamma, cfg, n_sub):
    return qd.make_grid(cfg, n_sub, gamma.breakpoints(0))


def path_coefficients(gamma: Membrane, forms: Sequence[DifferentialForm], grid: qd.Grid1D) -> np.ndarray:
    """Pullback coefficients ``a_i`` at the grid nodes, shape (len(forms), P)."""
    t = grid.nodes[:, None]
    probe = grid.probes[:, None]
    if not forms:
        return np.zeros((0, len(grid)))
    return np.stack([gamma.component(f, (1,), t, probe) for f in forms])


def _running(grid, coeffs):
    """Value of the iterated integral of the rows of ``coeffs`` (in order)."""
    r = np.ones(len(grid))
    for a in coeffs[:-1]:
        r = grid.Q @ (a * r)
    return float(grid.w @ (coeffs[-1] * r))


def iterated_path_integral_with_error(gamma: Membrane, forms: Sequence[DifferentialForm],
                                      cfg: qd.QuadratureConfig = qd.DEFAULT,
                                      check: bool = True) -> tuple[float, float]:
    """``(value, error_estimate)`` of the iterated integral of ``forms`` along ``gamma``."""
    forms = list(forms)
    _check_one_forms(gamma, forms)
    if not forms:
        return 1.0, 0.0
    if any(f.is_zero for f in forms):
        return 0.0, 0.0

    def compute(n_sub):
        grid = _grid(gamma, cfg, n_sub)
        return _running(grid, path_coefficients(gamma, forms, grid))

    return qd.refine(compute, cfg, check)


def iterated_path_integral(gamma: Membrane, forms: Sequence[DifferentialForm],
                           cfg: qd.QuadratureConfig = qd.DEFAULT) -> float:
    return iterated_path_integral_with_error(gamma, forms, cfg)[0]


# -- series ---------------------------------------------------------------------------

def all_words(m: int, level: int):
    for k in range(level + 1):
        yield from itertools.product(range(1, m + 1), repeat=k)


class TensorSeries:
    """Truncated element of the free associative algebra on ``A_1..A_m``.

    Coefficients are stored per word (tuples of 1-based letters); missing
    words have coefficient zero.
    """

    def __init__(self, alphabet_size: int, level: int, coeffs: Mapping | None = None):
        if alphabet_size < 0 or level < 0:
            raise SeriesError("alphabet size and level must be non-negative")
        self.alphabet_size = alphabet_size
        self.level = level
        table = {}
        for word, c in (coeffs or {}).items():
            word = tuple(int(x) for x in word)
            if len(word) > level:
                raise SeriesError(f"word {word} is longer than the truncation level {level}")
            if any(not 1 <= x <= alphabet_size for x in word):
                raise SeriesError(f"word {word} uses letters outside 1..{alphabet_size}")
            table[word] = c
        self.coeffs = table

    @classmethod
    def unit(cls, alphabet_size, level):
        return cls(alphabet_size, level, {(): 1.0})

    def __getitem__(self, word) -> float:
        return self.coeffs.get(tuple(word), 0.0)

    def words(self):
        return list(all_words(self.alphabet_size, self.level))

    def __mul__(self, other):
        return series_multiply(self, other)

    def __repr__(self):
        return f"TensorSeries(m={self.alphabet_size}, L={self.level}, {len(self.coeffs)} words)"

    def max_difference(self, other: "TensorSeries") -> float:
        _check_same_shape(self, other)
        return max((abs(self[w] - other[w]) for w in self.words()), default=0.0)

    def to_dict(self) -> dict[str, float]:
        """Word keys as comma-joined letters (the empty word is ``""``)."""
        return {",".join(map(str, w)): float(self[w]) for w in self.words()}

    def evaluate(self, matrices: Sequence) -> np.ndarray:
        """Substitute matrices for the letters: sum of ``c(w) A_{w1} ... A_{wk}``."""
        mats = [np.asarray(A, dtype=float) for A in matrices]
        if len(mats) != self.alphabet_size:
            raise SeriesError(f"{self.alphabet_size} matrices expected, got {len(mats)}")
        size = mats[0].shape[0] if mats else 1
        total = np.zeros((size, size))
        for word, c in self.coeffs.items():
            prod = np.eye(size)
            for letter in word:
                prod = prod @ mats[letter - 1]
            total += c * prod
        return total


def _check_same_shape(a, b):
    if a.alphabet_size != b.alphabet_size or a.level != b.level:
        raise SeriesError(f"series differ in shape: (m={a.alphabet_size}, L={a.level}) vs "
                          f"(m={b.alphabet_size}, L={b.level})")


def series_multiply(a: TensorSeries, b: TensorSeries) -> TensorSeries:
    """Truncated product: the coefficient of ``w`` sums ``a(u) b(v)`` over ``w = u v``."""
    _check_same_shape(a, b)
    out: dict[Word, float] = {}
    for u, cu in a.coeffs.items():
        for v, cv in b.coeffs.items():
            if len(u) + len(v) > a.level:
                continue
            w = u + v
            out[w] = out.get(w, 0.0) + cu * cv
    return TensorSeries(a.alphabet_size, a.level, out)


def transport_series(gamma: Membrane, forms: Sequence[DifferentialForm], level: int,
                     cfg: qd.QuadratureConfig = qd.DEFAULT, check: bool = True,
                     with_errors: bool = False):
    """Series whose word coefficients are the iterated integrals of the forms.

    Every word is computed from its prefix's running integral, so the whole
    series costs one matrix-vector product per word and grid.
    """
    forms = list(forms)
    _check_one_forms(gamma, forms)
    if level < 0:
        raise SeriesError("level must be non-negative")
    m = len(forms)
    words = [w for w in all_words(m, level) if w]

    def compute(n_sub):
        grid = _grid(gamma, cfg, n_sub)
        a = path_coefficients(gamma, forms, grid)
        running = {(): np.ones(len(grid))}
        values = np.empty(len(words))
        for idx, w in enumerate(words):
            integrand = a[w[-1] - 1] * running[w[:-1]]
            values[idx] = grid.w @ integrand
            if len(w) < level:
                running[w] = grid.Q @ integrand
        return values

    if words:
        values, errors = qd.refine(compute, cfg, check)
        values, errors = np.atleast_1d(values), np.atleast_1d(errors)
    else:
        values = errors = np.zeros(0)
    coeffs = {(): 1.0}
    coeffs.update({w: float(v) for w, v in zip(words, values)})
    series = TensorSeries(m, level, coeffs)
    if with_errors:
        return series, dict(zip(words, map(float, errors)))
    return series


def reverse_path(gamma: Membrane) -> Membrane:
    if not gamma.is_path:
        raise GeometryError("only paths can be reversed here")
    return gamma.reversed(0)


def straight_line(start: Sequence[float], end: Sequence[float], variable: str = "t") -> SymbolicMembrane:
    comps = [f"{a!r}+({b - a!r})*{variable}" for a, b in zip(map(float, start), map(float, end))]
    return Path(comps, variable)


# -- identity checks ---------------------------------------------------------------

def shuffle_sum(gamma, forms1, forms2, cfg=qd.DEFAULT) -> float:
    """Sum of the iterated integrals of every shuffle of the two form lists."""
    word = list(forms1) + list(forms2)
    total = 0.0
    for rho in enumerate_sh(len(forms1), len(forms2)):
        total += iterated_path_integral(gamma, apply_to_word(rho, word), cfg)
    return total


def check_shuffle(gamma: Membrane, forms1, forms2, cfg: qd.QuadratureConfig = qd.DEFAULT,
                  tol: float = 1e-6, name: str = "path-shuffle") -> CheckReport:
    """Product of two iterated integrals against the sum over their shuffles."""
    lhs = iterated_path_integral(gamma, forms1, cfg) * iterated_path_integral(gamma, forms2, cfg)
    rhs = shuffle_sum(gamma, forms1, forms2, cfg)
    return compare(name, lhs, rhs, rel=tol, abs_tol=tol,
                   shuffles=len(enumerate_sh(len(forms1), len(forms2))))


def check_composition(gamma1: Membrane, gamma2: Membrane, forms, level: int,
                      cfg: qd.QuadratureConfig = qd.DEFAULT, tol: float = 1e-6,
                      name: str = "composition") -> CheckReport:
    """Series of a concatenation against the product of the pieces' series."""
    from .geometry import concat_paths

    joined = concat_paths(gamma1, gamma2)
    lhs = series_multiply(transport_series(gamma1, forms, level, cfg),
                          transport_series(gamma2, forms, level, cfg))
    rhs = transport_series(joined, forms, level, cfg)
    words = lhs.words()
    return compare(name, [lhs[w] for w in words], [rhs[w] for w in words], abs_tol=tol,
                   words=len(words))


def _table_wedge(a: dict, b: dict, dim: int) -> dict:
    """Wedge of two numeric coefficient tables (increasing index -> value)."""
    from .forms import sort_index

    pa = len(next(iter(a))) if a else 0
    pb = len(next(iter(b))) if b else 0
    out = {K: 0.0 for K in itertools.combinations(range(1, dim + 1), pa + pb)}
    for (I, x), (J, y) in itertools.product(a.items(), b.items()):
        sign, key = sort_index(I + J)
        if sign:
            out[key] += sign * x * y
    return out


def _outer_tables(start: dict, middle: float, end: dict) -> dict:
    return {(I, J): x * middle * y for I, x in start.items() for J, y in end.items()}


def check_decorated_shuffle(gamma: Membrane, start1: DifferentialForm, forms1, end1: DifferentialForm,
                            start2: DifferentialForm, forms2, end2: DifferentialForm,
                            cfg: qd.QuadratureConfig = qd.DEFAULT, tol: float = 1e-6,
                            name: str = "decorated-shuffle") -> CheckReport:
    """Endpoint-decorated shuffle identity, compared as coefficient tables.

    Both sides are tables indexed by a pair (index at the start point, index
    at the end point).  The left side multiplies the two decorated integrals,
    combining the numeric decorations at each endpoint by a wedge of tables;
    the right side wedges the decoration forms symbolically, evaluates them,
    and scales the shuffle sum.
    """
    p0 = gamma.positions(np.array([0.0]))
    p1 = gamma.positions(np.array([1.0]))
    dim = gamma.ambient_dim
    i1 = iterated_path_integral(gamma, forms1, cfg)
    i2 = iterated_path_integral(gamma, forms2, cfg)
    lhs = _outer_tables(_table_wedge(evaluate_form(start1, p0), evaluate_form(start2, p0), dim),
                        i1 * i2,
                        _table_wedge(evaluate_form(end1, p1), evaluate_form(end2, p1), dim))
    s = shuffle_sum(gamma, forms1, forms2, cfg)
    rhs = _outer_tables(evaluate_form(wedge(start1, start2), p0), s,
                        evaluate_form(wedge(end1, end2), p1))
    keys = sorted(lhs)
    report = compare(name, [lhs[k] for k in keys], [rhs[k] for k in keys], rel=tol, abs_tol=tol)
    report.details["components"] = [[list(a), list(b)] for a, b in keys]
    return report


def transport_step(gamma: Membrane, w: DifferentialForm, theta: DifferentialForm, n: int,
                   cfg: qd.QuadratureConfig = qd.DEFAULT) -> dict:
    """Covector ``(integral of w, theta, ..., theta) * theta(gamma(1))``."""
    if n < 0:
        raise ValueError("iteration count must be non-negative")
    _check_one_forms(gamma, [w, theta])
    s = iterated_path_integral(gamma, [w] + [theta] * n, cfg)
    end = evaluate_form(theta, gamma.positions(np.array([1.0])))
    return {k: s * v for k, v in end.items()}


# -- holonomy ---------------------------------------------------------------------

class MatrixConnection:
    """An m x m matrix of 1-forms on a common chart."""

    def __init__(self, entries):
        rows = [list(r) for r in entries]
        if not rows or any(len(r) != len(rows) for r in rows):
            raise SeriesError("connection must be a square matrix of 1-forms")
        self.size = len(rows)
        self.entries = rows
        self.dim = rows[0][0].dim
        for r in rows:
            for f in r:
                if f.degree != 1 or f.dim != self.dim:
                    raise SeriesError("connection entries must be 1-forms on one chart")

    @classmethod
    def from_matrices(cls, matrices: Sequence, forms: Sequence[DifferentialForm]):
        """``sum_i A_i * forms[i]`` for numeric matrices ``A_i``."""
        mats = [np.asarray(A, dtype=float) for A in matrices]
        size = mats[0].shape[0]
        dim = forms[0].dim
        variables = forms[0].variables
        entries = []
        for a in range(size):
            row = []
            for b in range(size):
                f = DifferentialForm.zero(dim, 1, variables)
                for A, form in zip(mats, forms):
                    if A[a, b] != 0.0:
                        f = f + form.scale(float(A[a, b]))
                row.append(f)
            entries.append(row)
        return cls(entries)

    def curvature(self, point) -> np.ndarray:
        """``d(theta) - theta ^ theta`` at a point, as an (m, m, d, d) array."""
        m, d = self.size, self.dim
        out = np.zeros((m, m, d, d))
        for a in range(m):
            for b in range(m):
                two = exterior_derivative(self.entries[a][b])
                for c in range(m):
                    two = two - wedge(self.entries[a][c], self.entries[c][b])
                for (i, j), v in evaluate_form(two, point).items():
                    out[a, b, i - 1, j - 1] = v
                    out[a, b, j - 1, i - 1] = -v
        return out

    def along(self, gamma: Membrane, grid: qd.Grid1D) -> np.ndarray:
        """Pulled-back matrix coefficients at the grid nodes, shape (P, m, m)."""
        out = np.empty((len(grid), self.size, self.size))
        t = grid.nodes[:, None]
        probe = grid.probes[:, None]
        for a in range(self.size):
            for b in range(self.size):
                out[:, a, b] = gamma.component(self.entries[a][b], (1,), t, probe)
        return out


def matrix_transport(gamma: Membrane, connection: MatrixConnection, level: int,
                     cfg: qd.QuadratureConfig = qd.DEFAULT, check: bool = True) -> np.ndarray:
    """Truncated solution of ``P' = theta P``, ``P(0) = I``, evaluated at the end.

    Term k is the k-fold integral with the latest factor leftmost.
    """
    _check_one_forms(gamma, [connection.entries[0][0]])
    m = connection.size

    def compute(n_sub):
        grid = _grid(gamma, cfg, n_sub)
        theta = connection.along(gamma, grid)
        running = np.broadcast_to(np.eye(m), (len(grid), m, m))
        total = np.eye(m)
        for _ in range(level):
            integrand = np.einsum("pab,pbc->pac", theta, running)
            total = total + np.einsum("p,pac->ac", grid.w, integrand)
            running = np.einsum("pq,qac->pac", grid.Q, integrand)
        return total

    return qd.refine(compute, cfg, check)[0]


def square_loop(center: Sequence[float], eps: float, axes=(1, 2)) -> PiecewiseMembrane:
    """Counter-clockwise boundary of the axis square of side ``eps``."""
    c = np.asarray(center, dtype=float)
    i, j = axes[0] - 1, axes[1] - 1
    h = eps / 2
    corners = []
    for di, dj in ((-h, -h), (h, -h), (h, h), (-h, h), (-h, -h)):
        p = c.copy()
        p[i] += di
        p[j] += dj
        corners.append(p)
    legs = [straight_line(a, b) for a, b in zip(corners[:-1], corners[1:])]
    return PiecewiseMembrane([(q / 4, (q + 1) / 4, leg) for q, leg in enumerate(legs)])


def holonomy_curvature_check(connection: MatrixConnection, center: Sequence[float],
                             eps_list: Sequence[float] = (0.25, 0.125, 0.0625), level: int = 4,
                             cfg: qd.QuadratureConfig = qd.DEFAULT, axes=(1, 2),
                             tol: float = 1e-4, min_order: float = 3.0,
                             residual_floor: float = 1e-13, order_slack: float = 1e-3,
                             name: str = "holonomy") -> CheckReport:
    """Fit the holonomy around shrinking squares against the curvature.

    For each side ``eps`` the fitted curvature is ``(Psi - I) / eps^2``; the
    residual is ``|Psi - I - eps^2 F|`` with ``F`` the (axes) component of
    ``d(theta) - theta ^ theta`` at the center.  The check passes when the
    fit at the smallest ``eps`` is within ``tol * max(1, |F|)`` and the
    residual decays with order at least ``min_order`` (less ``order_slack``,
    since an exact cubic decay measures as 2.99999...).  Residuals that are all
    at rounding level (below ``residual_floor * max(1, |F|)``) count as
    infinite order.
    """
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    i, j = axes
    F = connection.curvature(center)[:, :, i - 1, j - 1]
    scale = max(1.0, float(np.max(np.abs(F))))
    m = connection.size
    fits, residuals = [], []
    for eps in eps_list:
        psi = matrix_transport(square_loop(center, eps, axes), connection, level, cfg)
        fits.append((psi - np.eye(m)) / eps ** 2)
        residuals.append(float(np.max(np.abs(psi - np.eye(m) - eps ** 2 * F))))
    floor = residual_floor * scale
    orders = []
    for (e1, r1), (e2, r2) in zip(zip(eps_list, residuals), zip(eps_list[1:], residuals[1:])):
        if r1 <= floor and r2 <= floor:
            orders.append(float("inf"))
        elif r2 <= floor:
            orders.append(float("inf"))
        else:
            orders.append(float(np.log(max(r1, floor) / r2) / np.log(e1 / e2)))
    order = min(orders) if orders else float("inf")
    report = compare(name, fits[-1], F, abs_tol=tol * scale)
    report.passed = report.passed and order >= min_order - order_slack
    report.details.update(eps=eps_list, residuals=residuals,
                          order=order if np.isfinite(order) else "inf", min_order=min_order)
    return report
