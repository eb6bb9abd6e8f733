"""Paths, membranes and their pullbacks.

A membrane is a map from the unit n-cube into a d-dimensional chart; a path
is a membrane with ``cube_dim == 1``.  Three kinds exist:

* :class:`SymbolicMembrane` -- components are expressions in ``t1..tn``;
  Jacobians are exact.
* :class:`SampledMembrane` -- values on a uniform grid; Jacobians by second
  order finite differences, both interpolated multilinearly.
* :class:`PiecewiseMembrane` -- sub-membranes laid side by side along the
  first cube direction, each reparametrised affinely.  Concatenation and
  gluing produce these.

All numeric entry points take points ``t`` of shape ``(..., n)`` and an
optional ``probe`` of the same shape used only to decide which piece a point
belongs to (quadrature nodes sitting on a breakpoint pass a probe inside
their own segment).
"""
from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import expr as ex
from .errors import GeometryError
from .forms import DifferentialForm, evaluate_coefficients, wedge

ENDPOINT_TOL = 1e-9
FACE_TOL = 1e-9


def cube_variables(n: int) -> tuple[str, ...]:
    return tuple(f"t{i}" for i in range(1, n + 1))


class Membrane:
    cube_dim: int
    ambient_dim: int

    @property
    def is_path(self) -> bool:
        return self.cube_dim == 1

    def breakpoints(self, direction: int) -> tuple[float, ...]:
        """Breakpoints of the piecewise structure along a 0-based direction."""
        return (0.0, 1.0)

    def positions(self, t, probe=None) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, t, probe=None) -> np.ndarray:
        raise NotImplementedError

    def piece_of(self, t, probe=None) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.zeros(t.shape[:-1], dtype=int)

    def __call__(self, *t):
        return self.positions(np.array(t, dtype=float))

    def component(self, form: DifferentialForm, J: Sequence[int], t, probe=None) -> np.ndarray:
        """Coefficient of ``dt_J`` (J increasing, 1-based) in the pullback of ``form``."""
        t = np.asarray(t, dtype=float)
        if t.shape[-1] != self.cube_dim:
            raise GeometryError(f"points have {t.shape[-1]} coordinates, cube has {self.cube_dim}")
        if form.dim != self.ambient_dim:
            raise GeometryError(f"form lives in dimension {form.dim}, membrane in {self.ambient_dim}")
        J = tuple(J)
        shape = t.shape[:-1]
        if len(J) != form.degree:
            raise GeometryError(f"component {J} requested from a {form.degree}-form")
        if form.is_zero:
            return np.zeros(shape)
        x = self.positions(t, probe)
        values = evaluate_coefficients(form, x)
        if form.degree == 0:
            return np.array(values[()], dtype=float)
        jac = self.jacobian(t, probe)
        cols = [j - 1 for j in J]
        total = np.zeros(shape)
        for K, v in values.items():
            minor = jac[..., [k - 1 for k in K], :][..., cols]
            total = total + v * np.linalg.det(minor)
        return total

    def pullback(self, form: DifferentialForm):
        raise NotImplementedError


class SymbolicMembrane(Membrane):
    """Membrane given by one expression per ambient coordinate."""

    def __init__(self, components: Sequence, variables: Sequence[str] | None = None,
                 cube_dim: int | None = None):
        if variables is None:
            if cube_dim is None:
                raise GeometryError("give either the cube variables or cube_dim")
            variables = cube_variables(cube_dim)
        self.variables = tuple(variables)
        self.cube_dim = len(self.variables)
        if self.cube_dim < 1:
            raise GeometryError("cube_dim must be at least 1")
        self.components = tuple(ex.as_expression(c, self.variables) for c in components)
        self.ambient_dim = len(self.components)
        self._jac = [[c.derivative(v) for v in self.variables] for c in self.components]

    def __repr__(self):
        return f"SymbolicMembrane({[str(c) for c in self.components]!r}, {list(self.variables)!r})"

    def _env(self, t):
        t = np.asarray(t, dtype=float)
        return {v: t[..., i] for i, v in enumerate(self.variables)}, t.shape[:-1]

    def positions(self, t, probe=None):
        env, shape = self._env(t)
        cols = [np.broadcast_to(np.asarray(c.evaluate_at(env), dtype=float), shape)
                for c in self.components]
        return np.stack(cols, axis=-1)

    def jacobian(self, t, probe=None):
        env, shape = self._env(t)
        rows = [np.stack([np.broadcast_to(np.asarray(e.evaluate_at(env), dtype=float), shape)
                          for e in row], axis=-1) for row in self._jac]
        return np.stack(rows, axis=-2)

    def jacobian_expressions(self):
        return [list(row) for row in self._jac]

    def pullback(self, form: DifferentialForm) -> DifferentialForm:
        """Exact pullback as a form on the cube (variables ``self.variables``)."""
        if form.dim != self.ambient_dim:
            raise GeometryError(f"form lives in dimension {form.dim}, membrane in {self.ambient_dim}")
        n = self.cube_dim
        mapping = dict(zip(form.variables, self.components))
        differentials = [DifferentialForm(n, 1, {(b + 1,): self._jac[a][b] for b in range(n)},
                                          self.variables)
                         for a in range(self.ambient_dim)]
        result = DifferentialForm.zero(n, form.degree, self.variables)
        for K, coeff in form.coeffs.items():
            term = DifferentialForm.function(coeff.substitute(mapping, self.variables), n, self.variables)
            for k in K:
                term = wedge(term, differentials[k - 1])
            result = result + term
        return result

    def substitute(self, mapping: dict, variables: Sequence[str] | None = None) -> "SymbolicMembrane":
        """Reparametrise: replace cube variables by expressions (or source strings)."""
        variables = tuple(variables) if variables is not None else self.variables
        subs = {k: ex.as_expression(v, variables) for k, v in mapping.items()}
        return SymbolicMembrane([c.substitute(subs, variables) for c in self.components], variables)

    def reversed(self, direction: int = 0) -> "SymbolicMembrane":
        v = self.variables[direction]
        return self.substitute({v: f"1-{v}"})

    def face(self, direction: int, value: float) -> "SymbolicMembrane":
        """Restriction to ``t_direction = value`` as an (n-1)-membrane."""
        if self.cube_dim < 2:
            raise GeometryError("faces of a path are points")
        keep = tuple(v for i, v in enumerate(self.variables) if i != direction)
        subs = {self.variables[direction]: ex.constant(value, keep)}
        return SymbolicMembrane([c.substitute(subs, keep) for c in self.components], keep)


def Path(components: Sequence, variable: str = "t") -> SymbolicMembrane:
    """A symbolic path ``t -> (components)``."""
    return SymbolicMembrane(components, (variable,))


class SampledMembrane(Membrane):
    """Membrane known on a uniform grid of shape ``(N+1,)*n + (d,)``."""

    def __init__(self, grid):
        grid = np.asarray(grid, dtype=float)
        if grid.ndim < 2:
            raise GeometryError("grid needs at least one cube axis and the ambient axis")
        n = grid.ndim - 1
        sizes = grid.shape[:-1]
        if len(set(sizes)) != 1 or sizes[0] < 3:
            raise GeometryError(f"grid must be uniform with N >= 2, got shape {grid.shape}")
        self.grid = grid
        self.cube_dim = n
        self.ambient_dim = grid.shape[-1]
        N = sizes[0] - 1
        self.spacing = 1.0 / N
        axes = [np.linspace(0.0, 1.0, N + 1)] * n
        jac = np.stack([np.gradient(grid, self.spacing, axis=b, edge_order=2) for b in range(n)],
                       axis=-1)
        self._pos = RegularGridInterpolator(axes, grid)
        self._jac = RegularGridInterpolator(axes, jac)

    @classmethod
    def from_function(cls, f, cube_dim: int, N: int) -> "SampledMembrane":
        """Sample a vectorised ``f(t) -> (..., d)`` on an (N+1)^n grid."""
        axes = np.meshgrid(*[np.linspace(0, 1, N + 1)] * cube_dim, indexing="ij")
        return cls(f(np.stack(axes, axis=-1)))

    def _query(self, interp, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        shape = t.shape[:-1]
        out = interp(t.reshape(-1, self.cube_dim))
        return out.reshape(shape + out.shape[1:])

    def positions(self, t, probe=None):
        return self._query(self._pos, t)

    def jacobian(self, t, probe=None):
        return self._query(self._jac, t)

    def pullback(self, form: DifferentialForm) -> "SampledForm":
        axes = np.meshgrid(*[np.linspace(0, 1, self.grid.shape[0])] * self.cube_dim, indexing="ij")
        pts = np.stack(axes, axis=-1)
        coeffs = {}
        if form.degree <= self.cube_dim:
            for J in itertools.combinations(range(1, self.cube_dim + 1), form.degree):
                coeffs[J] = self.component(form, J, pts)
        return SampledForm(self.cube_dim, form.degree, coeffs)

    def reversed(self, direction: int = 0) -> "SampledMembrane":
        return SampledMembrane(np.flip(self.grid, axis=direction))


class SampledForm:
    """A form on the cube known through coefficient values on a uniform grid."""

    def __init__(self, cube_dim, degree, coeffs):
        self.cube_dim = cube_dim
        self.degree = degree
        self.coeffs = coeffs
        self._interp = {}

    def evaluate(self, t) -> dict:
        t = np.asarray(t, dtype=float)
        out = {}
        for J, values in self.coeffs.items():
            if J not in self._interp:
                axes = [np.linspace(0, 1, values.shape[0])] * self.cube_dim
                self._interp[J] = RegularGridInterpolator(axes, values)
            out[J] = self._interp[J](t.reshape(-1, self.cube_dim)).reshape(t.shape[:-1])
        return out


class PiecewiseMembrane(Membrane):
    """Sub-membranes placed on consecutive intervals of the first direction.

    ``pieces`` is a list of ``(lo, hi, membrane)``; piece ``i`` covers
    ``lo <= t1 < hi`` (the last one includes 1) and is evaluated at
    ``(t1 - lo) / (hi - lo)``.
    """

    def __init__(self, pieces):
        pieces = [(float(lo), float(hi), m) for lo, hi, m in pieces]
        if not pieces:
            raise GeometryError("no pieces")
        if pieces[0][0] != 0.0 or pieces[-1][1] != 1.0:
            raise GeometryError("pieces must cover [0, 1]")
        for (_, hi, _), (lo, _, _) in zip(pieces, pieces[1:]):
            if hi != lo:
                raise GeometryError("pieces must be contiguous")
        dims = {(m.cube_dim, m.ambient_dim) for _, _, m in pieces}
        if len(dims) != 1:
            raise GeometryError("pieces differ in dimensions")
        self.pieces = pieces
        self.cube_dim, self.ambient_dim = dims.pop()
        self._his = np.array([hi for _, hi, _ in pieces])

    def __repr__(self):
        return f"PiecewiseMembrane({self.pieces!r})"

    def breakpoints(self, direction):
        pts = set()
        for lo, hi, m in self.pieces:
            if direction == 0:
                pts.update(lo + (hi - lo) * b for b in m.breakpoints(0))
            else:
                pts.update(m.breakpoints(direction))
        return tuple(sorted(pts))

    def piece_of(self, t, probe=None):
        ref = np.asarray(t if probe is None else probe, dtype=float)[..., 0]
        idx = np.searchsorted(self._his, ref, side="right")
        return np.minimum(idx, len(self.pieces) - 1)

    def _dispatch(self, t, probe, method, scale_jac):
        t = np.asarray(t, dtype=float)
        probe = t if probe is None else np.broadcast_to(np.asarray(probe, dtype=float), t.shape)
        idx = self.piece_of(t, probe)
        out = None
        for i, (lo, hi, m) in enumerate(self.pieces):
            mask = idx == i
            if not np.any(mask):
                continue
            tl = t[mask].copy()
            pl = probe[mask].copy()
            tl[:, 0] = (tl[:, 0] - lo) / (hi - lo)
            pl[:, 0] = (pl[:, 0] - lo) / (hi - lo)
            vals = getattr(m, method)(tl, pl)
            if scale_jac:
                vals = vals.copy()
                vals[..., 0] /= hi - lo
            if out is None:
                out = np.empty(t.shape[:-1] + vals.shape[1:])
            out[mask] = vals
        return out

    def positions(self, t, probe=None):
        return self._dispatch(t, probe, "positions", False)

    def jacobian(self, t, probe=None):
        return self._dispatch(t, probe, "jacobian", True)

    def reversed(self, direction: int = 0) -> "PiecewiseMembrane":
        if direction != 0:
            return PiecewiseMembrane([(lo, hi, m.reversed(direction)) for lo, hi, m in self.pieces])
        return PiecewiseMembrane([(1 - hi, 1 - lo, m.reversed(0)) for lo, hi, m in reversed(self.pieces)])


def concat_paths(first: Membrane, second: Membrane, endpoint_tol: float = ENDPOINT_TOL) -> PiecewiseMembrane:
    """The path running through ``first`` then ``second`` at double speed."""
    if not (first.is_path and second.is_path):
        raise GeometryError("concat_paths needs two paths")
    if first.ambient_dim != second.ambient_dim:
        raise GeometryError("paths live in different dimensions")
    gap = float(np.max(np.abs(first.positions(np.array([1.0])) - second.positions(np.array([0.0])))))
    if gap > endpoint_tol:
        raise GeometryError(f"end of the first path misses the start of the second by {gap:.3g}")
    return PiecewiseMembrane([(0.0, 0.5, first), (0.5, 1.0, second)])


def glue_membranes(first: Membrane, second: Membrane, face_tol: float = FACE_TOL,
                   test_points: int = 17) -> PiecewiseMembrane:
    """Glue along the first direction: ``first`` on ``t1 <= 1/2``, ``second`` after."""
    if first.cube_dim != second.cube_dim or first.ambient_dim != second.ambient_dim:
        raise GeometryError("membranes differ in dimensions")
    n = first.cube_dim
    if n > 1:
        axes = np.meshgrid(*[np.linspace(0, 1, test_points)] * (n - 1), indexing="ij")
        rest = np.stack(axes, axis=-1).reshape(-1, n - 1)
    else:
        rest = np.zeros((1, 0))
    right = np.concatenate([np.ones((len(rest), 1)), rest], axis=1)
    left = np.concatenate([np.zeros((len(rest), 1)), rest], axis=1)
    gap = float(np.max(np.abs(first.positions(right) - second.positions(left))))
    if gap > face_tol:
        raise GeometryError(f"faces do not match (max gap {gap:.3g})")
    return PiecewiseMembrane([(0.0, 0.5, first), (0.5, 1.0, second)])


def pullback(g: Membrane, form: DifferentialForm):
    if form.degree > g.cube_dim:
        if isinstance(g, SymbolicMembrane):
            return DifferentialForm.zero(g.cube_dim, form.degree, g.variables)
    return g.pullback(form)


class MembraneFamily:
    """A one-parameter family ``u -> g_u`` of symbolic membranes.

    Components are expressions in the cube variables and the parameter.
    """

    def __init__(self, components: Sequence, cube_dim: int, parameter: str = "u",
                 variables: Sequence[str] | None = None):
        self.variables = tuple(variables) if variables is not None else cube_variables(cube_dim)
        self.parameter = parameter
        self.cube_dim = cube_dim
        allvars = self.variables + (parameter,)
        self.components = tuple(ex.as_expression(c, allvars) for c in components)
        self.ambient_dim = len(self.components)

    def at(self, u: float) -> SymbolicMembrane:
        allvars = self.variables + (self.parameter,)
        subs = {self.parameter: ex.constant(u, self.variables)}
        return SymbolicMembrane([c.with_variables(allvars).substitute(subs, self.variables)
                                 for c in self.components], self.variables)

    def as_membrane(self) -> SymbolicMembrane:
        """The family as a membrane of one dimension more (parameter last)."""
        return SymbolicMembrane(self.components, self.variables + (self.parameter,))
