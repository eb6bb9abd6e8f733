"""Nested quadrature over products of ordered simplices.

A one-dimensional rule is stored as a *cumulative* weight matrix ``Q`` with
``Q[a, b] ~ weight of node b in the integral from 0 to node a`` together with
the total weights ``w``.  The ordered simplex ``0 < t1 < ... < tk < 1`` is
then integrated by nesting (inner variable from 0 up to the next cut)::

    sum w[ak] f_k[ak] Q[ak, a(k-1)] f_(k-1)[a(k-1)] ... Q[a2, a1] f_1[a1]

i.e. a chain of matrices.  Products of simplices in several directions and
integrands that factor into pieces depending on a few cut variables become a
small tensor network, contracted with :func:`numpy.einsum`.

Grids honour breakpoints: each segment between breakpoints gets its own
nodes, so piecewise-smooth integrands keep the full order of the rule.  Every
node carries a *probe*, a point strictly inside its segment, used to pick the
correct piece at shared breakpoint nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre

from .errors import QuadratureError

RULES = ("trapezoid", "simpson", "gauss")
# convergence order used for Richardson extrapolation between levels
_ORDER = {"trapezoid": 2, "simpson": 4}
MAX_DENSE_POINTS = 20_000_000


@dataclass(frozen=True)
class QuadratureConfig:
    """Settings shared by every integration routine.

    ``points_per_axis`` is the number of subintervals per unit length for the
    Newton-Cotes rules and the number of nodes per unit length for ``gauss``
    (split into cells of ``gauss_order`` nodes).  ``refinement_levels`` grids
    are used, each doubling the previous one; the last two are compared for
    the error estimate.
    """

    points_per_axis: int = 64
    rule: str = "gauss"
    refinement_levels: int = 2
    rel_tol: float = 1e-6
    max_cuts: int = 6
    gauss_order: int = 8

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if self.points_per_axis < 4:
            raise ValueError("points_per_axis must be at least 4")
        if self.rule == "simpson" and self.points_per_axis % 2:
            raise ValueError("simpson needs an even subinterval count")
        if self.refinement_levels < 1:
            raise ValueError("refinement_levels must be at least 1")
        if self.gauss_order < 2:
            raise ValueError("gauss_order must be at least 2")

    def with_(self, **changes) -> "QuadratureConfig":
        return replace(self, **changes)

    def levels(self) -> list[int]:
        return [self.points_per_axis * 2 ** r for r in range(self.refinement_levels)]


DEFAULT = QuadratureConfig()


@dataclass(frozen=True)
class Grid1D:
    nodes: np.ndarray
    probes: np.ndarray
    Q: np.ndarray  # cumulative weights, (P, P), lower triangular in blocks
    w: np.ndarray  # total weights, (P,)
    segments: np.ndarray  # segment id of every node

    def __len__(self):
        return len(self.nodes)


def _newton_cotes_cumulative(n, h, rule):
    """Cumulative matrix (n+1, n+1) on n uniform subintervals of width h."""
    C = np.zeros((n + 1, n + 1))
    if rule == "trapezoid":
        for i in range(1, n + 1):
            C[i] = C[i - 1]
            C[i, i - 1] += h / 2
            C[i, i] += h / 2
        return C
    for i in range(1, n + 1):
        if i % 2 == 0:
            C[i] = C[i - 2]
            C[i, i - 2:i + 1] += np.array([1.0, 4.0, 1.0]) * h / 3
        else:
            # partial panel: integral of the cubic through four neighbours
            C[i] = C[i - 1]
            if i == 1:
                C[i, 0:4] += np.array([9.0, 19.0, -5.0, 1.0]) * h / 24
            else:
                C[i, i - 2:i + 2] += np.array([-1.0, 13.0, 13.0, -1.0]) * h / 24
    return C


@lru_cache(maxsize=None)
def _gauss_reference(p):
    x, wts = legendre.leggauss(p)
    coeffs = np.linalg.inv(legendre.legvander(x, p - 1))  # column r: Lagrange basis r
    S = np.empty((p, p))
    for r in range(p):
        anti = legendre.legint(coeffs[:, r], lbnd=-1)
        S[:, r] = legendre.legval(x, anti)
    return x, wts, S


def _gauss_cumulative(cells, p, a, b):
    x, wts, S = _gauss_reference(p)
    h = (b - a) / cells
    P = cells * p
    nodes = np.empty(P)
    C = np.zeros((P, P))
    w = np.empty(P)
    for c in range(cells):
        lo = a + c * h
        sl = slice(c * p, (c + 1) * p)
        nodes[sl] = lo + (x + 1) * h / 2
        w[sl] = wts * h / 2
        C[sl, :c * p] = w[:c * p]
        C[sl, sl] = S * h / 2
    return nodes, C, w


def _segment_rule(rule, n_sub, a, b, gauss_order):
    length = b - a
    if rule == "gauss":
        cells = max(1, math.ceil(n_sub * length / gauss_order - 1e-9))
        return _gauss_cumulative(cells, gauss_order, a, b)
    n = max(4, math.ceil(n_sub * length - 1e-9))
    if rule == "simpson" and n % 2:
        n += 1
    h = length / n
    C = _newton_cotes_cumulative(n, h, rule)
    return a + h * np.arange(n + 1), C, C[-1].copy()


@lru_cache(maxsize=256)
def _grid_cached(rule, n_sub, breakpoints, gauss_order):
    parts = []
    for s, (a, b) in enumerate(zip(breakpoints[:-1], breakpoints[1:])):
        parts.append((s, a, b) + _segment_rule(rule, n_sub, a, b, gauss_order))
    P = sum(len(p[3]) for p in parts)
    Q = np.zeros((P, P))
    w = np.zeros(P)
    nodes = np.empty(P)
    probes = np.empty(P)
    segments = np.empty(P, dtype=int)
    start = 0
    for s, a, b, x, C, wt in parts:
        sl = slice(start, start + len(x))
        nodes[sl] = x
        probes[sl] = (a + b) / 2
        segments[sl] = s
        Q[sl, :start] = w[:start]
        Q[sl, sl] = C
        w[sl] = wt
        start += len(x)
    for arr in (nodes, probes, Q, w, segments):
        arr.setflags(write=False)
    return Grid1D(nodes, probes, Q, w, segments)


def make_grid(cfg: QuadratureConfig, n_sub: int, breakpoints: Sequence[float] = (0.0, 1.0)) -> Grid1D:
    bps = tuple(sorted(set(float(b) for b in breakpoints)))
    if len(bps) < 2 or bps[0] != 0.0 or bps[-1] != 1.0:
        raise QuadratureError(f"breakpoints must start at 0 and end at 1, got {bps}")
    return _grid_cached(cfg.rule, n_sub, bps, cfg.gauss_order)


# -- refinement ------------------------------------------------------------------

def refine(compute: Callable[[int], float], cfg: QuadratureConfig,
           check: bool = True) -> tuple[float, float]:
    """Run ``compute(n_sub)`` on every refinement level.

    Returns ``(value, error_estimate)``.  For the Newton-Cotes rules the value
    is Richardson-extrapolated from the last two levels; for ``gauss`` it is
    the finest level.  With a single level the estimate is ``nan`` and no
    convergence check is made.
    """
    values = [compute(n) for n in cfg.levels()]
    return finish(values, cfg, check)


def finish(values, cfg, check=True):
    values = [np.asarray(v, dtype=float) for v in values]
    fine = values[-1]
    if len(values) == 1:
        return _unwrap(fine), _unwrap(np.full_like(fine, np.nan))
    coarse = values[-2]
    p = _ORDER.get(cfg.rule)
    if p is None:
        value = fine
        err = np.abs(fine - coarse)
    else:
        factor = 2.0 ** p - 1.0
        value = fine + (fine - coarse) / factor
        err = np.abs(fine - coarse) / factor
    if check:
        bound = cfg.rel_tol * np.maximum(1.0, np.abs(value))
        if np.any(~np.isfinite(value)) or np.any(err > bound):
            raise QuadratureError(
                f"no convergence: error estimate {np.max(err):.3g} exceeds {np.max(bound):.3g}",
                _unwrap(value), _unwrap(err))
    return _unwrap(value), _unwrap(err)


def _unwrap(a):
    return float(a) if np.ndim(a) == 0 else a


# -- contraction -------------------------------------------------------------------

def chain_operands(dims, grids, var_id):
    """Weight factors of the nested rule, as (array, [ids]) pairs."""
    ops = []
    for i, k in enumerate(dims):
        if k == 0:
            continue
        g = grids[i]
        ops.append((g.w, [var_id[(i, k)]]))
        for m in range(k, 1, -1):
            ops.append((g.Q, [var_id[(i, m)], var_id[(i, m - 1)]]))
    return ops


def contract(dims, grids, factors) -> float:
    """Integrate a product of factors over the product of ordered simplices.

    ``factors`` is a list of ``(variables, array)`` where ``variables`` lists
    ``(direction, cut)`` pairs (0-based direction, 1-based cut) matching the
    array axes; an empty list means a scalar factor.
    """
    var_id = {}
    for i, k in enumerate(dims):
        for a in range(1, k + 1):
            var_id[(i, a)] = len(var_id)
    scalar = 1.0
    operands = []
    for variables, arr in factors:
        arr = np.asarray(arr, dtype=float)
        if not variables:
            scalar *= float(arr)
            continue
        operands.append((arr, [var_id[v] for v in variables]))
    if scalar == 0.0:
        return 0.0
    operands = chain_operands(dims, grids, var_id) + operands
    if not operands:
        return scalar
    args = []
    for arr, ids in operands:
        args.extend((arr, ids))
    args.append([])
    return scalar * float(np.einsum(*args, optimize="greedy"))


def _check_dims(dims, cfg):
    dims = tuple(int(k) for k in dims)
    if any(k < 0 for k in dims):
        raise QuadratureError("cut counts must be non-negative")
    if sum(dims) > cfg.max_cuts:
        raise QuadratureError(f"{sum(dims)} cut variables exceed the configured maximum {cfg.max_cuts}")
    return dims


def integrate_ordered(dims: Sequence[int], integrand: Callable, cfg: QuadratureConfig = DEFAULT,
                      breakpoints: Sequence[Sequence[float]] | None = None) -> tuple[float, float]:
    """Integrate over ``prod_i {0 < t_i^1 < ... < t_i^{k_i} < 1}``.

    ``integrand`` receives one array per cut variable, direction by direction
    (``t_1^1 ... t_1^{k_1}, t_2^1, ...``), shaped to broadcast against each
    other, and must return the broadcast product.  The full tensor grid is
    materialised, so keep the number of cut variables small; factored
    integrands should go through :func:`contract`.
    """
    dims = _check_dims(dims, cfg)
    n_vars = sum(dims)
    breakpoints = breakpoints or [(0.0, 1.0)] * len(dims)

    def compute(n_sub):
        grids = [make_grid(cfg, n_sub, bp) for bp in breakpoints]
        sizes = [len(grids[i]) for i, k in enumerate(dims) for _ in range(k)]
        if math.prod(sizes) > MAX_DENSE_POINTS:
            raise QuadratureError("dense grid too large; use a factored integrand")
        args = []
        axis = 0
        variables = []
        for i, k in enumerate(dims):
            for a in range(1, k + 1):
                shape = [1] * n_vars
                shape[axis] = len(grids[i])
                args.append(grids[i].nodes.reshape(shape))
                variables.append((i, a))
                axis += 1
        values = integrand(*args) if n_vars else integrand()
        values = np.broadcast_to(np.asarray(values, dtype=float), tuple(sizes))
        return contract(dims, grids, [(variables, values)] if n_vars else [([], values)])

    return refine(compute, cfg)
