"""Iterated integrals over membranes.

A labeled integrand on the n-cube has cut counts ``k = (k_1..k_n)`` and
slots indexed by ``j`` with ``0 <= j_i <= k_i + 1``.  Slot ``j`` carries a
form ``omega_j`` and a direction set ``J_j``; its value is the coefficient of
``dt_{J_j}`` (increasing order) in the pullback of ``omega_j``, evaluated at
``(t_1^{j_1}, ..., t_n^{j_n})`` with ``t_i^0 = 0`` and ``t_i^{k_i+1} = 1``.
The integral is the integral of the product of all slot values over

    D = prod_i {0 < t_i^1 < ... < t_i^{k_i} < 1}.

Orientation: the slot differentials are wedged in lexicographic order of
``j`` (``j_1`` most significant) and ``D`` is oriented by that very wedge,
so the canonical sign is +1.  Listing the slots in another order
(``slot_order``) multiplies by the sign of the induced permutation of the
cut differentials.

Admissibility: every interior cut ``(i, a)`` (``1 <= a <= k_i``) must be
consumed exactly once, i.e. appear as ``i in J_j`` with ``j_i = a`` for
exactly one slot; boundary indices may not be consumed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import quadrature as qd
from .errors import IntegrandError, ShuffleError
from .forms import DifferentialForm, wedge
from .geometry import Membrane, glue_membranes
from .reports import CheckReport, compare
from .shuffles import enumerate_product, enumerate_sh1, enumerate_shn, is_shuffle

Index = tuple[int, ...]
@dataclass(frozen=True)
class Slot:
    """Form and consumed directions of one slot.

    ``piece`` restricts the slot to one piece of a piecewise membrane: the
    slot value is zero wherever the evaluation point lies in another piece.
    """

    form: DifferentialForm
    J: tuple[int, ...] = ()
    piece: int | None = None

    def __post_init__(self):
        J = tuple(int(i) for i in self.J)
        if len(set(J)) != len(J):
            raise IntegrandError(f"direction set {J} repeats a direction")
        object.__setattr__(self, "J", tuple(sorted(J)))


def _as_slot(value) -> Slot:
    if isinstance(value, Slot):
        return value
    if isinstance(value, DifferentialForm):
        return Slot(value)
    return Slot(*value)


class LabeledIntegrand:
    """Cut counts plus a map from slot index to :class:`Slot`.

    Unlisted slots carry the unit 0-form and consume nothing.
    """

    def __init__(self, cube_dim: int, cuts: Sequence[int], slots: Mapping | None = None):
        cuts = tuple(int(k) for k in cuts)
        if cube_dim < 0 or len(cuts) != cube_dim:
            raise IntegrandError(f"{cube_dim} cut counts expected, got {len(cuts)}")
        if any(k < 0 for k in cuts):
            raise IntegrandError("cut counts must be non-negative")
        table = {}
        for j, value in (slots or {}).items():
            j = (j,) if isinstance(j, int) else tuple(int(x) for x in j)
            if len(j) != cube_dim:
                raise IntegrandError(f"slot index {j} does not have {cube_dim} entries")
            if any(not 0 <= a <= k + 1 for a, k in zip(j, cuts)):
                raise IntegrandError(f"slot index {j} outside 0..k+1 for cuts {cuts}")
            table[j] = _as_slot(value)
        self.cube_dim = cube_dim
        self.cuts = cuts
        self.slots: dict[Index, Slot] = dict(sorted(table.items()))

    def __repr__(self):
        body = {j: (str(s.form), s.J) + ((s.piece,) if s.piece is not None else ())
                for j, s in self.slots.items()}
        return f"LabeledIntegrand(n={self.cube_dim}, k={self.cuts}, {body})"

    @property
    def ambient_dim(self) -> int | None:
        for s in self.slots.values():
            return s.form.dim
        return None

    def has_boundary_slots(self) -> bool:
        return any(a in (0, k + 1) for j in self.slots for a, k in zip(j, self.cuts))

    def consumption(self, order: Sequence[Index] | None = None) -> list[tuple[int, int]]:
        """Cut differentials ``(direction, cut)`` in the order the slots produce them."""
        order = list(self.slots) if order is None else [tuple(j) for j in order]
        out = []
        for j in order:
            slot = self.slots.get(j)
            if slot is not None:
                out.extend((i, j[i - 1]) for i in slot.J)
        return out

    def with_pieces(self, piece: int) -> "LabeledIntegrand":
        return LabeledIntegrand(self.cube_dim, self.cuts,
                                {j: Slot(s.form, s.J, piece) for j, s in self.slots.items()})


def path_integrand(forms: Sequence[DifferentialForm]) -> LabeledIntegrand:
    """The 1-cube integrand of an ordinary iterated path integral."""
    return LabeledIntegrand(1, (len(forms),), {(a,): Slot(f, (1,)) for a, f in enumerate(forms, 1)})


def unit_integrand(cube_dim: int) -> LabeledIntegrand:
    return LabeledIntegrand(cube_dim, (0,) * cube_dim)


@dataclass
class Validation:
    ok: bool
    problems: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.ok

    def __str__(self):
        return "ok" if self.ok else "; ".join(self.problems)


def validate(integrand: LabeledIntegrand, check_degrees: bool = True,
             extra_degree: Mapping[Index, int] | None = None) -> Validation:
    """Check admissibility; problems name the offending direction and index.

    ``extra_degree`` lists slots whose form degree exceeds ``|J|`` by the
    given amount (slots that also pair with a direction outside the cube).
    """
    problems = []
    k = integrand.cuts
    extra_degree = extra_degree or {}
    seen: dict[tuple[int, int], list[Index]] = {}
    dims = set()
    for j, slot in integrand.slots.items():
        dims.add(slot.form.dim)
        for i in slot.J:
            if not 1 <= i <= integrand.cube_dim:
                problems.append(f"slot {list(j)}: direction {i} outside 1..{integrand.cube_dim}")
                continue
            a = j[i - 1]
            if a in (0, k[i - 1] + 1):
                problems.append(f"slot {list(j)}: consumes boundary index {a} in direction {i}")
                continue
            seen.setdefault((i, a), []).append(j)
        want = len(slot.J) + extra_degree.get(j, 0)
        if check_degrees and not slot.form.is_zero and slot.form.degree != want:
            problems.append(f"slot {list(j)}: form of degree {slot.form.degree} "
                            f"but {want} directions")
    for i in range(1, integrand.cube_dim + 1):
        for a in range(1, k[i - 1] + 1):
            users = seen.get((i, a), [])
            if not users:
                problems.append(f"direction {i}, cut {a} is not consumed")
            elif len(users) > 1:
                problems.append(f"direction {i}, cut {a} is consumed {len(users)} times "
                                f"(slots {[list(u) for u in users]})")
    if len(dims) > 1:
        problems.append(f"slot forms live in different dimensions {sorted(dims)}")
    return Validation(not problems, problems)


def _require_valid(integrand, g: Membrane | None = None, **kw):
    v = validate(integrand, **kw)
    if not v:
        raise IntegrandError(f"invalid integrand: {v}")
    if g is not None:
        d = integrand.ambient_dim
        if d is not None and d != g.ambient_dim:
            raise IntegrandError(f"forms live in dimension {d}, membrane in {g.ambient_dim}")


def _permutation_sign(seq, reference) -> int:
    pos = {x: n for n, x in enumerate(reference)}
    perm = [pos[x] for x in seq]
    sign = 1
    for a in range(len(perm)):
        for b in range(a + 1, len(perm)):
            if perm[a] > perm[b]:
                sign = -sign
    return sign


def orientation_sign(integrand: LabeledIntegrand, slot_order: Sequence[Index] | None) -> int:
    """Sign of wedging the slots in ``slot_order`` relative to lexicographic order."""
    if slot_order is None:
        return 1
    order = [tuple(j) for j in slot_order]
    if sorted(order) != sorted(integrand.slots):
        raise IntegrandError("slot_order must list every slot exactly once")
    return _permutation_sign(integrand.consumption(order), integrand.consumption())


# -- evaluation engine -------------------------------------------------------------

class _Engine:
    """Slot arrays on one refinement level, cached across many integrands.

    ``grids`` covers the integrand's directions; when ``free`` is given the
    membrane has one more direction, held at the free nodes, which becomes the
    output axis of every contraction.
    """

    def __init__(self, g: Membrane, grids, free=None):
        self.g = g
        self.grids = grids
        self.free = free
        self.cache = {}

    def slot_array(self, slot: Slot, J_full, pattern):
        key = (id(slot.form), J_full, slot.piece, pattern)
        hit = self.cache.get(key)
        if hit is not None:
            return hit[1]
        axes_nodes, axes_probes = [], []
        for i, p in enumerate(pattern):
            if p == "c":
                axes_nodes.append(self.grids[i].nodes)
                axes_probes.append(self.grids[i].probes)
            else:
                axes_nodes.append(np.array([p]))
                axes_probes.append(np.array([p]))
        if self.free is not None:
            axes_nodes.append(self.free[0])
            axes_probes.append(self.free[1])
        pts = np.stack(np.meshgrid(*axes_nodes, indexing="ij"), axis=-1)
        probes = np.stack(np.meshgrid(*axes_probes, indexing="ij"), axis=-1)
        values = self.g.component(slot.form, J_full, pts, probes)
        if slot.piece is not None:
            values = values * (self.g.piece_of(pts, probes) == slot.piece)
        keep = [a for a, p in enumerate(pattern) if p == "c"]
        if self.free is not None:
            keep.append(len(pattern))
        values = values.reshape([values.shape[a] for a in keep])
        self.cache[key] = (slot.form, values)
        return values

    def integrate(self, integrand: LabeledIntegrand, designated: Index | None = None):
        """Contract one integrand; returns a float, or an array over the free nodes."""
        k = integrand.cuts
        n_free = len(self.free[0]) if self.free is not None else None
        zero = 0.0 if n_free is None else np.zeros(n_free)
        var_id = {}
        for i, ki in enumerate(k):
            for a in range(1, ki + 1):
                var_id[(i, a)] = len(var_id)
        free_id = len(var_id)
        ops = []
        scalar = 1.0
        for j, slot in integrand.slots.items():
            if slot.form.is_zero:
                return zero
            J_full = slot.J + ((len(k) + 1,) if j == designated else ())
            pattern = tuple("c" if 1 <= a <= ki else (0.0 if a == 0 else 1.0)
                            for a, ki in zip(j, k))
            arr = self.slot_array(slot, J_full, pattern)
            ids = [var_id[(i, a)] for i, a in enumerate(j) if pattern[i] == "c"]
            if self.free is not None:
                ids.append(free_id)
            if not ids:
                scalar *= float(arr)
            else:
                ops.append((arr, ids))
        if scalar == 0.0:
            return zero
        ops = qd.chain_operands(k, self.grids, var_id) + ops
        out = []
        if self.free is not None:
            ops.append((np.ones(n_free), [free_id]))
            out = [free_id]
        if not ops:
            return scalar
        args = []
        for arr, ids in ops:
            args.extend((arr, ids))
        args.append(out)
        result = np.einsum(*args, optimize="greedy")
        return scalar * (float(result) if self.free is None else result)


def _grids(g, cfg, n_sub, count):
    return [qd.make_grid(cfg, n_sub, g.breakpoints(i)) for i in range(count)]


def integrate_many(g: Membrane, integrands: Sequence[LabeledIntegrand],
                   cfg: qd.QuadratureConfig = qd.DEFAULT, signs: Sequence[int] | None = None,
                   check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Values and error estimates of several integrands over one membrane.

    The integrands must already be validated.  Slot arrays are shared between
    integrands on each refinement level.
    """
    integrands = list(integrands)
    signs = np.ones(len(integrands)) if signs is None else np.asarray(signs, dtype=float)
    for I in integrands:
        if I.cube_dim != g.cube_dim:
            raise IntegrandError(f"integrand on a {I.cube_dim}-cube, membrane on a {g.cube_dim}-cube")
        qd._check_dims(I.cuts, cfg)

    def compute(n_sub):
        engine = _Engine(g, _grids(g, cfg, n_sub, g.cube_dim))
        return signs * np.array([engine.integrate(I) for I in integrands], dtype=float)

    if not integrands:
        return np.zeros(0), np.zeros(0)
    values, errors = qd.refine(compute, cfg, check)
    return np.atleast_1d(values), np.atleast_1d(errors)


def integrate_membrane(g: Membrane, integrand: LabeledIntegrand,
                       cfg: qd.QuadratureConfig = qd.DEFAULT,
                       slot_order: Sequence[Index] | None = None) -> tuple[float, float]:
    """``(value, error_estimate)`` of one membrane iterated integral."""
    _require_valid(integrand, g)
    sign = orientation_sign(integrand, slot_order)
    values, errors = integrate_many(g, [integrand], cfg, [sign])
    return float(values[0]), float(errors[0])


# -- shuffles of integrands ----------------------------------------------------------

def _index_map(rho_i, offset, k_block, k_total, barred):
    """Image of a block-local index in one direction."""
    def f(a):
        if a == 0:
            return 0
        if a == k_block + 1:
            return k_total + 1
        return rho_i[offset + a] if barred else rho_i[offset + a - 1]
    return f


def _place(blocks, k_total, rho, barred):
    """Merge per-block slot tables into one, wedging slots that collide."""
    merged: dict[Index, Slot] = {}
    for b, (I, offsets) in enumerate(blocks):
        maps = [_index_map(rho[i], offsets[i], I.cuts[i], k_total[i], barred)
                for i in range(len(k_total))]
        for j, slot in I.slots.items():
            new_j = tuple(m(a) for m, a in zip(maps, j))
            if new_j in merged:
                old = merged[new_j]
                if old.J or slot.J:
                    raise ShuffleError(f"slots collide at {new_j} while consuming directions")
                merged[new_j] = Slot(wedge(old.form, slot.form), (), old.piece)
            else:
                merged[new_j] = slot
    return merged


def shuffle_combine(first: LabeledIntegrand, second: LabeledIntegrand, rho,
                    barred: bool = False) -> LabeledIntegrand:
    """The integrand indexed by one (barred) product shuffle of the cut sets.

    Direction ``i`` sends cut ``a`` of ``first`` to ``rho_i(a)`` and cut ``a``
    of ``second`` to ``rho_i(k'_i + a)``; boundary indices stay at the
    boundary.  Boundary slots landing on the same index are wedged, the form
    of ``first`` on the left.
    """
    if first.cube_dim != second.cube_dim:
        raise ShuffleError("integrands live on cubes of different dimension")
    n = first.cube_dim
    rho = tuple(tuple(r) for r in rho)
    if len(rho) != n:
        raise ShuffleError(f"shuffle has {len(rho)} directions, cube has {n}")
    for i in range(n):
        if not is_shuffle(rho[i], (first.cuts[i], second.cuts[i]), barred):
            raise ShuffleError(f"direction {i + 1}: {rho[i]} is not a "
                               f"{'barred ' if barred else ''}shuffle of "
                               f"({first.cuts[i]}, {second.cuts[i]})")
    if not barred and (first.has_boundary_slots() or second.has_boundary_slots()):
        raise ShuffleError("boundary slots need a barred shuffle")
    k = tuple(a + b for a, b in zip(first.cuts, second.cuts))
    blocks = [(first, (0,) * n), (second, first.cuts)]
    return LabeledIntegrand(n, k, _place(blocks, k, rho, barred))


def check_membrane_shuffle(g: Membrane, first: LabeledIntegrand, second: LabeledIntegrand,
                           barred: bool = False, cfg: qd.QuadratureConfig = qd.DEFAULT,
                           tol: float = 1e-5, name: str = "membrane-shuffle") -> CheckReport:
    """Product of two membrane integrals against the sum over product shuffles."""
    _require_valid(first, g)
    _require_valid(second, g)
    shuffles = enumerate_product(first.cuts, second.cuts, barred)
    combined = [shuffle_combine(first, second, rho, barred) for rho in shuffles]
    (v1, v2), _ = integrate_many(g, [first, second], cfg)
    terms, _ = integrate_many(g, combined, cfg)
    return compare(name, v1 * v2, float(np.sum(terms)), rel=tol, abs_tol=tol,
                   shuffles=len(shuffles), factors=[float(v1), float(v2)])


def glued_combine(first: LabeledIntegrand, second: LabeledIntegrand, rho) -> LabeledIntegrand:
    """Combined integrand over a glued membrane for one gluing shuffle.

    Slots of ``first`` are restricted to the first piece and slots of
    ``second`` to the second piece, so the cuts of each factor in direction 1
    stay inside their own half.
    """
    for j in first.slots:
        if j[0] == first.cuts[0] + 1:
            raise IntegrandError(f"slot {list(j)} of the first factor sits on the glued face")
    for j in second.slots:
        if j[0] == 0:
            raise IntegrandError(f"slot {list(j)} of the second factor sits on the glued face")
    return shuffle_combine(first.with_pieces(0), second.with_pieces(1), rho, barred=True)


def check_glued_product(g1: Membrane, g2: Membrane, first: LabeledIntegrand,
                        second: LabeledIntegrand, cfg: qd.QuadratureConfig = qd.DEFAULT,
                        tol: float = 1e-5, face_tol: float = 1e-9,
                        name: str = "glued-product") -> CheckReport:
    """Product of integrals over two membranes against the glued shuffle sum."""
    glued = glue_membranes(g1, g2, face_tol)
    _require_valid(first, g1)
    _require_valid(second, g2)
    shuffles = enumerate_sh1(first.cuts, second.cuts)
    combined = [glued_combine(first, second, rho) for rho in shuffles]
    (v1,), _ = integrate_many(g1, [first], cfg)
    (v2,), _ = integrate_many(g2, [second], cfg)
    terms, _ = integrate_many(glued, combined, cfg)
    return compare(name, v1 * v2, float(np.sum(terms)), rel=tol, abs_tol=tol,
                   shuffles=len(shuffles), factors=[float(v1), float(v2)])


def check_glued_paths(gamma1: Membrane, gamma2: Membrane, forms: Sequence[DifferentialForm],
                      level: int, cfg: qd.QuadratureConfig = qd.DEFAULT, tol: float = 1e-9,
                      name: str = "glued-paths") -> CheckReport:
    """One-dimensional gluing against the product of transport series.

    For every word ``w`` the glued sums over all splittings ``w = u v`` are
    compared with the coefficient of the series product.  Each half of the
    glued path only gets half the nodes; Simpson at the default density
    cannot meet the tight tolerance here, Gauss can.
    """
    from .chen import all_words, series_multiply, transport_series

    glued = glue_membranes(gamma1, gamma2)
    m = len(forms)
    words = [w for w in all_words(m, level) if w]
    integrands, owners = [], []
    for idx, w in enumerate(words):
        for cut in range(len(w) + 1):
            u = path_integrand([forms[a - 1] for a in w[:cut]])
            v = path_integrand([forms[a - 1] for a in w[cut:]])
            integrands.append(glued_combine(u, v, ((tuple(range(len(w) + 2))),)))
            owners.append(idx)
    values, _ = integrate_many(glued, integrands, cfg)
    glued_coeffs = np.zeros(len(words))
    np.add.at(glued_coeffs, owners, values)
    product = series_multiply(transport_series(gamma1, forms, level, cfg),
                              transport_series(gamma2, forms, level, cfg))
    return compare(name, [product[w] for w in words], glued_coeffs.tolist(), abs_tol=tol,
                   words=len(words))


# -- components along the last direction and higher transport ---------------------------

def _check_designated(g: Membrane, integrand: LabeledIntegrand, designated):
    if integrand.cube_dim != g.cube_dim - 1:
        raise IntegrandError(f"integrand must live on a {g.cube_dim - 1}-cube")
    if designated is None:
        if integrand.slots:
            raise IntegrandError("a designated slot is required when the integrand has slots")
        return None
    designated = (designated,) if isinstance(designated, int) else tuple(designated)
    if designated not in integrand.slots:
        raise IntegrandError(f"designated slot {list(designated)} is not a slot of the integrand")
    _require_valid(integrand, g, extra_degree={designated: 1})
    return designated


class ComponentFunction:
    """``s -> a(s)``: the integral over the slice ``t_n = s`` with the
    designated slot paired with ``dt_n``."""

    def __init__(self, g, integrand, designated, cfg):
        self.g = g
        self.integrand = integrand
        self.designated = designated
        self.cfg = cfg

    def on_nodes(self, n_sub, nodes, probes):
        """Values at given nodes for one refinement level (no error control)."""
        grids = _grids(self.g, self.cfg, n_sub, self.g.cube_dim - 1)
        engine = _Engine(self.g, grids, free=(np.asarray(nodes, float), np.asarray(probes, float)))
        return np.broadcast_to(engine.integrate(self.integrand, self.designated), np.shape(nodes))

    def with_error(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        values, errors = qd.refine(lambda n: self.on_nodes(n, s, s), self.cfg)
        return np.atleast_1d(values), np.atleast_1d(errors)

    def __call__(self, s):
        scalar = np.ndim(s) == 0
        values = self.with_error(s)[0]
        return float(values[0]) if scalar else values


def extract_component(g: Membrane, integrand: LabeledIntegrand, designated,
                      cfg: qd.QuadratureConfig = qd.DEFAULT) -> ComponentFunction:
    """The coefficient ``a(s)`` of the 1-form induced along the last direction.

    ``integrand`` lives on the (n-1)-cube of the first directions.  Every slot
    is evaluated on the slice ``t_n = s``; the designated slot takes the
    coefficient of ``dt_J ^ dt_n`` of the pullback (its form has degree
    ``|J| + 1``), the others the coefficient of ``dt_J``.
    """
    designated = _check_designated(g, integrand, designated)
    if designated is None:
        raise IntegrandError("extract_component needs a designated slot")
    return ComponentFunction(g, integrand, designated, cfg)


def transport_integrands(W: LabeledIntegrand, w_slot, T: LabeledIntegrand, t_slot,
                         copies: int) -> list[LabeledIntegrand]:
    """The n-cube integrands of the transport shuffle sum, in shuffle order.

    Blocks are ``W`` followed by ``copies`` copies of ``T``.  Directions
    ``1..n-1`` interleave the blocks' cuts by a multi-block shuffle.  In
    direction ``n`` every block with a designated slot occupies its own cut,
    in block order; all of its slots are evaluated there and the designated
    slot additionally consumes it.
    """
    m = W.cube_dim
    if T.cube_dim != m:
        raise IntegrandError("W and T live on cubes of different dimension")
    if t_slot is None:
        raise IntegrandError("T needs a designated slot")
    w_slot = None if w_slot is None else ((w_slot,) if isinstance(w_slot, int) else tuple(w_slot))
    t_slot = (t_slot,) if isinstance(t_slot, int) else tuple(t_slot)
    if w_slot is None and W.slots:
        raise IntegrandError("W has slots but no designated slot")
    blocks = [(W, w_slot)] + [(T, t_slot)] * copies
    kn = sum(1 for _, d in blocks if d is not None)
    k_low = tuple(W.cuts[i] + copies * T.cuts[i] for i in range(m))
    n = m + 1
    out = []
    # the trailing 1 stands for direction n, whose shuffle is the identity
    for rho in enumerate_shn(W.cuts + (1,), T.cuts + (1,), copies):
        slots: dict[Index, Slot] = {}
        position = 0
        for b, (I, d) in enumerate(blocks):
            if d is None:
                continue
            position += 1
            offsets = [W.cuts[i] + (b - 1) * T.cuts[i] if b else 0 for i in range(m)]
            maps = [_index_map(rho[i], offsets[i], I.cuts[i], k_low[i], False) for i in range(m)]
            for j, slot in I.slots.items():
                new_j = tuple(f(a) for f, a in zip(maps, j)) + (position,)
                J = slot.J + ((n,) if j == d else ())
                slots[new_j] = Slot(slot.form, J, slot.piece)
        out.append(LabeledIntegrand(n, k_low + (kn,), slots))
    return out


def higher_transport(g: Membrane, W: LabeledIntegrand, w_slot, T: LabeledIntegrand, t_slot,
                     copies: int, cfg: qd.QuadratureConfig = qd.DEFAULT, tol: float = 1e-4,
                     name: str = "higher-transport") -> tuple[float, CheckReport]:
    """Transport of ``W`` by ``copies`` iterations of ``T`` along direction n.

    The value is the sum over the transport shuffles of membrane integrals
    over ``g``.  Independently, ``a_W`` and ``a_T`` are computed slice by
    slice with :func:`extract_component` and fed to an ordinary iterated
    integral in the last direction; the report compares the two.
    """
    if copies < 1:
        raise ShuffleError("copies must be at least 1")
    w_slot = _check_designated(g, W, w_slot)
    t_slot = _check_designated(g, T, t_slot)
    if t_slot is None:
        raise IntegrandError("T needs a designated slot")
    combined = transport_integrands(W, w_slot, T, t_slot, copies)
    for I in combined:
        _require_valid(I, g)
    terms, _ = integrate_many(g, combined, cfg)
    rhs = float(np.sum(terms))

    last = g.cube_dim - 1
    a_T = ComponentFunction(g, T, t_slot, cfg)
    a_W = ComponentFunction(g, W, w_slot, cfg) if w_slot is not None else None

    def lhs_level(n_sub):
        grid = qd.make_grid(cfg, n_sub, g.breakpoints(last))
        rows = ([a_W.on_nodes(n_sub, grid.nodes, grid.probes)] if a_W else []) + \
            [a_T.on_nodes(n_sub, grid.nodes, grid.probes)] * copies
        r = np.ones(len(grid))
        for a in rows[:-1]:
            r = grid.Q @ (a * r)
        return float(grid.w @ (rows[-1] * r))

    lhs, _ = qd.refine(lhs_level, cfg)
    report = compare(name, lhs, rhs, rel=tol, abs_tol=1e-12, shuffles=len(combined), copies=copies)
    return rhs, report
