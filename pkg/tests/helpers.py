"""Random test data and independent oracles shared by the test modules."""
from __future__ import annotations

import itertools

import numpy as np
from scipy.integrate import solve_ivp

from itermem.forms import DifferentialForm, default_variables
from itermem.geometry import SymbolicMembrane, cube_variables


def coef(rng, lo=-1.0, hi=1.0):
    return f"{round(float(rng.uniform(lo, hi)), 3)!r}"


def random_poly(variables, rng, degree=2, terms=3):
    """A random polynomial (as source text) of total degree <= ``degree``."""
    parts = [coef(rng)]
    for _ in range(terms):
        powers = rng.integers(0, degree + 1, size=len(variables))
        while powers.sum() > degree:
            powers[int(np.argmax(powers))] -= 1
        mono = "*".join(f"{v}^{p}" for v, p in zip(variables, powers) if p)
        parts.append(f"({coef(rng)})" + (f"*{mono}" if mono else ""))
    return " + ".join(parts)


def random_form(dim, degree, rng, poly_degree=2, terms=2):
    variables = default_variables(dim)
    coeffs = {idx: random_poly(variables, rng, poly_degree, terms)
              for idx in itertools.combinations(range(1, dim + 1), degree)}
    return DifferentialForm(dim, degree, coeffs)


def random_cubic_path(dim, rng, start=None):
    """``t -> start + c1 t + c2 t^2 + c3 t^3`` with random coefficients."""
    start = rng.uniform(-1, 1, dim) if start is None else np.asarray(start, float)
    comps = []
    for a in range(dim):
        c = [float(v) for v in rng.uniform(-1, 1, 3).round(3)]
        comps.append(f"{float(start[a])!r} + ({c[0]!r})*t1 + ({c[1]!r})*t1^2 + ({c[2]!r})*t1^3")
    return SymbolicMembrane(comps, ("t1",))


def random_membrane(n, dim, rng, degree=2, terms=3, identity_part=True):
    """A random polynomial membrane; with ``identity_part`` the first two
    components lean on ``t1`` and ``t2`` so the map stays non-degenerate."""
    variables = cube_variables(n)
    comps = []
    for a in range(dim):
        base = variables[a] + " + 0.3*(" if identity_part and a < n else "("
        comps.append(base + random_poly(variables, rng, degree, terms) + ")")
    return SymbolicMembrane(comps, variables)


def ode_iterated_integral(gamma, forms, rtol=1e-12, atol=1e-14):
    """Iterated path integral by solving ``y_k' = a_k(t) y_{k-1}``, ``y_0 = 1``.

    The pullback coefficient is ``omega(gamma(t)) . gamma'(t)``, with the
    velocity from the symbolic Jacobian of the path.
    """
    from itermem.forms import evaluate_coefficients

    def a(t):
        tt = np.array([[t]])
        x = gamma.positions(tt)
        v = gamma.jacobian(tt)[0, :, 0]
        out = []
        for f in forms:
            vals = evaluate_coefficients(f, x)
            out.append(sum(float(vals[(i,)][0]) * v[i - 1] for (i,) in vals))
        return out

    m = len(forms)

    def rhs(t, y):
        coeffs = a(t)
        dy = np.zeros(m + 1)
        for k in range(1, m + 1):
            dy[k] = coeffs[k - 1] * y[k - 1]
        return dy

    y0 = np.zeros(m + 1)
    y0[0] = 1.0
    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=rtol, atol=atol)
    return float(sol.y[m, -1])


def random_integrand(n, cuts, dim, rng, boundary=False, poly_degree=1, terms=2, max_tries=100):
    """A random admissible labeled integrand.

    Every interior cut is handed to a slot (an existing one when its index is
    still free in that direction, else a new one); leftover coordinates are
    drawn at random, from the boundary too when ``boundary`` is set.
    """
    from itermem.membranes import LabeledIntegrand, Slot

    if not boundary and 0 in cuts:
        raise ValueError("without boundary slots every direction needs a cut")
    for _ in range(max_tries):
        slots = []  # each: {direction: cut}
        for i in range(n):
            for a in range(1, cuts[i] + 1):
                free = [s for s in slots if i not in s]
                if free and rng.random() < 0.5:
                    free[int(rng.integers(len(free)))][i] = a
                else:
                    slots.append({i: a})
        if boundary or not slots:
            for _ in range(int(rng.integers(0, 2)) + (0 if slots else 1)):
                slots.append({})
        table = {}
        for s in slots:
            j = []
            for i in range(n):
                if i in s:
                    j.append(s[i])
                    continue
                lo, hi = (0, cuts[i] + 1) if boundary else (1, cuts[i])
                j.append(int(rng.integers(lo, hi + 1)))
            J = tuple(i + 1 for i in sorted(s))
            if tuple(j) in table:
                break
            table[tuple(j)] = Slot(random_form(dim, len(J), rng, poly_degree, terms), J)
        else:
            return LabeledIntegrand(n, cuts, table)
    raise RuntimeError("could not build an integrand")


VARS = ("x", "y", "z")


def random_expression(rng, depth=0):
    """Random polynomial/trig expression source text."""
    if depth >= 3 or rng.random() < 0.25:
        if rng.random() < 0.5:
            return str(rng.choice(VARS))
        return f"{rng.uniform(-2, 2):.3f}"
    kind = int(rng.integers(0, 8))
    a = random_expression(rng, depth + 1)
    if kind == 0:
        return f"({a}) + ({random_expression(rng, depth + 1)})"
    if kind == 1:
        return f"({a}) - ({random_expression(rng, depth + 1)})"
    if kind == 2:
        return f"({a}) * ({random_expression(rng, depth + 1)})"
    if kind == 3:
        return f"({a})^{int(rng.integers(0, 4))}"
    if kind == 4:
        return f"-({a})"
    return f"{['sin', 'cos', 'exp'][kind - 5]}(({a})/3)"
