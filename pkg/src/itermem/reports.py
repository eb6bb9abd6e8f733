"""Comparison reports shared by the identity checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass
class CheckReport:
    """Outcome of comparing two computations of the same quantity.

    ``lhs`` and ``rhs`` are floats or nested lists of floats; ``abs_diff`` is
    the largest componentwise difference and ``tolerance`` the absolute
    threshold it was held to.
    """

    name: str
    lhs: Any
    rhs: Any
    abs_diff: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)
    error: str | None = None

    def __bool__(self):
        return self.passed

    def to_dict(self) -> dict:
        out = {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
               "abs_diff": self.abs_diff, "tolerance": self.tolerance, "pass": self.passed}
        if self.details:
            out["details"] = self.details
        if self.error is not None:
            out["error"] = self.error
        return out


def _plain(x):
    a = np.asarray(x, dtype=float)
    return float(a) if a.ndim == 0 else a.tolist()


def compare(name: str, lhs, rhs, rel: float = 0.0, abs_tol: float = 0.0, **details) -> CheckReport:
    """Pass when ``max|lhs - rhs| <= abs_tol + rel * max|lhs|``."""
    a = np.asarray(lhs, dtype=float)
    b = np.asarray(rhs, dtype=float)
    diff = float(np.max(np.abs(a - b), initial=0.0))
    scale = float(np.max(np.abs(a), initial=0.0))
    tol = abs_tol + rel * scale
    ok = bool(np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and diff <= tol)
    return CheckReport(name, _plain(a), _plain(b), diff, tol, ok, dict(details))


def failed(name: str, error: Exception | str, tolerance: float = float("nan")) -> CheckReport:
    """A check that could not be computed (for example quadrature non-convergence)."""
    return CheckReport(name, None, None, float("nan"), tolerance, False, error=str(error))
