"""Coupling coefficient families ``a_eps(t)``.

Three shapes are available:

``constant``     ``a_eps(t) = a_star``
``sinusoidal``   ``a_eps(t) = a_star + eps * amplitude * sin(omega t)``
``tabulated``    ``a_eps(t) = a_star + eps * (g(t) - a_star)`` with ``g`` the
                 piecewise-linear interpolant of a ``(t, a)`` table, held
                 constant outside the table.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["CoefficientFamily", "BoundsReport", "validate_bounds", "load_table"]

KINDS = ("constant", "sinusoidal", "tabulated")


@dataclass(frozen=True)
class CoefficientFamily:
    kind: str = "sinusoidal"
    a_star: float = 2.0
    amplitude: float = 1.0
    omega: float = 1.0
    table_t: tuple[float, ...] = ()
    table_a: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown coefficient family {self.kind!r}; expected one of {KINDS}")
        if self.kind == "tabulated":
            t = np.asarray(self.table_t, dtype=float)
            if t.size < 2 or t.size != len(self.table_a):
                raise ValueError("tabulated family needs >= 2 (t, a) pairs")
            if np.any(np.diff(t) < 0):
                raise ValueError("table times must be non-decreasing")

    @classmethod
    def constant(cls, a_star: float = 1.0) -> "CoefficientFamily":
        return cls("constant", a_star)

    @classmethod
    def sinusoidal(cls, a_star: float = 2.0, amplitude: float = 1.0,
                   omega: float = 1.0) -> "CoefficientFamily":
        return cls("sinusoidal", a_star, amplitude, omega)

    @classmethod
    def tabulated(cls, t, a, a_star: float | None = None) -> "CoefficientFamily":
        t = tuple(float(x) for x in t)
        a = tuple(float(x) for x in a)
        if a_star is None:
            a_star = float(np.mean(a))
        return cls("tabulated", a_star, table_t=t, table_a=a)

    @classmethod
    def from_csv(cls, path, a_star: float | None = None) -> "CoefficientFamily":
        t, a = load_table(path)
        return cls.tabulated(t, a, a_star)

    def a_eval(self, eps, t):
        _check_eps(eps)
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            out = np.full_like(t, self.a_star)
        elif self.kind == "sinusoidal":
            out = self.a_star + eps * self.amplitude * np.sin(self.omega * t)
        else:
            g = np.interp(t, self.table_t, self.table_a)
            out = self.a_star + eps * (g - self.a_star)
        return float(out) if out.ndim == 0 else out

    __call__ = a_eval

    def a_derivative(self, eps, t):
        _check_eps(eps)
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            out = np.zeros_like(t)
        elif self.kind == "sinusoidal":
            out = eps * self.amplitude * self.omega * np.cos(self.omega * t)
        else:
            # One-sided slope of the interpolant; zero outside the table.
            tt = np.asarray(self.table_t)
            aa = np.asarray(self.table_a)
            i = np.clip(np.searchsorted(tt, t, side="right") - 1, 0, len(tt) - 2)
            dt = tt[i + 1] - tt[i]
            with np.errstate(divide="ignore", invalid="ignore"):
                slope = np.where(dt > 0, (aa[i + 1] - aa[i]) / dt, np.inf)
            inside = (t >= tt[0]) & (t < tt[-1])
            out = np.where(inside, eps * slope, 0.0)
        return float(out) if out.ndim == 0 else out

    def sup_deviation(self, eps) -> float:
        """``sup_t |a_eps(t) - a_0(t)|``, exact for every family."""
        _check_eps(eps)
        if self.kind == "constant":
            return 0.0
        if self.kind == "sinusoidal":
            return float(eps * abs(self.amplitude))
        return float(eps * np.max(np.abs(np.asarray(self.table_a) - self.a_star)))

    def describe(self) -> dict:
        out = {"kind": self.kind, "a_star": self.a_star}
        if self.kind == "sinusoidal":
            out.update(amplitude=self.amplitude, omega=self.omega)
        elif self.kind == "tabulated":
            out.update(table_points=len(self.table_t))
        return out


def _check_eps(eps):
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {eps}")


def load_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column ``t,a`` CSV; a non-numeric first row is treated as a header."""
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if i == 0:
                    continue
                raise ValueError(f"{path}: bad row {i + 1}: {row!r}") from None
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two (t, a) rows")
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]


@dataclass(frozen=True)
class BoundsReport:
    a0: float
    a1: float
    b0: float | None
    beta: float
    C: float
    holder_quotients: tuple[float, ...]
    derivative_checked: bool
    passed: bool

    def as_dict(self) -> dict:
        return {
            "a0": self.a0, "a1": self.a1, "b0": self.b0, "beta": self.beta, "C": self.C,
            "holder_quotients": list(self.holder_quotients),
            "derivative_checked": self.derivative_checked, "passed": self.passed,
        }


def validate_bounds(family: CoefficientFamily, t_range=(0.0, 2 * np.pi),
                    eps_grid=(0.0, 0.25, 0.5, 0.75, 1.0), samples: int = 1001,
                    refinements: int = 8) -> BoundsReport:
    """Sampled check of the positivity, derivative and Hölder hypotheses.

    The Hölder exponent is estimated from how ``max |a(t+h) - a(t)|`` shrinks
    over the step sweep ``h_j = h_0 2^-j``: a slope near 1 means Lipschitz, a
    slope near 0 (a jump) makes the quotient diverge and fails the check.
    Derivatives of tabulated data are not validated.
    """
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    t = np.linspace(t_range[0], t_range[1], samples)
    h0 = (t_range[1] - t_range[0]) / (samples - 1)
    hs = h0 * 2.0 ** -np.arange(refinements + 1)
    a_min, a_max, b0 = np.inf, -np.inf, 0.0
    dmax = np.zeros(len(hs))
    for eps in eps_grid:
        a = family.a_eval(eps, t)
        a_min, a_max = min(a_min, float(a.min())), max(a_max, float(a.max()))
        if family.kind != "tabulated":
            b0 = max(b0, float(np.max(np.abs(family.a_derivative(eps, t)))))
        for j, h in enumerate(hs):
            # Pairs (t, t+h) with t on a grid of spacing h so every jump is straddled.
            tt = np.arange(t_range[0], t_range[1], h)
            if tt.size == 0:
                continue
            dmax[j] = max(dmax[j], float(np.max(np.abs(family.a_eval(eps, tt + h) - family.a_eval(eps, tt)))))
    if np.all(dmax == 0):
        beta, quotients = 1.0, np.zeros(len(hs))
    else:
        good = dmax > 0
        slope = np.polyfit(np.log(hs[good]), np.log(dmax[good]), 1)[0]
        beta = float(np.clip(slope, 0.0, 1.0))
        quotients = dmax / hs ** max(beta, 1e-12)
    # A divergent quotient keeps doubling as h halves.
    q_stable = beta > 0.25 and (quotients[-1] <= 1.5 * quotients[-2] + 1e-15)
    passed = bool(a_min > 0 and np.all(np.isfinite(quotients)) and q_stable)
    return BoundsReport(
        a0=a_min, a1=a_max, b0=None if family.kind == "tabulated" else b0, beta=beta,
        C=float(np.max(quotients)), holder_quotients=tuple(float(q) for q in quotients),
        derivative_checked=family.kind != "tabulated", passed=passed,
    )
