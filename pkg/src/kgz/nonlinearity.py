"""Admissible nonlinearities ``f`` and their Nemitskii lift.

Catalogue members satisfy ``f in C^1``, ``limsup f(s)/s <= 0`` and the growth
bound ``|f'(s)| <= c (1 + |s|^(rho-1))`` with the declared ``(c, rho)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spectral import Domain, SpectralField

__all__ = [
    "Nonlinearity",
    "GrowthReport",
    "make_nonlinearity",
    "nemitskii",
    "nemitskii_coeffs",
    "potential",
    "dissipativity_bound",
    "validate_growth",
    "CATALOGUE",
]

CATALOGUE = ("zero", "damped_power", "sine")


@dataclass(frozen=True)
class Nonlinearity:
    """Scalar map ``f`` with derivative ``df`` and primitive ``prim`` (``prim(0) = 0``).

    ``dealias`` is the default 2/3-rule flag used by the Nemitskii operator and
    by every functional built on ``prim`` so that kicks and energies see the
    same projected field.
    """

    name: str
    rho: float
    c: float
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    prim: Callable[[np.ndarray], np.ndarray]
    dealias: bool = False

    def eval(self, s):
        return self.f(np.asarray(s, dtype=float))

    def derivative(self, s):
        return self.df(np.asarray(s, dtype=float))

    def primitive(self, s):
        return self.prim(np.asarray(s, dtype=float))

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"

    def with_dealias(self, flag: bool) -> "Nonlinearity":
        return Nonlinearity(self.name, self.rho, self.c, self.f, self.df, self.prim, bool(flag))

    @classmethod
    def zero(cls, dealias: bool = False) -> "Nonlinearity":
        z = np.zeros_like
        return cls("zero", 2.0, 1.0, z, z, z, dealias)

    @classmethod
    def damped_power(cls, rho: float = 2.0, dealias: bool = True) -> "Nonlinearity":
        rho = float(rho)
        if not 1.0 < rho < 3.0:
            raise ValueError(f"damped_power needs 1 < rho < 3, got {rho}")

        def f(s):
            return -np.abs(s) ** (rho - 1.0) * s

        def df(s):
            return -rho * np.abs(s) ** (rho - 1.0)

        def prim(s):
            return -np.abs(s) ** (rho + 1.0) / (rho + 1.0)

        return cls("damped_power", rho, rho, f, df, prim, dealias)

    @classmethod
    def sine(cls, dealias: bool = False) -> "Nonlinearity":
        return cls("sine", 2.0, 1.0, np.sin, np.cos, lambda s: 1.0 - np.cos(s), dealias)

    @classmethod
    def custom(cls, f, df, prim, rho: float, c: float, name: str = "custom",
               dealias: bool = False) -> "Nonlinearity":
        """Wrap arbitrary callables, e.g. to exercise the validators."""
        return cls(name, float(rho), float(c), f, df, prim, dealias)


def make_nonlinearity(name: str, rho: float | None = None,
                      dealias: bool | None = None) -> Nonlinearity:
    """Catalogue lookup by id."""
    if name == "zero":
        f = Nonlinearity.zero()
    elif name == "damped_power":
        f = Nonlinearity.damped_power(2.0 if rho is None else rho)
    elif name == "sine":
        f = Nonlinearity.sine()
    else:
        raise KeyError(f"unknown nonlinearity {name!r}; expected one of {CATALOGUE}")
    return f if dealias is None else f.with_dealias(dealias)


def _project(domain: Domain, coeffs: np.ndarray):
    return coeffs * domain.dealias_mask


def nemitskii_coeffs(f: Nonlinearity, domain: Domain, coeffs: np.ndarray,
                     dealias: bool | None = None) -> np.ndarray:
    """Batched ``to_coeff(f(to_grid(u)))`` over leading axes of ``coeffs``."""
    if f.is_zero:
        return np.zeros_like(coeffs)
    dealias = f.dealias if dealias is None else dealias
    if dealias:
        coeffs = _project(domain, coeffs)
    out = domain.analyze(f.f(domain.synthesize(coeffs)))
    if dealias:
        out = _project(domain, out)
    return out


def nemitskii(f: Nonlinearity, u: SpectralField, dealias: bool | None = None) -> SpectralField:
    """Pseudo-spectral Nemitskii operator ``u -> f(u)``."""
    return SpectralField(u.domain, nemitskii_coeffs(f, u.domain, u.coeffs, dealias))


def potential(f: Nonlinearity, domain: Domain, coeffs: np.ndarray,
              dealias: bool | None = None) -> np.ndarray:
    """Grid quadrature of ``int_Omega prim(u) dx``, batched over leading axes.

    Uses the same projection as :func:`nemitskii_coeffs`, which makes the
    kick exactly the gradient of this potential.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if f.is_zero:
        return np.zeros(coeffs.shape[: coeffs.ndim - domain.dim])
    dealias = f.dealias if dealias is None else dealias
    if dealias:
        coeffs = _project(domain, coeffs)
    values = f.prim(domain.synthesize(coeffs))
    return domain.quadrature_weight * np.sum(values, axis=domain.axes)


def dissipativity_bound(f: Nonlinearity, delta: float, domain: Domain) -> float:
    """Constant ``C_delta`` with ``int f(u) u <= C_delta + delta ||u||_X^2``.

    The same constant bounds ``int prim(u)``. Closed forms per member:
    ``f(s)s <= 0`` for ``damped_power``; for ``sine`` both ``sin(s)s`` and
    ``1 - cos(s)`` are below ``|s| <= delta s^2 + 1/(4 delta)``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if f.name in ("zero", "damped_power"):
        return 0.0
    if f.name == "sine":
        return domain.volume / (4.0 * delta)
    raise KeyError(f"no closed-form C_delta for nonlinearity {f.name!r}")


@dataclass(frozen=True)
class GrowthReport:
    c_fit: float
    rho: float
    c_declared: float
    value_bound_ok: bool
    passed: bool


def validate_growth(f: Nonlinearity, sample_range=(-10.0, 10.0), samples: int = 2001) -> GrowthReport:
    """Dense-sampling check of ``|f'(s)| <= c (1 + |s|^(rho-1))``.

    ``c_fit`` is the smallest constant admissible on the sampled range. The
    value bound ``|f(s)| <= c (1 + |s|^rho)`` is checked alongside.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    s = np.linspace(sample_range[0], sample_range[1], samples)
    c_fit = float(np.max(np.abs(f.df(s)) / (1.0 + np.abs(s) ** (f.rho - 1.0))))
    value_ok = bool(np.all(np.abs(f.f(s)) <= f.c * (1.0 + np.abs(s) ** f.rho) * (1 + 1e-12)))
    return GrowthReport(c_fit, f.rho, f.c, value_ok, c_fit <= f.c * (1 + 1e-12))
