"""Dirichlet-Laplacian eigenbasis on a box.

Fields are stored as coefficient arrays in the orthonormal basis

    phi_k(x) = prod_i sqrt(2/L_i) sin(k_i pi x_i / L_i),   1 <= k_i <= N,

so ``A = -Laplacian`` acts diagonally with eigenvalues
``lambda_k = sum_i (k_i pi / L_i)**2``. Grid values live on the ``N``
interior points ``x_j = j L / (N + 1)`` of each axis and are reached with a
type-I discrete sine transform.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import fft

__all__ = [
    "Domain",
    "SpectralField",
    "State",
    "eigenvalue",
    "to_grid",
    "to_coeff",
    "apply_fractional",
    "norm_alpha",
    "inner_X",
]


@dataclass(frozen=True)
class Domain:
    """Box ``(0, L_1) x ... x (0, L_n)`` truncated to ``modes`` per axis."""

    dim: int = 1
    modes: int = 16
    lengths: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if int(self.modes) != self.modes or self.modes < 1:
            raise ValueError(f"modes must be a positive integer, got {self.modes}")
        lengths = self.lengths
        if isinstance(lengths, (int, float)):
            lengths = (float(lengths),) * self.dim
        elif len(lengths) == 0:
            lengths = (np.pi,) * self.dim
        elif len(lengths) == 1 and self.dim > 1:
            lengths = (float(lengths[0]),) * self.dim
        lengths = tuple(float(x) for x in lengths)
        if len(lengths) != self.dim:
            raise ValueError(f"need {self.dim} side lengths, got {len(lengths)}")
        if any(not np.isfinite(x) or x <= 0 for x in lengths):
            raise ValueError(f"side lengths must be positive, got {lengths}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "modes", int(self.modes))
        object.__setattr__(self, "lengths", lengths)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.modes,) * self.dim

    @property
    def size(self) -> int:
        return self.modes ** self.dim

    @property
    def axes(self) -> tuple[int, ...]:
        """Trailing axes of a coefficient array that index modes."""
        return tuple(range(-self.dim, 0))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        k = np.arange(1, self.modes + 1, dtype=float)
        lam = np.zeros(self.shape)
        for i, L in enumerate(self.lengths):
            shape = [1] * self.dim
            shape[i] = self.modes
            lam = lam + ((k * np.pi / L) ** 2).reshape(shape)
        lam.setflags(write=False)
        return lam

    @property
    def lambda1(self) -> float:
        return float(sum((np.pi / L) ** 2 for L in self.lengths))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def quadrature_weight(self) -> float:
        return float(np.prod([L / (self.modes + 1) for L in self.lengths]))

    @cached_property
    def grid(self) -> tuple[np.ndarray, ...]:
        """Interior grid coordinates, one broadcastable array per axis."""
        out = []
        j = np.arange(1, self.modes + 1, dtype=float)
        for i, L in enumerate(self.lengths):
            shape = [1] * self.dim
            shape[i] = self.modes
            out.append((j * L / (self.modes + 1)).reshape(shape))
        return tuple(out)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Keep ``k_i <= 2N/3`` on every axis (2/3 rule)."""
        keep = np.arange(1, self.modes + 1) <= (2 * self.modes) // 3
        mask = np.ones(self.shape, dtype=bool)
        for i in range(self.dim):
            shape = [1] * self.dim
            shape[i] = self.modes
            mask = mask & keep.reshape(shape)
        mask.setflags(write=False)
        return mask

    def eigenvalue(self, k: Sequence[int] | int) -> float:
        return eigenvalue(self, k)

    # Scale factors of the synthesis (coeff -> grid) and analysis transforms.
    @cached_property
    def _synthesis_scale(self) -> float:
        return float(np.prod([np.sqrt(2.0 / L) / 2.0 for L in self.lengths]))

    @cached_property
    def _analysis_scale(self) -> float:
        return float(
            np.prod([L / (self.modes + 1) * np.sqrt(2.0 / L) / 2.0 for L in self.lengths])
        )

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Grid values of coefficient array(s); leading axes are batch axes."""
        coeffs = np.asarray(coeffs, dtype=float)
        self._check_trailing(coeffs.shape)
        return self._synthesis_scale * fft.dstn(coeffs, type=1, axes=self.axes)

    def analyze(self, values: np.ndarray) -> np.ndarray:
        """Coefficients of grid array(s); exact inverse of :meth:`synthesize`."""
        values = np.asarray(values, dtype=float)
        self._check_trailing(values.shape)
        return self._analysis_scale * fft.dstn(values, type=1, axes=self.axes)

    def _check_trailing(self, shape):
        if tuple(shape[len(shape) - self.dim:]) != self.shape or len(shape) < self.dim:
            raise ValueError(f"array shape {tuple(shape)} does not end with {self.shape}")


def eigenvalue(domain: Domain, k: Sequence[int] | int) -> float:
    """Eigenvalue ``sum_i (k_i pi / L_i)^2`` of the multi-index ``k``."""
    k = (k,) if np.isscalar(k) else tuple(k)
    if len(k) != domain.dim:
        raise IndexError(f"multi-index {k} has wrong length for dim={domain.dim}")
    if any(int(ki) != ki or ki < 1 or ki > domain.modes for ki in k):
        raise IndexError(f"multi-index {k} outside 1..{domain.modes}")
    return float(sum((ki * np.pi / L) ** 2 for ki, L in zip(k, domain.lengths)))


@dataclass
class SpectralField:
    """Scalar field as eigenbasis coefficients on ``domain``."""

    domain: Domain
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != self.domain.shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} != domain shape {self.domain.shape}"
            )

    @classmethod
    def zeros(cls, domain: Domain) -> "SpectralField":
        return cls(domain, np.zeros(domain.shape))

    @classmethod
    def unit(cls, domain: Domain, k: Sequence[int] | int, value: float = 1.0) -> "SpectralField":
        k = (k,) if np.isscalar(k) else tuple(k)
        eigenvalue(domain, k)
        c = np.zeros(domain.shape)
        c[tuple(ki - 1 for ki in k)] = value
        return cls(domain, c)

    def to_grid(self) -> np.ndarray:
        return to_grid(self)

    def __add__(self, other):
        _same_domain(self, other)
        return SpectralField(self.domain, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _same_domain(self, other)
        return SpectralField(self.domain, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.domain, self.coeffs * scalar)

    __rmul__ = __mul__


def _same_domain(a, b):
    if a.domain != b.domain:
        raise ValueError("fields live on different domains")


def to_grid(field: SpectralField) -> np.ndarray:
    return field.domain.synthesize(field.coeffs)


def to_coeff(domain: Domain, values: np.ndarray) -> SpectralField:
    values = np.asarray(values, dtype=float)
    if values.shape != domain.shape:
        raise ValueError(f"grid shape {values.shape} != domain shape {domain.shape}")
    return SpectralField(domain, domain.analyze(values))


def apply_fractional(field: SpectralField, alpha: float) -> SpectralField:
    """``A^alpha``: multiply coefficient ``k`` by ``lambda_k**alpha``."""
    return SpectralField(field.domain, field.coeffs * field.domain.eigenvalues ** alpha)


def norm_alpha(field: SpectralField, alpha: float) -> float:
    """Homogeneous ``X^alpha`` norm ``||A^alpha u||``."""
    lam = field.domain.eigenvalues
    return float(np.sqrt(np.sum(lam ** (2 * alpha) * field.coeffs ** 2)))


def inner_X(a: SpectralField, b: SpectralField) -> float:
    _same_domain(a, b)
    return float(np.sum(a.coeffs * b.coeffs))


# Component weights of the squared norms, (u, u_t, v, v_t).
def y0_weights(domain: Domain) -> np.ndarray:
    lam = domain.eigenvalues
    return np.stack([lam, np.ones_like(lam), lam, np.ones_like(lam)])


def regular_weights(domain: Domain) -> np.ndarray:
    lam = domain.eigenvalues
    return np.stack([lam ** 2, lam, lam ** 2, lam])


def y0_norm2(domain: Domain, data: np.ndarray) -> np.ndarray:
    """Squared Y0 norms of state array(s) shaped ``(..., 4, *domain.shape)``."""
    axes = tuple(range(-domain.dim - 1, 0))
    return np.sum(y0_weights(domain) * np.asarray(data) ** 2, axis=axes)


def regular_norm2(domain: Domain, data: np.ndarray) -> np.ndarray:
    """Squared ``X^1 x X^1/2 x X^1 x X^1/2`` norms of state array(s)."""
    axes = tuple(range(-domain.dim - 1, 0))
    return np.sum(regular_weights(domain) * np.asarray(data) ** 2, axis=axes)


class State:
    """Phase-space point ``(u, u_t, v, v_t)`` stored as one ``(4, *shape)`` array."""

    __slots__ = ("domain", "data")

    def __init__(self, domain: Domain, data: np.ndarray):
        data = np.array(data, dtype=float)
        if data.shape != (4,) + domain.shape:
            raise ValueError(f"state shape {data.shape} != {(4,) + domain.shape}")
        self.domain = domain
        self.data = data

    @classmethod
    def zeros(cls, domain: Domain) -> "State":
        return cls(domain, np.zeros((4,) + domain.shape))

    @classmethod
    def from_fields(cls, u: SpectralField, ut: SpectralField, v: SpectralField,
                    vt: SpectralField) -> "State":
        for other in (ut, v, vt):
            _same_domain(u, other)
        return cls(u.domain, np.stack([u.coeffs, ut.coeffs, v.coeffs, vt.coeffs]))

    def _field(self, i):
        return SpectralField(self.domain, self.data[i].copy())

    @property
    def u(self) -> SpectralField:
        return self._field(0)

    @property
    def ut(self) -> SpectralField:
        return self._field(1)

    @property
    def v(self) -> SpectralField:
        return self._field(2)

    @property
    def vt(self) -> SpectralField:
        return self._field(3)

    def y0_norm2(self) -> float:
        return float(y0_norm2(self.domain, self.data))

    def y0_norm(self) -> float:
        return float(np.sqrt(self.y0_norm2()))

    def regular_norm2(self) -> float:
        return float(regular_norm2(self.domain, self.data))

    def copy(self) -> "State":
        return State(self.domain, self.data)

    def __add__(self, other: "State") -> "State":
        _same_domain(self, other)
        return State(self.domain, self.data + other.data)

    def __sub__(self, other: "State") -> "State":
        _same_domain(self, other)
        return State(self.domain, self.data - other.data)

    def __mul__(self, scalar: float) -> "State":
        return State(self.domain, self.data * scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return f"State(domain={self.domain!r}, y0_norm={self.y0_norm():.6g})"
