"""Time integration of ``W_t + A(t) W = F(W)``.

The default scheme is Strang splitting: a half kick ``u_t += dt/2 f(u)``, the
exact per-mode linear flow ``exp(-dt M(a(t + dt/2)))`` and another half kick.
The coupling is frozen at the step midpoint, which keeps the linear part
second order for time-dependent ``a``. ``rk4_monolithic`` integrates the full
semidiscrete system with the classical four-stage method and serves as an
independent reference.

Internally states are batches of shape ``(B, 4, K)`` with ``K`` flattened
modes, so clouds of initial data share the mode exponentials.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientFamily
from .nonlinearity import Nonlinearity, nemitskii_coeffs
from .operator import mode_block
from .spectral import Domain, State

__all__ = [
    "Physics",
    "SchemeConfig",
    "Trajectory",
    "NonFiniteStateError",
    "expm_pade13",
    "Integrator",
    "step",
    "propagate",
    "propagate_linear",
    "propagate_batch",
    "benchmark_state",
    "benchmark_physics",
]

SCHEMES = ("strang", "rk4_monolithic")


class NonFiniteStateError(FloatingPointError):
    """Raised when a step produces inf/nan; carries the offending mode."""

    def __init__(self, t, mode):
        self.t = t
        self.mode = mode
        super().__init__(f"non-finite state at t={t:.6g} in mode {mode}")


@dataclass(frozen=True)
class Physics:
    eta: float = 1.0
    f: Nonlinearity = field(default_factory=Nonlinearity.zero)
    family: CoefficientFamily = field(default_factory=CoefficientFamily)
    eps: float = 0.0

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")

    def coupling(self, t):
        return self.family.a_eval(self.eps, t)

    def linear(self) -> "Physics":
        return Physics(self.eta, Nonlinearity.zero(), self.family, self.eps)

    def with_eps(self, eps: float) -> "Physics":
        return Physics(self.eta, self.f, self.family, eps)

    def describe(self) -> dict:
        return {
            "eta": self.eta, "f": self.f.name, "rho": self.f.rho, "dealias": self.f.dealias,
            "coefficient": self.family.describe(), "epsilon": self.eps,
        }


@dataclass(frozen=True)
class SchemeConfig:
    dt: float = 1e-3
    scheme: str = "strang"
    # None defers to the nonlinearity's own default.
    dealias: bool | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")


# Padé-13 coefficients of the scaling-and-squaring exponential (Higham 2005).
_B13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0, 10559470521600.0, 670442572800.0, 33522128640.0, 1323241920.0,
    40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def expm_pade13(A: np.ndarray) -> np.ndarray:
    """Matrix exponential of a stack ``(..., n, n)`` with a fixed [13/13] Padé."""
    A = np.asarray(A, dtype=float)
    norm1 = np.abs(A).sum(axis=-2).max(axis=-1)
    with np.errstate(divide="ignore"):
        s = np.maximum(0, np.ceil(np.log2(norm1 / _THETA13))).astype(int)
    s = np.where(np.isfinite(norm1), s, 0)
    As = A / (2.0 ** s)[..., None, None]
    b = _B13
    ident = np.broadcast_to(np.eye(A.shape[-1]), A.shape)
    A2 = As @ As
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = As @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
              + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    E = np.linalg.solve(V - U, V + U)
    for i in range(int(s.max(initial=0))):
        sq = E @ E
        E = np.where((s > i)[..., None, None], sq, E)
    return E


class Integrator:
    """Stepper bound to one domain and physics; holds its own exponential cache.

    Instances are not shared between threads; build one per propagate call.
    """

    def __init__(self, domain: Domain, physics: Physics, cfg: SchemeConfig):
        self.domain = domain
        self.physics = physics
        self.cfg = cfg
        self.lam = domain.eigenvalues.ravel()
        self.dealias = physics.f.dealias if cfg.dealias is None else cfg.dealias
        self._cache: dict[float, tuple[float, np.ndarray]] = {}

    # -- pieces -------------------------------------------------------------
    def generator(self, t: float) -> np.ndarray:
        return mode_block(self.lam, self.physics.eta, self.physics.coupling(t))

    def propagator(self, t_mid: float, h: float) -> np.ndarray:
        a = float(self.physics.coupling(t_mid))
        hit = self._cache.get(h)
        if hit is not None and abs(hit[0] - a) <= 1e-12:
            return hit[1]
        E = expm_pade13(-h * mode_block(self.lam, self.physics.eta, a))
        self._cache[h] = (a, E)
        return E

    def force(self, W: np.ndarray) -> np.ndarray:
        """Nonlinear term on the u_t row, flattened ``(B, K)``."""
        B = W.shape[0]
        u = W[:, 0, :].reshape((B,) + self.domain.shape)
        return nemitskii_coeffs(self.physics.f, self.domain, u, self.dealias).reshape(B, -1)

    def rhs(self, t: float, W: np.ndarray) -> np.ndarray:
        out = -np.einsum("kij,bjk->bik", self.generator(t), W)
        if not self.physics.f.is_zero:
            out[:, 1, :] += self.force(W)
        return out

    # -- schemes ------------------------------------------------------------
    def step(self, W: np.ndarray, t: float, h: float) -> np.ndarray:
        if self.cfg.scheme == "strang":
            W = W.copy()
            nonlinear = not self.physics.f.is_zero
            if nonlinear:
                W[:, 1, :] += 0.5 * h * self.force(W)
            W = np.einsum("kij,bjk->bik", self.propagator(t + 0.5 * h, h), W)
            if nonlinear:
                W[:, 1, :] += 0.5 * h * self.force(W)
        else:
            k1 = self.rhs(t, W)
            k2 = self.rhs(t + 0.5 * h, W + 0.5 * h * k1)
            k3 = self.rhs(t + 0.5 * h, W + 0.5 * h * k2)
            k4 = self.rhs(t + h, W + h * k3)
            W = W + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(W)):
            bad = np.argwhere(~np.isfinite(W))[0]
            raise NonFiniteStateError(t + h, _mode_index(self.domain, int(bad[-1])))
        return W

    def run(self, W: np.ndarray, tau: float, t: float, sample_every: int | None = None):
        """Advance ``W`` from ``tau`` to ``t`` exactly, with a final partial step.

        Returns the final batch, plus ``(times, samples)`` when ``sample_every``
        is given; samples are taken every ``sample_every`` full steps and at ``t``.
        """
        if t < tau:
            raise ValueError(f"need t >= tau, got t={t}, tau={tau}")
        dt = self.cfg.dt
        snap = 1e-12 * max(1.0, abs(t), abs(tau))
        n_full = int(np.floor((t - tau) / dt))
        if t - (tau + (n_full + 1) * dt) >= -snap:
            n_full += 1
        rest = t - (tau + n_full * dt)
        if abs(rest) <= snap:
            rest = 0.0
        times, samples = [tau], [W]
        sampled = True
        for i in range(n_full):
            W = self.step(W, tau + i * dt, dt)
            sampled = bool(sample_every) and (i + 1) % sample_every == 0
            if sampled:
                times.append(tau + (i + 1) * dt)
                samples.append(W)
        if rest > 0:
            W = self.step(W, tau + n_full * dt, rest)
            sampled = False
        if not sample_every:
            return W
        if sampled:
            times[-1] = t
        else:
            times.append(t)
            samples.append(W)
        return W, (np.array(times), np.stack(samples))


def _mode_index(domain: Domain, flat: int) -> tuple[int, ...]:
    return tuple(int(i) + 1 for i in np.unravel_index(flat, domain.shape))


def _as_batch(domain: Domain, data: np.ndarray) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.shape[-domain.dim - 1:] != (4,) + domain.shape:
        raise ValueError(f"state batch shape {data.shape} incompatible with domain {domain.shape}")
    return data.reshape(-1, 4, domain.size)


@dataclass
class Trajectory:
    """Samples ``(t_i, W_i)`` of one solution."""

    domain: Domain
    times: np.ndarray
    data: np.ndarray  # (S, 4, *shape)
    tau: float
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> State:
        return State(self.domain, self.data[i])

    @property
    def final(self) -> State:
        return self.state(-1)

    def y0_norm2(self) -> np.ndarray:
        from .spectral import y0_norm2

        return y0_norm2(self.domain, self.data)


def step(state: State, t: float, dt: float, cfg: SchemeConfig, physics: Physics) -> State:
    integ = Integrator(state.domain, physics, cfg)
    W = integ.step(_as_batch(state.domain, state.data), t, dt)
    return State(state.domain, W.reshape((4,) + state.domain.shape))


def propagate_batch(domain: Domain, data: np.ndarray, tau: float, t: float, cfg: SchemeConfig,
                    physics: Physics, sample_every: int | None = None):
    """Propagate a stack of states ``(B, 4, *shape)``; see :meth:`Integrator.run`."""
    data = np.asarray(data, dtype=float)
    lead = data.shape[: data.ndim - domain.dim - 1]
    integ = Integrator(domain, physics, cfg)
    out = integ.run(_as_batch(domain, data), tau, t, sample_every)
    if sample_every:
        W, (times, samples) = out
        return W.reshape(data.shape), (times, samples.reshape((len(times),) + lead + (4,) + domain.shape))
    return out.reshape(data.shape)


def propagate(state: State, tau: float, t: float, cfg: SchemeConfig, physics: Physics,
              sample_every: int = 1) -> Trajectory:
    """Solution samples of ``S(., tau) W0`` on ``[tau, t]``."""
    _, (times, samples) = propagate_batch(
        state.domain, state.data[None], tau, t, cfg, physics, max(1, int(sample_every))
    )
    meta = {"scheme": cfg.scheme, "dt": cfg.dt, **physics.describe()}
    return Trajectory(state.domain, times, samples[:, 0], tau, meta)


def propagate_linear(state: State, tau: float, t: float, cfg: SchemeConfig,
                     physics: Physics) -> State:
    """``L(t, tau) W0``: the same integration with ``f`` forced to zero."""
    W = propagate_batch(state.domain, state.data[None], tau, t, cfg, physics.linear())
    return State(state.domain, W[0])


def benchmark_state(domain: Domain, scale: float = 1.0) -> State:
    """Smooth reference datum with ``lambda_k^-3/2`` spectral decay.

    ``(u, u_t, v, v_t)_k = scale * lambda_k^-3/2 * (1, 1/2, (-1)^(|k|+1), 3/10)``.
    """
    lam = domain.eigenvalues
    ksum = sum(np.meshgrid(*[np.arange(1, domain.modes + 1)] * domain.dim, indexing="ij"))
    sign = np.where(ksum % 2 == 1, 1.0, -1.0)
    base = lam ** -1.5
    return State(domain, scale * np.stack([base, 0.5 * base, sign * base, 0.3 * base]))


def benchmark_physics(eps: float = 0.5) -> Physics:
    """Damped power ``rho = 2``, ``eta = 1`` and ``a = 2 + eps sin t``."""
    from .nonlinearity import Nonlinearity as _N

    return Physics(1.0, _N.damped_power(2.0), CoefficientFamily.sinusoidal(2.0, 1.0), eps)
