"""Energy functionals, the dissipation identity and exponential fits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nonlinearity import Nonlinearity, potential
from .spectral import Domain, State, regular_norm2, y0_norm2

__all__ = [
    "EnergySample",
    "FitResult",
    "DominationFit",
    "energy",
    "modified_energy",
    "dissipation_rate",
    "default_gammas",
    "squeeze_slacks",
    "energy_values",
    "energy_series",
    "audit_identity",
    "fit_exponential",
    "fit_domination",
    "energy_audit",
]


def _axes(domain: Domain):
    return tuple(range(-domain.dim, 0))


def _components(domain: Domain, data: np.ndarray):
    data = np.asarray(data, dtype=float)
    return tuple(np.take(data, i, axis=-domain.dim - 1) for i in range(4))


def energy_values(domain: Domain, data: np.ndarray, f: Nonlinearity) -> np.ndarray:
    """Total energy of state array(s) ``(..., 4, *shape)``."""
    lam = domain.eigenvalues
    ax = _axes(domain)
    u, ut, v, vt = _components(domain, data)
    quad = 0.5 * np.sum((lam + 1.0) * u ** 2 + ut ** 2 + lam * v ** 2 + vt ** 2, axis=ax)
    return quad - potential(f, domain, u)


def cross_values(domain: Domain, data: np.ndarray, gamma1: float, gamma2: float) -> np.ndarray:
    ax = _axes(domain)
    u, ut, v, vt = _components(domain, data)
    return gamma1 * np.sum(u * ut, axis=ax) + gamma2 * np.sum(v * vt, axis=ax)


def dissipation_values(domain: Domain, data: np.ndarray, eta: float) -> np.ndarray:
    r = np.sqrt(domain.eigenvalues)
    _, ut, _, vt = _components(domain, data)
    return -eta * np.sum(r * (ut ** 2 + vt ** 2), axis=_axes(domain))


def energy(state: State, f: Nonlinearity) -> float:
    return float(energy_values(state.domain, state.data, f))


def modified_energy(state: State, f: Nonlinearity, gamma1: float, gamma2: float) -> float:
    """Energy plus the cross terms ``gamma1 <u, u_t> + gamma2 <v, v_t>``."""
    if gamma1 < 0 or gamma2 < 0:
        raise ValueError("gammas must be nonnegative")
    return energy(state, f) + float(cross_values(state.domain, state.data, gamma1, gamma2))


def dissipation_rate(state: State, eta: float) -> float:
    """``-eta (||A^1/4 u_t||^2 + ||A^1/4 v_t||^2)``."""
    return float(dissipation_values(state.domain, state.data, eta))


def default_gammas(domain: Domain, eta: float, a1: float) -> tuple[float, float]:
    """``0.9 min(1/2, lam1/2, eta/(4c^2) min(1/a1^2, 1/(1+eta^2/2)))``, ``c = lam1^-1/4``."""
    lam1 = domain.lambda1
    c2 = lam1 ** -0.5
    decay_bound = eta / (4 * c2) * min(1.0 / a1 ** 2, 1.0 / (1 + eta ** 2 / 2))
    g = 0.9 * min(0.5, lam1 / 2, decay_bound)
    return g, g


def squeeze_slacks(state: State, f: Nonlinearity, gamma1: float, gamma2: float) -> tuple[float, float]:
    """Slacks of ``||W||^2/4 <= L + int prim(u) <= 3/4 (1 + 1/lam1) ||W||^2``.

    Both are nonnegative when the inequality holds.
    """
    domain = state.domain
    n2 = state.y0_norm2()
    middle = modified_energy(state, f, gamma1, gamma2) + float(potential(f, domain, state.data[0]))
    return middle - 0.25 * n2, 0.75 * (1 + 1 / domain.lambda1) * n2 - middle


@dataclass(frozen=True)
class EnergySample:
    t: float
    E: float
    Lmod: float
    diss: float
    y0_norm2: float
    reg_norm2: float


def energy_series(traj, f: Nonlinearity, eta: float, gammas: tuple[float, float] | None = None,
                  a1: float | None = None) -> dict[str, np.ndarray]:
    """Column arrays ``t, E, Lmod, diss, y0_norm2, reg_norm2`` along a trajectory."""
    dom = traj.domain
    if gammas is None:
        gammas = default_gammas(dom, eta, a1 if a1 is not None else 1.0)
    E = energy_values(dom, traj.data, f)
    return {
        "t": np.asarray(traj.times, dtype=float),
        "E": E,
        "Lmod": E + cross_values(dom, traj.data, *gammas),
        "diss": dissipation_values(dom, traj.data, eta),
        "y0_norm2": y0_norm2(dom, traj.data),
        "reg_norm2": regular_norm2(dom, traj.data),
    }


def audit_identity(traj, f: Nonlinearity, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference residual ``dE/dt - dissipation_rate`` at interior samples.

    Only samples whose both neighbours sit at the common spacing are used.
    Returns ``(times, residuals)``.
    """
    t = np.asarray(traj.times, dtype=float)
    if len(t) < 3:
        raise ValueError("need at least 3 samples")
    E = energy_values(traj.domain, traj.data, f)
    D = dissipation_values(traj.domain, traj.data, eta)
    h = t[1] - t[0]
    gaps = np.diff(t)
    ok = (np.abs(gaps[:-1] - h) <= 1e-9 * h) & (np.abs(gaps[1:] - h) <= 1e-9 * h)
    idx = np.nonzero(ok)[0] + 1
    r = (E[idx + 1] - E[idx - 1]) / (t[idx + 1] - t[idx - 1]) - D[idx]
    return t[idx], r


@dataclass(frozen=True)
class FitResult:
    rate: float
    offset: float
    r2: float
    window: tuple[float, float]


def fit_exponential(t, y, window: tuple[float, float] | None = None) -> FitResult:
    """Least-squares line through ``(t, log y)``: ``y ~ exp(offset + rate t)``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, y = t[sel], y[sel]
    if len(t) < 2:
        raise ValueError("need at least two points in the fit window")
    if np.any(y <= 0):
        raise ValueError("nonpositive values in fit window")
    ly = np.log(y)
    if np.ptp(ly) == 0:
        return FitResult(0.0, float(ly[0]), 1.0, (float(t[0]), float(t[-1])))
    rate, offset = np.polyfit(t, ly, 1)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum((ly - (offset + rate * t)) ** 2))
    r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return FitResult(float(rate), float(offset), float(r2), (float(t[0]), float(t[-1])))


@dataclass(frozen=True)
class DominationFit:
    K1: float
    sigma: float
    K2: float
    min_slack: float
    fit: FitResult

    def model(self, t, tau: float = 0.0):
        return self.K1 * np.exp(-self.sigma * (np.asarray(t) - tau)) + self.K2


def fit_domination(t, y, tau: float | None = None, tail_fraction: float = 0.2) -> DominationFit:
    """Envelope ``K1 exp(-sigma (t - tau)) + K2`` for a positive series.

    ``K2`` is the maximum of the trailing ``tail_fraction`` of the series.
    ``sigma`` comes from a log-linear fit of ``y - K2`` on the leading segment
    where ``y > 2 K2``; ``K1`` is the fitted prefactor raised to the upper
    envelope of that segment. ``min_slack`` is the worst ``model - y`` over the
    whole series.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    tau = float(t[0]) if tau is None else tau
    n_tail = max(1, int(np.ceil(tail_fraction * len(t))))
    K2 = float(np.max(y[-n_tail:]))
    lead = y > 2 * K2
    # leading segment: up to the first sample falling below 2 K2
    stop = int(np.argmin(lead)) if not lead.all() else len(y)
    if stop < 2:
        raise ValueError("series has no transient above twice its tail plateau")
    tt, yy = t[:stop], y[:stop] - K2
    fit = fit_exponential(tt - tau, yy)
    sigma = -fit.rate
    K1 = float(np.max(yy * np.exp(sigma * (tt - tau))))
    model = K1 * np.exp(-sigma * (t - tau)) + K2
    return DominationFit(K1, float(sigma), K2, float(np.min(model - y)), fit)


def energy_audit(traj, f: Nonlinearity, eta: float, a1: float, c_delta: float = 0.0,
                 residual_tol: float = 1e-5, monotone_tol: float = 1e-9) -> dict:
    """Identity residual, monotonicity and a-priori bound along one trajectory.

    ``c_delta`` is the dissipativity constant at ``delta = lambda1 / 4``.
    """
    cols = energy_series(traj, f, eta, a1=a1)
    E = cols["E"]
    t_r, r = audit_identity(traj, f, eta)
    scale = max(1.0, float(np.max(np.abs(E))))
    i = int(np.argmax(np.abs(r)))
    jumps = np.diff(E) - monotone_tol * np.maximum(1.0, np.abs(E[:-1]))
    bound = 4.0 * (E[0] + c_delta)
    checks = {
        "identity": {
            "max_residual": float(abs(r[i])), "worst": {"t": float(t_r[i]), "residual": float(r[i])},
            "tol": residual_tol * scale, "passed": bool(abs(r[i]) <= residual_tol * scale),
        },
        "monotone": {"max_increase": float(np.max(np.diff(E))), "passed": bool(np.all(jumps <= 0))},
        "a_priori": {
            "max_y0_norm2": float(np.max(cols["y0_norm2"])), "bound": float(bound),
            "passed": bool(np.all(cols["y0_norm2"] <= bound * (1 + 1e-12))),
        },
    }
    residual = np.full(len(E), np.nan)
    residual[np.searchsorted(cols["t"], t_r)] = r
    cols["residual"] = residual
    return {"checks": checks, "columns": cols, "passed": all(c["passed"] for c in checks.values())}
