"""Pullback-attractor estimation from finite clouds of initial data.

A bounded set is represented by a :class:`Cloud` of states sampled in a
``Y0`` ball. Attractor sections are approximated by pullback images
``S(t*, t* - T) B`` for increasing windows ``T``; the iteration is declared
converged once consecutive images are close in both one-sided Hausdorff
semidistances.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .evolution import Physics, SchemeConfig, propagate_batch
from .spectral import Domain, State, regular_norm2, regular_weights, y0_norm2, y0_weights

__all__ = [
    "Cloud",
    "PullbackSchedule",
    "AttractorEstimate",
    "sample_ball",
    "hausdorff_semidistance",
    "pullback_image",
    "estimate_attractor",
    "regularity_audit",
    "semicontinuity_sweep",
    "worker_count",
]

DESK_LABEL = "desk-scale extrapolation"
# Fixed chunking keeps results independent of the worker count.
_CHUNK = 16


def worker_count(threads: int | None = None) -> int:
    """Requested worker count, capped by ``KGZ_THREADS`` when set."""
    cap = os.environ.get("KGZ_THREADS")
    n = threads if threads is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ValueError(f"KGZ_THREADS must be an integer, got {cap!r}") from None
    return max(1, int(n))


def _map_chunks(fn, n_items: int, threads: int | None):
    """``[fn(slice) for slice in chunks]`` with results in chunk order."""
    slices = [slice(i, min(i + _CHUNK, n_items)) for i in range(0, n_items, _CHUNK)]
    workers = min(worker_count(threads), len(slices))
    if workers <= 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, slices))


@dataclass
class Cloud:
    """Finite set of states stored as one array ``(M, 4, *shape)``."""

    domain: Domain
    data: np.ndarray
    label: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        expect = (4,) + self.domain.shape
        if self.data.ndim != len(expect) + 1 or self.data.shape[1:] != expect:
            raise ValueError(f"cloud data must have shape (M, {expect}), got {self.data.shape}")
        if self.data.shape[0] == 0:
            raise ValueError("cloud must be nonempty")

    @classmethod
    def from_states(cls, states: Sequence[State], label: dict | None = None) -> "Cloud":
        if not states:
            raise ValueError("cloud must be nonempty")
        dom = states[0].domain
        if any(s.domain != dom for s in states):
            raise ValueError("all states must share the domain")
        return cls(dom, np.stack([s.data for s in states]), dict(label or {}))

    def __len__(self):
        return self.data.shape[0]

    @property
    def states(self) -> list[State]:
        return [State(self.domain, d) for d in self.data]

    def y0_norms(self) -> np.ndarray:
        return np.sqrt(y0_norm2(self.domain, self.data))

    def reg_norms(self) -> np.ndarray:
        return np.sqrt(regular_norm2(self.domain, self.data))


def sample_ball(domain: Domain, r: float, M: int, s: float = 1.5, seed: int = 0) -> Cloud:
    """``M`` states in the closed ``Y0`` ball of radius ``r``.

    Mode coefficients are ``lambda_k^-s * U(-1, 1)``; each state is then
    scaled to norm ``r * xi`` with ``xi ~ U(0, 1)``.
    """
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if M < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    raw = rng.uniform(-1.0, 1.0, (M, 4) + domain.shape) * domain.eigenvalues ** (-s)
    radii = r * rng.uniform(0.0, 1.0, M)
    norms = np.sqrt(y0_norm2(domain, raw))
    scale = np.divide(radii, norms, out=np.zeros(M), where=norms > 0)
    data = raw * scale.reshape((M,) + (1,) * (domain.dim + 1))
    # guard against the last ulp
    over = np.sqrt(y0_norm2(domain, data)) > r
    data[over] *= r / np.sqrt(y0_norm2(domain, data[over])).reshape((-1,) + (1,) * (domain.dim + 1))
    return Cloud(domain, data, {"kind": "ball", "radius": r, "decay": s, "seed": seed})


def _weights(domain: Domain, metric: str) -> np.ndarray:
    if metric == "y0":
        return y0_weights(domain)
    if metric == "regular":
        return regular_weights(domain)
    raise ValueError(f"unknown metric {metric!r}; expected 'y0' or 'regular'")


def hausdorff_semidistance(A: Cloud, B: Cloud, metric: str = "y0",
                           threads: int | None = 1) -> float:
    """``max_{a in A} min_{b in B} ||a - b||`` by exhaustive comparison."""
    if len(A) == 0 or len(B) == 0:
        raise ValueError("empty cloud")
    if A.domain != B.domain:
        raise ValueError("clouds live on different domains")
    w = _weights(A.domain, metric)
    a = A.data.reshape(len(A), -1)
    b = B.data.reshape(len(B), -1)
    w = np.broadcast_to(w, A.data.shape[1:]).reshape(-1)

    def chunk(sl):
        best = 0.0
        for x in a[sl]:
            d2 = np.sum(w * (b - x) ** 2, axis=1)
            best = max(best, float(d2.min()))
        return best

    return float(np.sqrt(max(_map_chunks(chunk, len(a), threads))))


def pullback_image(B: Cloud, t_star: float, window: float, physics: Physics, cfg: SchemeConfig,
                   threads: int | None = None) -> Cloud:
    """``{S(t*, t* - window) W0 : W0 in B}``."""
    if window < 0:
        raise ValueError("window must be nonnegative")
    tau = t_star - window

    def chunk(sl):
        return propagate_batch(B.domain, B.data[sl], tau, t_star, cfg, physics)

    out = np.concatenate(_map_chunks(chunk, len(B), threads))
    label = {"t": t_star, "window": window, "epsilon": physics.eps}
    return Cloud(B.domain, out, label)


@dataclass(frozen=True)
class PullbackSchedule:
    t_star: float = 0.0
    windows: tuple[float, ...] = (5.0, 10.0, 20.0, 40.0)
    samples: int = 32
    radius: float = 1.0
    decay: float = 1.5
    seed: int = 0
    tol_attr: float | None = None

    def __post_init__(self):
        w = tuple(float(x) for x in self.windows)
        object.__setattr__(self, "windows", w)
        if len(w) < 1 or any(x <= 0 for x in w) or any(b <= a for a, b in zip(w, w[1:])):
            raise ValueError(f"windows must be positive and strictly increasing, got {w}")
        if self.samples < 2:
            raise ValueError("need at least 2 samples")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def tolerance(self) -> float:
        return 1e-6 * self.radius if self.tol_attr is None else float(self.tol_attr)

    def describe(self) -> dict:
        return {
            "t_star": self.t_star, "windows": list(self.windows), "samples": self.samples,
            "radius": self.radius, "decay": self.decay, "seed": self.seed, "tol_attr": self.tolerance,
        }


@dataclass
class AttractorEstimate:
    schedule: PullbackSchedule
    clouds: list[Cloud]
    dh_forward: list[float]   # d_H(image_{k+1}, image_k)
    dh_backward: list[float]  # d_H(image_k, image_{k+1})
    converged: bool
    converged_window: float | None
    meta: dict = field(default_factory=dict)

    @property
    def attractor(self) -> Cloud:
        """Deepest image, the approximant of the attractor section."""
        return self.clouds[-1]

    def window_stats(self) -> list[dict]:
        rows = []
        for T, c in zip(self.schedule.windows, self.clouds):
            y, g = c.y0_norms(), c.reg_norms()
            rows.append({
                "window": T, "y0_max": float(y.max()), "y0_mean": float(y.mean()),
                "reg_max": float(g.max()), "reg_mean": float(g.mean()),
            })
        return rows

    def successive_nonincreasing(self, slack: float = 0.0) -> bool:
        d = np.maximum(self.dh_forward, self.dh_backward)
        return bool(np.all(np.diff(d) <= slack))

    def to_dict(self) -> dict:
        return {
            "schedule": self.schedule.describe(),
            "dh_forward": self.dh_forward,
            "dh_backward": self.dh_backward,
            "converged": self.converged,
            "converged_window": self.converged_window,
            "windows": self.window_stats(),
            "note": f"finite Monte Carlo outer approximation with M={self.schedule.samples} samples",
            **self.meta,
        }


def estimate_attractor(schedule: PullbackSchedule, physics: Physics, cfg: SchemeConfig,
                       domain: Domain | None = None, ball: Cloud | None = None,
                       threads: int | None = None) -> AttractorEstimate:
    """Pullback images of one sampled ball for every window of ``schedule``.

    Non-convergence is reported through ``converged = False`` together with
    the semidistance sequences.
    """
    if ball is None:
        if domain is None:
            raise ValueError("need a domain or a ball")
        ball = sample_ball(domain, schedule.radius, schedule.samples, schedule.decay, schedule.seed)
    clouds = [pullback_image(ball, schedule.t_star, T, physics, cfg, threads) for T in schedule.windows]
    fwd, bwd = [], []
    for prev, nxt in zip(clouds, clouds[1:]):
        fwd.append(hausdorff_semidistance(nxt, prev, threads=threads))
        bwd.append(hausdorff_semidistance(prev, nxt, threads=threads))
    tol = schedule.tolerance
    window = None
    for k, (f_, b_) in enumerate(zip(fwd, bwd)):
        if f_ < tol and b_ < tol:
            window = schedule.windows[k + 1]
            break
    meta = {"physics": physics.describe(), "scheme": {"dt": cfg.dt, "scheme": cfg.scheme}}
    if ball.domain.dim < 3:
        meta["label"] = DESK_LABEL
    return AttractorEstimate(schedule, clouds, fwd, bwd, window is not None, window, meta)


def regularity_audit(cloud: Cloud) -> dict:
    """Norms in ``X^1 x X^1/2 x X^1 x X^1/2``: max and mean over the cloud."""
    n2 = regular_norm2(cloud.domain, cloud.data)
    n = np.sqrt(n2)
    return {
        "max": float(n.max()), "mean": float(n.mean()),
        "max_norm2": float(n2.max()), "mean_norm2": float(n2.mean()),
        "finite": bool(np.all(np.isfinite(n2))), "count": len(cloud),
    }


def semicontinuity_sweep(eps_list: Sequence[float], t_star: float, tau: float, B: Cloud,
                         physics: Physics, cfg: SchemeConfig,
                         schedule: PullbackSchedule | None = None, sample_every: int = 10,
                         threads: int | None = None) -> dict:
    """Trajectory and attractor distances between ``eps`` and ``eps = 0``.

    For each ``eps`` the sup over the cloud and over sampled times in
    ``[tau, t*]`` of ``||S_eps(t, tau) W0 - S_0(t, tau) W0||_Y0`` is recorded
    next to ``||a_eps - a_0||_inf``. A single constant ``C`` is fitted with
    ``diff <= exp(C (t* - tau)) ||a_eps - a_0||_inf`` across the sweep. When a
    schedule is given, attractor sections at ``t*`` are estimated for every
    ``eps`` and compared with the ``eps = 0`` one.
    """
    if t_star < tau:
        raise ValueError("need t_star >= tau")
    family = physics.family

    def run(eps):
        ph = physics.with_eps(eps)

        def chunk(sl):
            return propagate_batch(B.domain, B.data[sl], tau, t_star, cfg, ph, sample_every)[1]

        parts = _map_chunks(chunk, len(B), threads)
        return parts[0][0], np.concatenate([p[1] for p in parts], axis=1)

    times, ref = run(0.0)
    ref_att = None
    if schedule is not None:
        ref_att = estimate_attractor(schedule, physics.with_eps(0.0), cfg, ball=B, threads=threads)

    rows = []
    for eps in eps_list:
        eps = float(eps)
        row = {"epsilon": eps, "a_deviation": family.sup_deviation(eps)}
        if eps == 0.0:
            row["sup_difference"] = 0.0
            att = ref_att
        else:
            _, cur = run(eps)
            row["sup_difference"] = float(np.sqrt(np.max(y0_norm2(B.domain, cur - ref))))
            att = None
            if schedule is not None:
                att = estimate_attractor(schedule, physics.with_eps(eps), cfg, ball=B, threads=threads)
        if ref_att is not None:
            row["dh_attractor"] = hausdorff_semidistance(att.attractor, ref_att.attractor, threads=threads)
            row["attractor_converged"] = att.converged
        rows.append(row)

    span = t_star - tau
    pos = [r for r in rows if r["epsilon"] > 0 and r["a_deviation"] > 0]
    C = 0.0
    if pos and span > 0:
        kappa = max(r["sup_difference"] / r["a_deviation"] for r in pos)
        C = max(0.0, float(np.log(kappa)) / span) if kappa > 0 else 0.0
    bound = np.exp(C * span)
    for r in rows:
        r["bound"] = float(bound * r["a_deviation"])
        r["within_bound"] = bool(r["sup_difference"] <= r["bound"] * (1 + 1e-12))
        if r["epsilon"] > 0:
            r["ratio"] = r["sup_difference"] / r["epsilon"]
    ratios = [r["ratio"] for r in rows if "ratio" in r and r["ratio"] > 0]
    spread = float(max(ratios) / min(ratios)) if ratios else 1.0
    out = {
        "t_star": t_star, "tau": tau, "C_bar": C, "ratio_spread": spread, "rows": rows,
        "samples": len(B), "sample_times": len(times),
    }
    if B.domain.dim < 3:
        out["label"] = DESK_LABEL
    return out
