"""Per-mode 4x4 blocks of the linear operator and their audits.

On eigenmode ``k`` the state ``(u_k, p_k, v_k, q_k)`` (``p = u_t``, ``q = v_t``)
evolves by ``W' = -M W`` with

    M = [[0,      -1,     0,   0    ],
         [lam+1,  e*r,    0,   a*r  ],
         [0,       0,     0,  -1    ],
         [0,      -a*r,   lam, e*r  ]],    r = sqrt(lam), e = eta.

All functions broadcast over array-valued ``lam`` and ``a``.
"""
from __future__ import annotations

import numpy as np

from .coefficients import CoefficientFamily
from .spectral import Domain, State

__all__ = [
    "mode_block",
    "mode_block_inverse",
    "characteristic_polynomial",
    "mode_spectrum",
    "spectral_abscissa",
    "y0_scaling",
    "resolvent_norm",
    "analyticity_scan",
    "accretivity_residual",
    "operator_audit",
]


def _broadcast(lam, eta, a):
    lam, eta, a = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (lam, eta, a)))
    return lam, eta, a


def mode_block(lam, eta, a) -> np.ndarray:
    lam, eta, a = _broadcast(lam, eta, a)
    if np.any(lam <= 0) or np.any(eta <= 0) or np.any(a < 0):
        raise ValueError("mode_block needs lam > 0, eta > 0, a >= 0")
    r = np.sqrt(lam)
    M = np.zeros(lam.shape + (4, 4))
    M[..., 0, 1] = -1.0
    M[..., 1, 0] = lam + 1.0
    M[..., 1, 1] = eta * r
    M[..., 1, 3] = a * r
    M[..., 2, 3] = -1.0
    M[..., 3, 1] = -a * r
    M[..., 3, 2] = lam
    M[..., 3, 3] = eta * r
    return M


def mode_block_inverse(lam, eta, a) -> np.ndarray:
    """Closed-form inverse, the per-mode restriction of ``A(t)^-1``."""
    lam, eta, a = _broadcast(lam, eta, a)
    if np.any(lam <= 0):
        raise ValueError("mode_block_inverse needs lam > 0")
    r = np.sqrt(lam)
    Minv = np.zeros(lam.shape + (4, 4))
    Minv[..., 0, 0] = eta * r / (lam + 1.0)
    Minv[..., 0, 1] = 1.0 / (lam + 1.0)
    Minv[..., 0, 2] = a * r / (lam + 1.0)
    Minv[..., 1, 0] = -1.0
    Minv[..., 2, 0] = -a / r
    Minv[..., 2, 2] = eta / r
    Minv[..., 2, 3] = 1.0 / lam
    Minv[..., 3, 2] = -1.0
    return Minv


def characteristic_polynomial(lam, eta, a) -> np.ndarray:
    """Coefficients (highest first) of ``det(s I + M)``.

    Eliminating the velocities gives
    ``(s^2 + b s + lam + 1)(s^2 + b s + lam) + a^2 lam s^2`` with ``b = eta sqrt(lam)``.
    """
    lam, eta, a = _broadcast(lam, eta, a)
    b = eta * np.sqrt(lam)
    one = np.ones_like(lam)
    return np.stack(
        [one, 2 * b, b * b + 2 * lam + 1 + a * a * lam, (2 * lam + 1) * b, lam * (lam + 1)],
        axis=-1,
    )


def _companion_roots(coeffs: np.ndarray) -> np.ndarray:
    c = coeffs[..., 1:] / coeffs[..., :1]
    n = c.shape[-1]
    C = np.zeros(c.shape[:-1] + (n, n))
    C[..., 0, :] = -c
    C[..., np.arange(1, n), np.arange(n - 1)] = 1.0
    return np.linalg.eigvals(C)


def mode_spectrum(lam, eta, a) -> np.ndarray:
    """Eigenvalues of ``-M`` from the companion matrix of the quartic, sorted by real part."""
    roots = _companion_roots(characteristic_polynomial(lam, eta, a))
    order = np.lexsort((roots.imag, roots.real), axis=-1)
    return np.take_along_axis(roots, order, axis=-1)


def spectral_abscissa(lam, eta, a) -> np.ndarray:
    return mode_spectrum(lam, eta, a).real.max(axis=-1)


def y0_scaling(lam) -> np.ndarray:
    """Diagonal of ``D = diag(sqrt(lam), 1, sqrt(lam), 1)``."""
    r = np.sqrt(np.asarray(lam, dtype=float))
    one = np.ones_like(r)
    return np.stack([r, one, r, one], axis=-1)


def resolvent_norm(beta, lam, eta, a) -> np.ndarray:
    """``||D (i beta I + M)^-1 D^-1||_2``, the operator norm on the Y0 mode block.

    The spectral norm is taken from the largest eigenvalue of ``R^H R``.
    """
    beta = np.asarray(beta, dtype=float)
    M = mode_block(lam, eta, a)
    d = y0_scaling(np.broadcast_to(np.asarray(lam, dtype=float), M.shape[:-2]))
    shape = np.broadcast_shapes(beta.shape, M.shape[:-2])
    M = np.broadcast_to(M, shape + (4, 4))
    d = np.broadcast_to(d, shape + (4,))
    beta = np.broadcast_to(beta, shape)
    B = 1j * beta[..., None, None] * np.eye(4) + M
    # D B^-1 D^-1 = (D B D^-1)^-1
    Bs = B * d[..., :, None] / d[..., None, :]
    eye = np.broadcast_to(np.eye(4, dtype=complex), Bs.shape)
    try:
        R = np.linalg.solve(Bs, eye)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular resolvent system i*beta + M") from exc
    gram = np.swapaxes(R.conj(), -1, -2) @ R
    return np.sqrt(np.linalg.eigvalsh(gram)[..., -1])


def analyticity_scan(domain: Domain, t, eta: float, family: CoefficientFamily,
                     eps: float = 0.0, beta_grid=None, flattening=(1e3, 1e4)) -> dict:
    """Scan ``|beta| * resolvent_norm`` over modes, coupling values and ``beta``.

    ``t`` may be a scalar or a sequence of times; the coupling values are
    ``family(eps, t)``. The profile entry for each ``beta`` is the maximum over
    modes and couplings. ``flattening`` names two ``beta`` values evaluated
    exactly (off-grid if need be); their relative change is reported.
    """
    if beta_grid is None:
        beta_grid = np.logspace(-2, 4, 40)
    beta_grid = np.asarray(beta_grid, dtype=float)
    a_vals = np.atleast_1d(family.a_eval(eps, np.atleast_1d(np.asarray(t, dtype=float))))
    lam = domain.eigenvalues.ravel()
    # (beta, a, mode)
    vals = np.abs(beta_grid)[:, None, None] * resolvent_norm(
        beta_grid[:, None, None], lam[None, None, :], eta, a_vals[None, :, None]
    )
    profile = vals.max(axis=(1, 2))
    ib, ia, ik = np.unravel_index(np.argmax(vals), vals.shape)
    b_lo, b_hi = (float(b) for b in flattening)
    at = [float(np.max(b * resolvent_norm(b, lam[None, :], eta, a_vals[:, None]))) for b in (b_lo, b_hi)]
    return {
        "flattening": {"beta": [b_lo, b_hi], "values": at, "rel_change": abs(at[1] - at[0]) / at[0]},
        "beta": beta_grid.tolist(),
        "profile": profile.tolist(),
        "sup": float(vals.max()),
        "argmax": {"beta": float(beta_grid[ib]), "a": float(a_vals[ia]), "lam": float(lam[ik])},
        "finite": bool(np.all(np.isfinite(vals))),
    }


def _energy_weights(lam):
    # Inner product making the operator accretive: (A+I) on u, A on v.
    lam = np.asarray(lam, dtype=float)
    one = np.ones_like(lam)
    return np.stack([lam + 1.0, one, lam, one])


def accretivity_residual(t: float, state: State, eta: float, family: CoefficientFamily,
                         eps: float = 0.0) -> float:
    """``Re <A(t) x, x> - eta (||A^1/4 u_t||^2 + ||A^1/4 v_t||^2)``.

    The inner product weights the first component with ``A + I`` and the
    third with ``A``; with these weights the identity is exact.
    """
    lam = state.domain.eigenvalues.ravel()
    x = state.data.reshape(4, -1)
    M = mode_block(lam, eta, family.a_eval(eps, t))
    Mx = np.einsum("kij,jk->ik", M, x)
    real_part = float(np.sum(_energy_weights(lam) * Mx * x))
    damping = float(eta * np.sum(np.sqrt(lam) * (x[1] ** 2 + x[3] ** 2)))
    return real_part - damping


def operator_audit(domain: Domain, eta: float, family: CoefficientFamily, eps: float = 0.0,
                   seed: int = 0, n_states: int = 1000, n_draws: int = 10000,
                   t_range=(0.0, 2 * np.pi), beta_grid=None) -> dict:
    """Identity, spectrum and resolvent checks bundled as a JSON-ready report."""
    rng = np.random.default_rng(seed)
    lam_all = domain.eigenvalues.ravel()

    worst = 0.0
    for _ in range(n_states):
        x = State(domain, rng.standard_normal((4,) + domain.shape))
        t = rng.uniform(*t_range)
        res = abs(accretivity_residual(t, x, eta, family, eps)) / x.y0_norm2()
        worst = max(worst, res)

    lam = rng.uniform(0.1, 1e3, n_draws)
    et = rng.uniform(0.1, 5.0, n_draws)
    a = rng.uniform(0.0, 5.0, n_draws)
    M = mode_block(lam, et, a)
    det_err = float(np.max(np.abs(np.linalg.det(M) - lam * (lam + 1)) / (lam * (lam + 1))))
    Minv = mode_block_inverse(lam, et, a)
    scale = np.maximum(1.0, np.abs(Minv).max(axis=(-1, -2)))
    inv_err = float(np.max(np.abs(Minv - np.linalg.inv(M)).max(axis=(-1, -2)) / scale))

    ts = np.linspace(*t_range, 64)
    a_t = family.a_eval(eps, ts)
    a_lohi = np.array([np.min(a_t), np.max(a_t)])
    absc = spectral_abscissa(lam_all[:, None], eta, a_lohi[None, :])
    scan = analyticity_scan(domain, ts[:: max(1, len(ts) // 8)], eta, family, eps, beta_grid)

    checks = {
        "accretivity": {"max_residual": worst, "tol": 1e-12, "passed": worst <= 1e-12},
        "determinant": {"max_rel_error": det_err, "tol": 1e-12, "passed": det_err <= 1e-12},
        "inverse": {"max_error": inv_err, "tol": 1e-11, "passed": inv_err <= 1e-11},
        "spectrum": {
            "max_real_part": float(absc.max()),
            "a_range": a_lohi.tolist(),
            "passed": bool(absc.max() < -1e-10),
        },
        "analyticity": {
            "sup": scan["sup"],
            "argmax": scan["argmax"],
            "flattening": scan["flattening"],
            "passed": scan["finite"] and scan["flattening"]["rel_change"] <= 0.1,
        },
    }
    return {
        "checks": checks,
        "scan": {"beta": scan["beta"], "profile": scan["profile"]},
        "passed": all(c["passed"] for c in checks.values()),
    }
