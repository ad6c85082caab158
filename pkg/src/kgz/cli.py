"""``kgz <subcommand> --config <path> [--out <dir>] [--seed <u64>]``.

Exit status: 0 on success, 2 on invalid configuration, 3 when a scientific
check inside an audit fails, 1 on I/O errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .attractor import DESK_LABEL, PullbackSchedule, estimate_attractor, sample_ball, semicontinuity_sweep
from .coefficients import CoefficientFamily
from .config import ConfigError, RunConfig, load_config, serialize_config
from .energy import energy_audit, energy_series, fit_exponential
from .evolution import Physics, SchemeConfig, benchmark_state, propagate, propagate_batch
from .nonlinearity import dissipativity_bound, make_nonlinearity
from .operator import operator_audit
from .spectral import Domain, State, y0_norm2

__all__ = ["main", "run_subcommand", "SUBCOMMANDS"]

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2, 3
CSV_HEADER = ("t", "E", "Lmod", "diss", "y0_norm2", "reg_norm2", "residual")


# -- builders ---------------------------------------------------------------
def build_domain(cfg: RunConfig) -> Domain:
    return Domain(cfg.domain.n, cfg.domain.modes, (cfg.domain.length,) * cfg.domain.n)


def build_family(cfg: RunConfig) -> CoefficientFamily:
    c = cfg.coefficient
    if c.family == "constant":
        return CoefficientFamily.constant(c.a_star)
    if c.family == "sinusoidal":
        return CoefficientFamily.sinusoidal(c.a_star, c.amplitude, c.omega)
    return CoefficientFamily.from_csv(c.table, c.a_star)


def build_physics(cfg: RunConfig) -> Physics:
    p = cfg.physics
    f = make_nonlinearity(p.f, p.rho, p.dealias)
    return Physics(p.eta, f, build_family(cfg), cfg.coefficient.epsilon)


def build_scheme(cfg: RunConfig) -> SchemeConfig:
    return SchemeConfig(cfg.time.dt, cfg.time.scheme)


def build_initial(cfg: RunConfig, domain: Domain) -> State:
    i = cfg.initial
    if i.kind == "zero":
        return State.zeros(domain)
    if i.kind == "benchmark":
        return benchmark_state(domain, i.radius)
    return sample_ball(domain, i.radius, 1, i.decay, i.seed).states[0]


def build_schedule(cfg: RunConfig) -> PullbackSchedule:
    b = cfg.pullback
    return PullbackSchedule(b.t_star, b.windows, b.samples, b.radius, b.decay, b.seed, b.tol_attr)


def _a1(cfg: RunConfig, physics: Physics) -> float:
    ts = np.linspace(cfg.time.t0, max(cfg.time.t1, cfg.time.t0 + 2 * np.pi), 2001)
    return float(np.max(physics.family.a_eval(physics.eps, ts)))


# -- writers ----------------------------------------------------------------
def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_json(path: Path, payload: dict):
    try:
        path.write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_csv(path: Path, header, columns):
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in zip(*columns):
                w.writerow([_fmt(x) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _header(cfg: RunConfig, name: str) -> dict:
    # output.dir is left out so reruns into another directory stay byte-identical
    text = "".join(ln + "\n" for ln in serialize_config(cfg).splitlines() if not ln.startswith("output.dir"))
    out = {"subcommand": name, "config": text}
    if cfg.desk_scale:
        out["label"] = DESK_LABEL
    return out


# -- subcommands ------------------------------------------------------------
def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    dom, ph = build_domain(cfg), build_physics(cfg)
    W0 = build_initial(cfg, dom)
    traj = propagate(W0, cfg.time.t0, cfg.time.t1, build_scheme(cfg), ph, cfg.time.sample_every)
    cols = energy_series(traj, ph.f, ph.eta, a1=_a1(cfg, ph))
    residual = np.full(len(traj), np.nan)
    if len(traj) >= 3:
        audit = energy_audit(traj, ph.f, ph.eta, _a1(cfg, ph))
        residual = audit["columns"]["residual"]
    if "csv" in cfg.output.formats:
        write_csv(out / "trajectory.csv", CSV_HEADER, [cols[k] for k in CSV_HEADER[:-1]] + [residual])
    if "json" in cfg.output.formats:
        write_json(out / "simulate.json", {
            **_header(cfg, "simulate"), "samples": len(traj),
            "final": {"t": traj.times[-1], "E": cols["E"][-1], "y0_norm2": cols["y0_norm2"][-1]},
        })
    return EXIT_OK


def cmd_operator_audit(cfg: RunConfig, out: Path) -> int:
    ph = build_physics(cfg)
    rep = operator_audit(build_domain(cfg), ph.eta, ph.family, ph.eps, seed=cfg.initial.seed)
    write_json(out / "operator_audit.json", {**_header(cfg, "operator-audit"), **rep})
    return EXIT_OK if rep["passed"] else EXIT_CHECK


def cmd_energy_audit(cfg: RunConfig, out: Path) -> int:
    dom, ph = build_domain(cfg), build_physics(cfg)
    W0 = build_initial(cfg, dom)
    try:
        traj = propagate(W0, cfg.time.t0, cfg.time.t1, build_scheme(cfg), ph, cfg.time.sample_every)
    except FloatingPointError as exc:
        write_json(out / "energy_audit.json", {**_header(cfg, "energy-audit"), "error": str(exc), "passed": False})
        return EXIT_CHECK
    if len(traj) < 3:
        raise ConfigError("energy-audit needs at least 3 samples; lengthen time.t1 or lower time.sample_every")
    c_delta = dissipativity_bound(ph.f, dom.lambda1 / 4, dom)
    rep = energy_audit(traj, ph.f, ph.eta, _a1(cfg, ph), c_delta)
    cols = rep.pop("columns")
    if "csv" in cfg.output.formats:
        write_csv(out / "energy_audit.csv", CSV_HEADER, [cols[k] for k in CSV_HEADER])
    write_json(out / "energy_audit.json", {**_header(cfg, "energy-audit"), **rep})
    return EXIT_OK if rep["passed"] else EXIT_CHECK


def cmd_linear_decay(cfg: RunConfig, out: Path) -> int:
    dom, ph = build_domain(cfg), build_physics(cfg).linear()
    i = cfg.initial
    cloud = sample_ball(dom, i.radius, i.count, i.decay, i.seed)
    times, samples = propagate_batch(dom, cloud.data, cfg.time.t0, cfg.time.t1, build_scheme(cfg), ph,
                                     cfg.time.sample_every)[1]
    norms = y0_norm2(dom, samples)  # (S, M)
    fits = []
    for j in range(norms.shape[1]):
        fr = fit_exponential(times[norms[:, j] > 0], norms[norms[:, j] > 0, j])
        fits.append({"rate": fr.rate, "offset": fr.offset, "r2": fr.r2})
    rates = np.array([f["rate"] for f in fits])
    r2 = np.array([f["r2"] for f in fits])
    zeta0 = float(-rates.max())
    passed = bool(zeta0 > 0 and r2.min() > 0.99)
    if "csv" in cfg.output.formats:
        write_csv(out / "linear_decay.csv", ["t"] + [f"y0_norm2_{j}" for j in range(norms.shape[1])],
                  [times] + [norms[:, j] for j in range(norms.shape[1])])
    write_json(out / "linear_decay.json", {
        **_header(cfg, "linear-decay"), "fits": fits, "zeta0": zeta0, "min_r2": float(r2.min()),
        "passed": passed,
    })
    return EXIT_OK if passed else EXIT_CHECK


def cmd_pullback(cfg: RunConfig, out: Path) -> int:
    est = estimate_attractor(build_schedule(cfg), build_physics(cfg), build_scheme(cfg), build_domain(cfg))
    rep = est.to_dict()
    if "csv" in cfg.output.formats:
        rows = rep["windows"]
        keys = ("window", "y0_max", "y0_mean", "reg_max", "reg_mean")
        write_csv(out / "pullback_windows.csv", keys, [[r[k] for r in rows] for k in keys])
    write_json(out / "pullback.json", {**_header(cfg, "pullback"), **rep})
    return EXIT_OK if est.converged else EXIT_CHECK


def cmd_semicontinuity(cfg: RunConfig, out: Path) -> int:
    dom, ph = build_domain(cfg), build_physics(cfg)
    sch = build_schedule(cfg)
    B = sample_ball(dom, sch.radius, sch.samples, sch.decay, sch.seed)
    eps = tuple(cfg.sweep.epsilons)
    if 0.0 not in eps:
        eps = (0.0,) + eps
    rep = semicontinuity_sweep(eps, sch.t_star, cfg.sweep.tau, B, ph, build_scheme(cfg), sch,
                               sample_every=cfg.time.sample_every)
    rows = sorted((r for r in rep["rows"] if r["epsilon"] > 0), key=lambda r: -r["epsilon"])
    dh = [r["dh_attractor"] for r in rows]
    checks = {
        "zero_reference": all(r["sup_difference"] == 0.0 for r in rep["rows"] if r["epsilon"] == 0),
        "within_bound": all(r["within_bound"] for r in rep["rows"]),
        "linear_scaling": rep["ratio_spread"] <= 2.0,
        "dh_decreasing": all(b <= a + sch.tolerance for a, b in zip(dh, dh[1:])),
    }
    rep["checks"] = checks
    rep["passed"] = all(checks.values())
    write_json(out / "semicontinuity.json", {**_header(cfg, "semicontinuity"), **rep})
    return EXIT_OK if rep["passed"] else EXIT_CHECK


SUBCOMMANDS = {
    "simulate": cmd_simulate,
    "operator-audit": cmd_operator_audit,
    "energy-audit": cmd_energy_audit,
    "linear-decay": cmd_linear_decay,
    "pullback": cmd_pullback,
    "semicontinuity": cmd_semicontinuity,
}


def run_subcommand(name: str, cfg: RunConfig, out: Path | None = None) -> int:
    if name not in SUBCOMMANDS:
        raise KeyError(f"unknown subcommand {name!r}")
    out = Path(cfg.output.dir if out is None else out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    return SUBCOMMANDS[name](cfg, out)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kgz", description="Damped Klein-Gordon-Zakharov experiments.")
    ap.add_argument("subcommand", choices=sorted(SUBCOMMANDS))
    ap.add_argument("--config", required=True, help="path to a 'section.key = value' file")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, help="seed for sampled initial data (u64)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
            cfg = cfg.replace("initial", seed=args.seed).replace("pullback", seed=args.seed)
        if args.out:
            cfg = cfg.replace("output", dir=args.out)
        return run_subcommand(args.subcommand, cfg)
    except ConfigError as exc:
        print(f"kgz: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"kgz: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
