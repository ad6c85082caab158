"""Flat ``section.key = value`` run configuration.

Every key has a documented default; unknown keys, malformed values and
constraint violations raise :class:`ConfigError` naming the offending line.
"""
from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import dataclass, field

from .coefficients import KINDS
from .evolution import SCHEMES
from .nonlinearity import CATALOGUE

__all__ = ["ConfigError", "RunConfig", "parse_config", "serialize_config", "load_config"]

INITIAL_KINDS = ("zero", "benchmark", "ball")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class DomainSection:
    n: int = 1
    modes: int = 16
    length: float = math.pi


@dataclass(frozen=True)
class PhysicsSection:
    eta: float = 1.0
    f: str = "damped_power"
    rho: float = 2.0
    dealias: bool = True


@dataclass(frozen=True)
class CoefficientSection:
    family: str = "sinusoidal"
    a_star: float = 2.0
    epsilon: float = 0.5
    amplitude: float = 1.0
    omega: float = 1.0
    table: str = ""


@dataclass(frozen=True)
class TimeSection:
    dt: float = 1e-3
    t0: float = 0.0
    t1: float = 1.0
    sample_every: int = 1
    scheme: str = "strang"


@dataclass(frozen=True)
class InitialSection:
    kind: str = "benchmark"
    radius: float = 1.0
    decay: float = 1.5
    seed: int = 0
    count: int = 20


@dataclass(frozen=True)
class PullbackSection:
    t_star: float = 0.0
    windows: tuple[float, ...] = (5.0, 10.0, 20.0, 40.0)
    samples: int = 16
    radius: float = 1.0
    decay: float = 1.5
    seed: int = 0
    tol_attr: typing.Optional[float] = None


@dataclass(frozen=True)
class SweepSection:
    epsilons: tuple[float, ...] = (0.1, 0.05, 0.025)
    tau: float = -10.0


@dataclass(frozen=True)
class OutputSection:
    dir: str = "kgz_out"
    formats: tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSection = field(default_factory=DomainSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    coefficient: CoefficientSection = field(default_factory=CoefficientSection)
    time: TimeSection = field(default_factory=TimeSection)
    initial: InitialSection = field(default_factory=InitialSection)
    pullback: PullbackSection = field(default_factory=PullbackSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def desk_scale(self) -> bool:
        return self.domain.n < 3

    def replace(self, section: str, **values) -> "RunConfig":
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **values)})


def _schema():
    out = {}
    for sec in dataclasses.fields(RunConfig):
        cls = sec.default_factory
        hints = typing.get_type_hints(cls)
        for f in dataclasses.fields(cls):
            out[f"{sec.name}.{f.name}"] = hints[f.name]
    return out


_SCHEMA = _schema()


def _convert(tp, raw: str):
    if tp is bool:
        low = raw.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if tp is int:
        try:
            return int(raw)
        except ValueError:
            raise ValueError(f"expected an integer, got {raw!r}") from None
    if tp is float:
        try:
            v = float(raw)
        except ValueError:
            raise ValueError(f"expected a number, got {raw!r}") from None
        if not math.isfinite(v):
            raise ValueError(f"expected a finite number, got {raw!r}")
        return v
    if tp is str:
        return raw
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is tuple:
        items = [x.strip() for x in raw.split(",") if x.strip()]
        return tuple(_convert(args[0], x) for x in items)
    if origin is typing.Union and type(None) in args:
        if raw.lower() in ("none", ""):
            return None
        return _convert(next(a for a in args if a is not type(None)), raw)
    raise TypeError(f"unsupported config type {tp}")


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if value is None:
        return "none"
    return str(value)


def parse_config(text: str) -> RunConfig:
    """Parse and validate; omitted keys take their defaults."""
    values: dict[str, dict] = {}
    lines: dict[str, int] = {}
    for no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'section.key = value', got {body!r}", no)
        key, raw = (x.strip() for x in body.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}", no)
        if key in lines:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", no)
        try:
            val = _convert(_SCHEMA[key], raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", no) from None
        section, name = key.split(".", 1)
        values.setdefault(section, {})[name] = val
        lines[key] = no
    cfg = RunConfig(**{
        sec.name: sec.default_factory(**values.get(sec.name, {})) for sec in dataclasses.fields(RunConfig)
    })
    _validate(cfg, lines)
    return cfg


def load_config(path) -> RunConfig:
    from pathlib import Path

    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read config {p}: {exc.strerror}") from exc
    return parse_config(text)


def serialize_config(cfg: RunConfig) -> str:
    out = []
    for sec in dataclasses.fields(RunConfig):
        part = getattr(cfg, sec.name)
        for f in dataclasses.fields(part):
            val = getattr(part, f.name)
            if val is None:
                continue
            out.append(f"{sec.name}.{f.name} = {_format(val)}")
    return "\n".join(out) + "\n"


def _validate(cfg: RunConfig, lines: dict[str, int]):
    def need(ok: bool, key: str, msg: str):
        if not ok:
            raise ConfigError(f"{key}: {msg}", lines.get(key))

    d, p, c, t = cfg.domain, cfg.physics, cfg.coefficient, cfg.time
    need(d.n in (1, 2, 3), "domain.n", f"dimension must be 1, 2 or 3, got {d.n}")
    need(d.modes >= 2, "domain.modes", f"need at least 2 modes per axis, got {d.modes}")
    need(d.length > 0, "domain.length", "must be positive")
    need(p.eta > 0, "physics.eta", "damping must be positive")
    need(p.f in CATALOGUE, "physics.f", f"unknown nonlinearity {p.f!r}; expected one of {CATALOGUE}")
    # Subcritical growth 1 < rho < n/(n-2); the n = 3 bound is used below three dimensions.
    n_eff = max(d.n, 3)
    rho_max = n_eff / (n_eff - 2)
    if p.rho <= 1 or p.rho >= rho_max:
        key = "physics.rho" if "physics.rho" in lines or "domain.n" not in lines else "domain.n"
        raise ConfigError(
            f"physics.rho = {p.rho} violates the subcriticality constraint "
            f"1 < rho < n/(n-2) = {rho_max:g} (n = {n_eff})", lines.get(key))
    need(c.family in KINDS, "coefficient.family", f"unknown family {c.family!r}; expected one of {KINDS}")
    need(c.a_star > 0, "coefficient.a_star", "must be positive")
    need(0.0 <= c.epsilon <= 1.0, "coefficient.epsilon", "must lie in [0, 1]")
    need(c.omega > 0, "coefficient.omega", "must be positive")
    need(c.family != "tabulated" or bool(c.table), "coefficient.table", "tabulated family needs a table path")
    if c.family == "sinusoidal":
        need(c.a_star - abs(c.amplitude) > 0, "coefficient.amplitude",
             "a_star - |amplitude| must stay positive so that a_eps > 0")
    need(t.dt > 0, "time.dt", "must be positive")
    need(t.t1 >= t.t0, "time.t1", f"need t1 >= t0, got t0={t.t0}, t1={t.t1}")
    need(t.sample_every >= 1, "time.sample_every", "must be >= 1")
    need(t.scheme in SCHEMES, "time.scheme", f"unknown scheme {t.scheme!r}; expected one of {SCHEMES}")
    i = cfg.initial
    need(i.kind in INITIAL_KINDS, "initial.kind", f"expected one of {INITIAL_KINDS}")
    need(i.radius > 0, "initial.radius", "must be positive")
    need(i.decay >= 0, "initial.decay", "must be nonnegative")
    need(i.seed >= 0, "initial.seed", "must be nonnegative")
    need(i.count >= 1, "initial.count", "must be >= 1")
    b = cfg.pullback
    w = b.windows
    need(len(w) >= 1 and all(x > 0 for x in w) and all(y > x for x, y in zip(w, w[1:])),
         "pullback.windows", "must be positive and strictly increasing")
    need(b.samples >= 2, "pullback.samples", "need at least 2 samples")
    need(b.radius > 0, "pullback.radius", "must be positive")
    need(b.decay >= 0, "pullback.decay", "must be nonnegative")
    need(b.seed >= 0, "pullback.seed", "must be nonnegative")
    need(b.tol_attr is None or b.tol_attr > 0, "pullback.tol_attr", "must be positive")
    s = cfg.sweep
    need(len(s.epsilons) >= 1 and all(0.0 <= e <= 1.0 for e in s.epsilons),
         "sweep.epsilons", "values must lie in [0, 1]")
    need(s.tau <= b.t_star, "sweep.tau", "need tau <= pullback.t_star")
    need(all(x in FORMATS for x in cfg.output.formats), "output.formats", f"entries must be among {FORMATS}")
