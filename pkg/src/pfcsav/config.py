"""Run configuration: INI-style ``key = value`` files with fixed sections.

Unknown sections or keys are rejected. Example::

    [domain]
    Lx = 128
    Ly = 128
    N = 256

    [model]
    eps = 0.025
    lambda = 0.001
    S = 0.01

    [time]
    scheme = second
    dt = 1
    T = 2000

    [initial]
    kind = random
    mean = 0.06
    amplitude = 0.01

Crystallite patches are written ``cx cy width theta_degrees`` separated by ``;``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .initial import CrystalliteIC, InitialCondition, Patch, RandomIC, TrigIC
from .model import PfcParams


class ConfigError(ValueError):
    pass


SCHEMA: dict[str, tuple[str, ...]] = {
    "domain": ("Lx", "Ly", "N"),
    "model": ("M", "beta", "eps", "lambda", "S", "C0", "dealias"),
    "time": ("scheme", "dt", "T"),
    "initial": ("kind", "mean", "amplitude", "phi_ave", "C1", "C2", "patches"),
    "output": ("dir", "series_interval", "snapshot_interval", "snapshot_times", "checkpoint_interval", "seed"),
    "convergence": ("dts", "Ns", "dt_small", "T_space"),
}


@dataclass
class RunConfig:
    Lx: float
    Ly: float
    N: int
    params: PfcParams
    scheme: str
    T: float
    ic: InitialCondition
    output: str = "out"
    series_interval: int = 1
    snapshot_interval: int = 0
    snapshot_times: tuple[float, ...] = ()
    checkpoint_interval: int = 0
    seed: int = 0
    dts: tuple[float, ...] = ()
    Ns: tuple[int, ...] = ()
    dt_small: float = 1e-3
    T_space: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.params.dt))

    def validate(self) -> "RunConfig":
        if self.scheme not in ("first", "second"):
            raise ConfigError(f"scheme must be 'first' or 'second', got {self.scheme!r}")
        n = self.T / self.params.dt
        if self.T <= 0 or abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ConfigError(f"T={self.T} is not an integer multiple of dt={self.params.dt}")
        for name in ("series_interval", "snapshot_interval", "checkpoint_interval"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.series_interval < 1:
            raise ConfigError("series_interval must be >= 1")
        for t in self.snapshot_times:
            k = t / self.params.dt
            if t < 0 or t > self.T + 1e-12 or abs(k - round(k)) > 1e-9 * max(1.0, k):
                raise ConfigError(f"snapshot time {t} is not a step time in [0, T]")
        return self

    def to_sections(self) -> dict[str, dict[str, str]]:
        p = self.params
        sections = {
            "domain": {"Lx": repr(self.Lx), "Ly": repr(self.Ly), "N": str(self.N)},
            "model": {
                "M": repr(p.M), "beta": repr(p.beta), "eps": repr(p.eps), "lambda": repr(p.lam),
                "S": repr(p.S), "C0": "auto" if p.C0 is None else repr(p.C0),
                "dealias": "yes" if p.dealias else "no",
            },
            "time": {"scheme": self.scheme, "dt": repr(p.dt), "T": repr(self.T)},
            "initial": _ic_to_section(self.ic),
            "output": {
                "dir": self.output,
                "series_interval": str(self.series_interval),
                "snapshot_interval": str(self.snapshot_interval),
                "snapshot_times": " ".join(repr(t) for t in self.snapshot_times),
                "checkpoint_interval": str(self.checkpoint_interval),
                "seed": str(self.seed),
            },
        }
        conv = {}
        if self.dts:
            conv["dts"] = " ".join(repr(d) for d in self.dts)
        if self.Ns:
            conv["Ns"] = " ".join(str(n) for n in self.Ns)
        conv["dt_small"] = repr(self.dt_small)
        if self.T_space is not None:
            conv["T_space"] = repr(self.T_space)
        sections["convergence"] = conv
        return sections

    def to_ini(self) -> str:
        lines = []
        for name, values in self.to_sections().items():
            lines.append(f"[{name}]")
            lines.extend(f"{k} = {v}" for k, v in values.items())
            lines.append("")
        return "\n".join(lines)


def _ic_to_section(ic: InitialCondition) -> dict[str, str]:
    if isinstance(ic, TrigIC):
        return {"kind": "trig"}
    if isinstance(ic, RandomIC):
        return {"kind": "random", "mean": repr(ic.mean), "amplitude": repr(ic.amplitude)}
    patches = "; ".join(
        f"{p.cx!r} {p.cy!r} {p.width!r} {math.degrees(p.theta)!r}" for p in ic.patches
    )
    return {
        "kind": "crystallites", "phi_ave": repr(ic.phi_ave), "C1": repr(ic.C1),
        "C2": repr(ic.C2), "patches": patches,
    }


def _float(sec: dict, key: str, default=None) -> float:
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    raw = sec[key].strip()
    try:
        if "/" in raw:
            num, den = raw.split("/")
            return float(num) / float(den)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key} = {raw!r} is not a number") from None


def _int(sec: dict, key: str, default=None) -> int:
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(sec[key])
    except ValueError:
        raise ConfigError(f"{key} = {sec[key]!r} is not an integer") from None


def _bool(sec: dict, key: str, default: bool) -> bool:
    if key not in sec:
        return default
    raw = sec[key].strip().lower()
    if raw in ("1", "yes", "true", "on"):
        return True
    if raw in ("0", "no", "false", "off"):
        return False
    raise ConfigError(f"{key} = {sec[key]!r} is not a boolean")


def _floats(sec: dict, key: str) -> tuple[float, ...]:
    raw = sec.get(key, "").replace(",", " ").split()
    return tuple(_float({key: r}, key) for r in raw)


def _parse_ic(sec: dict) -> InitialCondition:
    kind = sec.get("kind", "trig")
    allowed = {"trig": {"kind"}, "random": {"kind", "mean", "amplitude"},
               "crystallites": {"kind", "phi_ave", "C1", "C2", "patches"}}
    if kind not in allowed:
        raise ConfigError(f"unknown initial condition kind {kind!r}")
    extra = set(sec) - allowed[kind]
    if extra:
        raise ConfigError(f"keys {sorted(extra)} do not apply to kind = {kind}")
    if kind == "trig":
        return TrigIC()
    if kind == "random":
        return RandomIC(_float(sec, "mean", 0.06), _float(sec, "amplitude", 0.01))
    defaults = CrystalliteIC()
    patches = defaults.patches
    if "patches" in sec:
        patches = []
        for chunk in sec["patches"].split(";"):
            if not chunk.strip():
                continue
            parts = chunk.split()
            if len(parts) != 4:
                raise ConfigError(f"patch {chunk.strip()!r} needs 'cx cy width theta_degrees'")
            cx, cy, w, th = (_float({"v": x}, "v") for x in parts)
            if w <= 0:
                raise ConfigError(f"patch width must be positive in {chunk.strip()!r}")
            patches.append(Patch(cx, cy, w, math.radians(th)))
        patches = tuple(patches)
    return CrystalliteIC(
        _float(sec, "phi_ave", defaults.phi_ave), _float(sec, "C1", defaults.C1),
        _float(sec, "C2", defaults.C2), patches,
    )


def from_sections(sections: dict[str, dict[str, str]]) -> RunConfig:
    for name, values in sections.items():
        if name not in SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        unknown = set(values) - set(SCHEMA[name])
        if unknown:
            raise ConfigError(f"unknown keys in [{name}]: {', '.join(sorted(unknown))}")
    dom = sections.get("domain", {})
    mod = sections.get("model", {})
    tim = sections.get("time", {})
    out = sections.get("output", {})
    conv = sections.get("convergence", {})
    c0_raw = mod.get("C0", "auto").strip().lower()
    try:
        params = PfcParams(
            M=_float(mod, "M", 1.0),
            beta=_float(mod, "beta", 1.0),
            eps=_float(mod, "eps"),
            lam=_float(mod, "lambda"),
            S=_float(mod, "S", 0.0),
            dt=_float(tim, "dt"),
            C0=None if c0_raw == "auto" else _float(mod, "C0"),
            dealias=_bool(mod, "dealias", False),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    Ns = tuple(int(n) for n in _floats(conv, "Ns"))
    t_space = _float(conv, "T_space") if "T_space" in conv else None
    cfg = RunConfig(
        Lx=_float(dom, "Lx"),
        Ly=_float(dom, "Ly", _float(dom, "Lx")),
        N=_int(dom, "N"),
        params=params,
        scheme=tim.get("scheme", "second").strip(),
        T=_float(tim, "T"),
        ic=_parse_ic(sections.get("initial", {})),
        output=out.get("dir", "out"),
        series_interval=_int(out, "series_interval", 1),
        snapshot_interval=_int(out, "snapshot_interval", 0),
        snapshot_times=_floats(out, "snapshot_times"),
        checkpoint_interval=_int(out, "checkpoint_interval", 0),
        seed=_int(out, "seed", 0),
        dts=_floats(conv, "dts"),
        Ns=Ns,
        dt_small=_float(conv, "dt_small", 1e-3),
        T_space=t_space,
    )
    if cfg.N < 4 or cfg.N % 2:
        raise ConfigError(f"N must be even and >= 4, got {cfg.N}")
    if cfg.Lx <= 0 or cfg.Ly <= 0:
        raise ConfigError("domain lengths must be positive")
    return cfg.validate()


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return from_sections({s: dict(parser[s]) for s in parser.sections()})


def load_config(path: str | Path) -> RunConfig:
    # unreadable files surface as OSError (an I/O failure, not a bad config)
    return parse_config(Path(path).read_text())
