"""Flat ``key = value`` run configuration with units in the key names."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from .cavity_modes import COUPLING_SOURCES
from .core import DEFAULT_VALIDITY_RATIO, DomainError, SystemParams, thermal_occupation
from .sweep import AXES, Axis, Constraints, Model, SweepSpec


class ConfigError(ValueError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


PARAM_KEYS = {
    "L_m": "L",
    "T_mem": "T_mem",
    "mass_kg": "mass",
    "omega_m_per_s": "omega_m",
    "Q_f": "Q_f",
    "Gamma_bn_per_s": "Gamma_bn",
    "Gamma_cm_per_s": "Gamma_cm",
    "n_index": "n_index",
    "m_index": "m_index",
    "n_bath": "n_bath",
    "Delta_bn_per_s": "Delta_bn",
    "Delta_cm_per_s": "Delta_cm",
    "q01_m": "q01",
    "q02_m": "q02",
}
INT_KEYS = {"n_index", "m_index"}
XI_KEYS = ("xi_bn1_per_s", "xi_bn2_per_s", "xi_cm1_per_s", "xi_cm2_per_s")
OPT_NAMES = ("Delta_bn", "Delta_cm", "c_bn", "c_cm")

OTHER_KEYS = {
    "bath_temperature_K", "c_bn", "c_cm", "coupling_source", "log_base", "validity_ratio",
    "modes_window_fsr",
    "opt_free", "opt_starts", "opt_prescan", "opt_seed", "opt_maxiter",
    "opt_max_rabi_per_s", "opt_max_settling_s", "opt_max_phonons",
    "rabi_bn_per_s", "rabi_cm_per_s",
    "probe1_branch", "probe1_index", "probe2_branch", "probe2_index",
    "probe_rwa_fraction", "probe_Gamma_per_s", "verify_duration_settling", "verify_dt_s",
    "verify_method", "verify_blocks", "verify_nperseg", "verify_band_over_wm",
    *XI_KEYS,
}
for _ax in ("x", "y"):
    OTHER_KEYS |= {f"sweep_{_ax}", f"sweep_{_ax}_min", f"sweep_{_ax}_max", f"sweep_{_ax}_num", f"sweep_{_ax}_scale"}
for _n in OPT_NAMES:
    OTHER_KEYS |= {f"opt_{_n}_min", f"opt_{_n}_max"}

KNOWN_KEYS = set(PARAM_KEYS) | OTHER_KEYS


@dataclass
class VerifySettings:
    probes: list = field(default_factory=lambda: [("b", 2001), ("c", 6003)])
    rwa_fraction: float = 0.05
    Gamma: float = 2e6
    duration_settling: float = 200.0
    dt: float | None = None
    method: str = "exact"
    blocks: int = 20
    nperseg: int = 4096
    band_over_wm: float = 2.0


@dataclass
class RunConfig:
    model: Model
    validity_ratio: float = DEFAULT_VALIDITY_RATIO
    sweep: SweepSpec | None = None
    opt_bounds: dict = field(default_factory=dict)
    opt_constraints: Constraints = field(default_factory=Constraints)
    opt_starts: int = 8
    opt_prescan: int = 256
    opt_seed: int = 0
    opt_maxiter: int = 400
    rabi: tuple | None = None
    modes_window_fsr: float = 1.0
    verify: VerifySettings = field(default_factory=VerifySettings)
    raw: dict = field(default_factory=dict, repr=False)


def read_pairs(path) -> dict:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_string("[run]\n" + fh.read(), source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if len(parser.sections()) != 1:
        raise ConfigError("sections are not allowed; use flat key = value lines")
    return dict(parser["run"])


def _num(raw, key, cast=float):
    try:
        v = cast(raw[key]) if cast is not int else int(float(raw[key]))
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number ({raw[key]!r})", key) from exc
    if cast is float and not math.isfinite(v):
        raise ConfigError(f"{key}: must be finite", key)
    return v



def parse_log_base(text: str) -> float:
    t = text.strip().lower()
    if t in ("e", "natural", "ln"):
        return math.e
    try:
        b = float(t)
    except ValueError as exc:
        raise ConfigError(f"log_base: expected e, 2 or 10, got {text!r}", "log_base") from exc
    if b <= 1:
        raise ConfigError("log_base must exceed 1", "log_base")
    return b


def load_config(path) -> RunConfig:
    return build_config(read_pairs(path))


def build_config(raw: dict) -> RunConfig:
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}", unknown[0])

    kw = {}
    for key, name in PARAM_KEYS.items():
        if key in raw:
            kw[name] = _num(raw, key, int if key in INT_KEYS else float)
    follow = False
    if "bath_temperature_K" in raw:
        temp = _num(raw, "bath_temperature_K")
        if "n_bath" in raw:
            raise ConfigError("give either n_bath or bath_temperature_K, not both", "bath_temperature_K")
        try:
            kw["n_bath"] = thermal_occupation(kw.get("omega_m", SystemParams.omega_m), temp)
        except DomainError as exc:
            raise ConfigError(str(exc), "bath_temperature_K") from exc
        kw["bath_temperature"] = temp
        follow = True
    try:
        params = SystemParams(**kw)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc

    source = raw.get("coupling_source", "fixed").strip()
    xi = None
    given = [k for k in XI_KEYS if k in raw]
    if given:
        missing = [k for k in XI_KEYS if k not in raw]
        if missing:
            raise ConfigError(f"explicit couplings need all four keys; missing {missing[0]!r}", missing[0])
        xi = np.array([[_num(raw, XI_KEYS[0]), _num(raw, XI_KEYS[1])], [_num(raw, XI_KEYS[2]), _num(raw, XI_KEYS[3])]])
        source = "explicit"
    elif source not in COUPLING_SOURCES:
        raise ConfigError(f"coupling_source must be one of {COUPLING_SOURCES}", "coupling_source")

    c = (_num(raw, "c_bn") if "c_bn" in raw else 60.0, _num(raw, "c_cm") if "c_cm" in raw else 386.4)
    log_base = parse_log_base(raw.get("log_base", "e"))
    model = Model(params, c, source, xi, log_base, follow)
    cfg = RunConfig(model=model, raw=dict(raw))
    if "validity_ratio" in raw:
        cfg.validity_ratio = _num(raw, "validity_ratio")

    if "sweep_x" in raw or "sweep_y" in raw:
        axes = []
        for ax in ("x", "y"):
            name = raw.get(f"sweep_{ax}")
            if name is None:
                raise ConfigError(f"sweep_{ax} missing", f"sweep_{ax}")
            if name not in AXES:
                raise ConfigError(f"sweep_{ax}: unknown parameter {name!r}", f"sweep_{ax}")
            for part in ("min", "max", "num"):
                if f"sweep_{ax}_{part}" not in raw:
                    raise ConfigError(f"sweep_{ax}_{part} missing", f"sweep_{ax}_{part}")
            try:
                axes.append(Axis(name, _num(raw, f"sweep_{ax}_min"), _num(raw, f"sweep_{ax}_max"),
                                 _num(raw, f"sweep_{ax}_num", int), raw.get(f"sweep_{ax}_scale", "lin").strip()))
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"sweep_{ax}: {exc}", f"sweep_{ax}") from exc
        cfg.sweep = SweepSpec(axes[0], axes[1], model)

    free = [s.strip() for s in raw.get("opt_free", ",".join(OPT_NAMES)).split(",") if s.strip()]
    for name in free:
        if name not in OPT_NAMES:
            raise ConfigError(f"opt_free: cannot optimize {name!r}", "opt_free")
    defaults = {"Delta_bn": (params.Delta_bn / 2, params.Delta_bn * 2), "Delta_cm": (params.Delta_cm / 2, params.Delta_cm * 2),
                "c_bn": (10.0, 1000.0), "c_cm": (10.0, 1000.0)}
    for name in free:
        lo, hi = defaults[name]
        if f"opt_{name}_min" in raw:
            lo = _num(raw, f"opt_{name}_min")
        if f"opt_{name}_max" in raw:
            hi = _num(raw, f"opt_{name}_max")
        if not lo < hi:
            raise ConfigError(f"opt_{name}: empty range", f"opt_{name}_min")
        cfg.opt_bounds[name] = (lo, hi)
    cons = Constraints()
    if "opt_max_rabi_per_s" in raw:
        cons.max_rabi = _num(raw, "opt_max_rabi_per_s")
    if "opt_max_settling_s" in raw:
        cons.max_settling = _num(raw, "opt_max_settling_s")
    if "opt_max_phonons" in raw:
        cons.max_phonons = _num(raw, "opt_max_phonons")
    cfg.opt_constraints = cons
    for key, attr in (("opt_starts", "opt_starts"), ("opt_prescan", "opt_prescan"), ("opt_seed", "opt_seed"),
                      ("opt_maxiter", "opt_maxiter")):
        if key in raw:
            setattr(cfg, attr, _num(raw, key, int))

    if "rabi_bn_per_s" in raw or "rabi_cm_per_s" in raw:
        cfg.rabi = (_num(raw, "rabi_bn_per_s") if "rabi_bn_per_s" in raw else 0.0,
                    _num(raw, "rabi_cm_per_s") if "rabi_cm_per_s" in raw else 0.0)
    if "modes_window_fsr" in raw:
        cfg.modes_window_fsr = _num(raw, "modes_window_fsr")

    v = cfg.verify
    probes = list(v.probes)
    for i in (1, 2):
        if f"probe{i}_branch" in raw:
            probes[i - 1] = (raw[f"probe{i}_branch"].strip(), probes[i - 1][1])
        if f"probe{i}_index" in raw:
            probes[i - 1] = (probes[i - 1][0], _num(raw, f"probe{i}_index", int))
    v.probes = probes
    if "probe_rwa_fraction" in raw:
        v.rwa_fraction = _num(raw, "probe_rwa_fraction")
    if "probe_Gamma_per_s" in raw:
        v.Gamma = _num(raw, "probe_Gamma_per_s")
    if "verify_duration_settling" in raw:
        v.duration_settling = _num(raw, "verify_duration_settling")
    if "verify_dt_s" in raw:
        v.dt = _num(raw, "verify_dt_s")
    if "verify_method" in raw:
        v.method = raw["verify_method"].strip()
        if v.method not in ("exact", "euler"):
            raise ConfigError("verify_method must be exact or euler", "verify_method")
    if "verify_blocks" in raw:
        v.blocks = _num(raw, "verify_blocks", int)
    if "verify_nperseg" in raw:
        v.nperseg = _num(raw, "verify_nperseg", int)
    if "verify_band_over_wm" in raw:
        v.band_over_wm = _num(raw, "verify_band_over_wm")
    return cfg
