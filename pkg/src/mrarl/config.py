"""Experiment configuration files.

Configs are sectioned key-value text (INI dialect, UTF-8) with sections
``[plant]``, ``[weights]``, ``[uncertainty]``, ``[gains]``, ``[dither]``,
``[sim]``, and ``[drift]`` mapping one-to-one onto :class:`~mrarl.sim.SimConfig`.
Matrices and vectors are bracketed row-major number lists parsed as Python
literals; weights also accept a bare scalar meaning that multiple of the
identity.  Unknown sections or keys are rejected; keys filled from
defaults are reported through the ``mrarl.config`` logger.

Three presets ship with the package: ``example1`` (converging DFIM run),
``example2`` (DFIM under thermal and speed drift), and ``scalar-sanity``
(one-state loop with frozen adaptation).
"""

from __future__ import annotations

import ast
import configparser
import dataclasses
import logging
from importlib import resources

import numpy as np

from .critic import UncertaintySpec
from .dither import DitherSpec
from .errors import ConfigError
from .plant import DfimParams, DfimPlant, DriftSchedule, LtiPlant, dfim_matrices
from .sim import SimConfig

__all__ = ["load_config", "loads", "load_preset", "load_care_problem", "preset_text", "list_presets"]

log = logging.getLogger("mrarl.config")

_SCHEMA = {
    "plant": {"type", "l1", "l2", "lm", "r1", "r2", "omega0", "omegar", "pole_pairs", "a", "b"},
    "weights": {"q", "r"},
    "uncertainty": {"radius", "boundary_layer", "center", "nominal_r1", "nominal_r2", "nominal_omegar"},
    "gains": {"lam", "gamma", "nu", "g", "mu"},
    "dither": {"amplitude", "base_freq", "terms", "waveform"},
    "sim": {
        "t_final", "dt", "mode", "log_stride", "seed", "auto_dt", "pe_window", "use_kernel",
        "x0", "xm0", "xi0", "zeta0", "a_hat0", "p_hat0", "k_a0",
    },
    "drift": {
        "dtemp_total", "temp_duration", "temp_center",
        "dspeed_total", "speed_duration", "speed_center", "alpha",
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _literal(text: str, where: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"cannot parse {where} = {text!r}") from exc


def _as_float(text: str, where: str) -> float:
    val = _literal(text, where)
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise ConfigError(f"{where} must be a number, got {text!r}")
    return float(val)


def _as_int(text: str, where: str) -> int:
    val = _literal(text, where)
    if not isinstance(val, int) or isinstance(val, bool):
        raise ConfigError(f"{where} must be an integer, got {text!r}")
    return val


def _as_bool(text: str, where: str) -> bool:
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigError(f"{where} must be a boolean, got {text!r}")


def _as_array(text: str, where: str, shape=None) -> np.ndarray:
    val = _literal(text, where)
    try:
        arr = np.array(val, dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{where} is not a rectangular number list: {text!r}") from exc
    if shape is not None and arr.shape != shape:
        raise ConfigError(f"{where} must have shape {shape}, got {arr.shape}")
    return arr


class _Section:
    """One config section with required/defaulted key extraction."""

    def __init__(self, name: str, raw: dict):
        self.name = name
        self.raw = raw

    def has(self, key: str) -> bool:
        return key in self.raw

    def take(self, key: str, conv, default=None, required: bool = False):
        where = f"{self.name}.{key}"
        if key in self.raw:
            return conv(self.raw[key], where)
        if required:
            raise ConfigError(f"missing required key {where}")
        log.info("defaulted %s = %r", where, default)
        return default


def _collect(cp: configparser.ConfigParser) -> dict:
    sections = {}
    for name in cp.sections():
        if name not in _SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
        body = dict(cp.items(name))
        for key in body:
            if key not in _SCHEMA[name]:
                raise ConfigError(f"unknown key {name}.{key}")
        sections[name] = body
    return {name: _Section(name, sections.get(name, {})) for name in _SCHEMA}


def _build_plant(sec: _Section, drift: _Section):
    kind = sec.take("type", lambda v, w: v.strip().lower(), required=True)
    if kind == "lti":
        if drift.raw:
            raise ConfigError("a [drift] section requires a dfim plant")
        a = sec.take("a", _as_array, required=True)
        b = sec.take("b", _as_array, required=True)
        for key in ("l1", "l2", "lm", "r1", "r2", "omega0", "omegar", "pole_pairs"):
            if sec.has(key):
                raise ConfigError(f"plant.{key} is only valid for type = dfim")
        return LtiPlant(a=a, b=b), None
    if kind != "dfim":
        raise ConfigError(f"plant.type must be 'lti' or 'dfim', got {kind!r}")
    for key in ("a", "b"):
        if sec.has(key):
            raise ConfigError(f"plant.{key} is only valid for type = lti")
    params = DfimParams(
        l1=sec.take("l1", _as_float, required=True),
        l2=sec.take("l2", _as_float, required=True),
        lm=sec.take("lm", _as_float, required=True),
        r1=sec.take("r1", _as_float, required=True),
        r2=sec.take("r2", _as_float, required=True),
        omega0=sec.take("omega0", _as_float, required=True),
        omegar=sec.take("omegar", _as_float, required=True),
        pole_pairs=sec.take("pole_pairs", _as_int, default=3),
    )
    schedule = None
    if drift.raw:
        defaults = DriftSchedule()
        schedule = DriftSchedule(
            dtemp_total=drift.take("dtemp_total", _as_float, default=defaults.dtemp_total),
            temp_duration=drift.take("temp_duration", _as_float, default=defaults.temp_duration),
            temp_center=drift.take("temp_center", _as_float, default=defaults.temp_center),
            dspeed_total=drift.take("dspeed_total", _as_float, default=defaults.dspeed_total),
            speed_duration=drift.take("speed_duration", _as_float, default=defaults.speed_duration),
            speed_center=drift.take("speed_center", _as_float, default=defaults.speed_center),
            alpha=drift.take("alpha", _as_float, default=defaults.alpha),
        )
    return DfimPlant(params=params, schedule=schedule), params


def _build_uncertainty(sec: _Section, plant, params) -> UncertaintySpec:
    radius = sec.take("radius", _as_float, required=True)
    n = plant.n
    if sec.has("center"):
        for key in ("nominal_r1", "nominal_r2", "nominal_omegar"):
            if sec.has(key):
                raise ConfigError(f"uncertainty.{key} conflicts with an explicit center")
        center = sec.take("center", lambda v, w: _as_array(v, w, shape=(n, n)))
    elif params is not None:
        nominal = dataclasses.replace(
            params,
            r1=sec.take("nominal_r1", _as_float, default=params.r1),
            r2=sec.take("nominal_r2", _as_float, default=params.r2),
            omegar=sec.take("nominal_omegar", _as_float, default=params.omegar),
        )
        center = dfim_matrices(nominal).a
    else:
        raise ConfigError("uncertainty.center is required for an lti plant")
    kwargs = {}
    if sec.has("boundary_layer"):
        kwargs["boundary_layer"] = sec.take("boundary_layer", _as_float)
    return UncertaintySpec(center=center, radius=radius, **kwargs)


def _weight(sec: _Section, key: str, size: int) -> np.ndarray:
    where = f"weights.{key}"
    text = sec.raw.get(key)
    if text is None:
        log.info("defaulted %s = identity", where)
        return np.eye(size)
    val = _literal(text, where)
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val) * np.eye(size)
    return _as_array(text, where, shape=(size, size))


def _build(cp: configparser.ConfigParser) -> SimConfig:
    secs = _collect(cp)
    plant, params = _build_plant(secs["plant"], secs["drift"])
    n, m = plant.n, plant.m
    q = _weight(secs["weights"], "q", n)
    r = _weight(secs["weights"], "r", m)
    uncertainty = _build_uncertainty(secs["uncertainty"], plant, params)

    gains = secs["gains"]
    dither_sec = secs["dither"]
    dither = DitherSpec(
        amplitude=dither_sec.take("amplitude", _as_float, default=10.0),
        base_freq=dither_sec.take("base_freq", _as_float, default=0.2),
        channels=m,
        terms=dither_sec.take("terms", _as_int, default=4),
        waveform=dither_sec.take("waveform", lambda v, w: v.strip().lower(), default="triangular"),
    )

    sim = secs["sim"]

    def opt_arr(key, shape):
        if not sim.has(key):
            return None
        return _as_array(sim.raw[key], f"sim.{key}", shape=shape)

    mode = sim.take("mode", lambda v, w: v.strip().lower(), default="full")
    try:
        return SimConfig(
            plant=plant,
            q=q,
            r=r,
            uncertainty=uncertainty,
            dither=dither,
            t_final=sim.take("t_final", _as_float, required=True),
            lam=gains.take("lam", _as_float, default=10.0),
            gamma=gains.take("gamma", _as_float, default=5.0),
            nu=gains.take("nu", _as_float, default=1.0),
            g=gains.take("g", _as_float, default=100.0),
            mu=gains.take("mu", _as_float, default=50.0),
            mode=mode,
            dt=sim.take("dt", _as_float, default=1e-4),
            log_stride=sim.take("log_stride", _as_int, default=1000),
            pe_window=sim.take("pe_window", _as_float) if sim.has("pe_window") else None,
            x0=opt_arr("x0", (n,)),
            xm0=opt_arr("xm0", (n,)),
            xi0=opt_arr("xi0", (n,)),
            zeta0=opt_arr("zeta0", (n,)),
            a_hat0=opt_arr("a_hat0", (n, n)),
            p_hat0=opt_arr("p_hat0", (n, n)),
            k_a0=opt_arr("k_a0", (m, n)),
            auto_dt=sim.take("auto_dt", _as_bool, default=False),
            use_kernel=sim.take("use_kernel", _as_bool, default=True),
            seed=sim.take("seed", _as_int, default=0),
        )
    except ValueError as exc:
        # Domain-type constructors reject bad values with ValueError.
        raise ConfigError(str(exc)) from exc


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str.lower
    return cp


def _apply_overrides(cp: configparser.ConfigParser, overrides) -> None:
    for item in overrides:
        head, sep, value = item.partition("=")
        section, dot, key = head.strip().partition(".")
        if not sep or not dot or not section or not key:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        section = section.lower()
        key = key.lower()
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"override names unknown key {section}.{key}")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value.strip())


def loads(text: str, overrides=()) -> SimConfig:
    """Build a SimConfig from config text (see module docstring for keys)."""
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    _apply_overrides(cp, overrides)
    return _build(cp)


def load_config(path, overrides=()) -> SimConfig:
    """Read and build a config file; raises ConfigError with diagnostics."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text, overrides)


def list_presets() -> tuple:
    """Names of the bundled experiment presets."""
    root = resources.files("mrarl") / "presets"
    return tuple(sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg")))


def preset_text(name: str) -> str:
    """Raw config text of a bundled preset."""
    ref = resources.files("mrarl") / "presets" / f"{name}.cfg"
    if not ref.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return ref.read_text(encoding="utf-8")


def load_preset(name: str, overrides=()) -> SimConfig:
    """Build a SimConfig from a bundled preset, applying overrides last."""
    return loads(preset_text(name), overrides)


def load_care_problem(path=None, preset=None, overrides=()):
    """Plant and weight matrices only, for the one-shot Riccati command.

    Accepts a full experiment config or a minimal one carrying just a
    ``[plant]`` section (weights default to identity).  Returns the tuple
    ``(plant, q, r)``.
    """
    if (path is None) == (preset is None):
        raise ConfigError("give exactly one of a config path or a preset name")
    text = preset_text(preset) if preset is not None else None
    if text is None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    _apply_overrides(cp, overrides)
    secs = _collect(cp)
    plant, _ = _build_plant(secs["plant"], secs["drift"])
    try:
        q = _weight(secs["weights"], "q", plant.n)
        r = _weight(secs["weights"], "r", plant.m)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return plant, q, r
