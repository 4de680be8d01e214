"""Experiment configuration: an INI file with sections grid, params, time, init, run."""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .evolution import INIT_KINDS

MODES = ("verify", "evolve", "fit", "compare-alpha")
GATES = ("moment", "envelope", "fit", "identities")


class ConfigError(ValueError):
    """Invalid configuration; the message names the section, key and line."""


@dataclass(frozen=True)
class RunConfig:
    # grid
    n: int = 64
    box_length: float = 64.0
    # params
    alpha: float = 1.0
    epsilon: float = 0.0
    T: float = 4.0
    theta: float = 1.0
    K: float = 64.0
    # time
    dt: float = 0.5
    t_end: float = 20.0
    output_every: int = 4
    cfl: float = 0.5
    nonlinear: bool = True
    # init
    kind: str = "gaussian-random-divfree"
    amplitude: float = 1e-2
    seed: int = 7
    coeffs: tuple = (1.0, 0.0, 0.0)
    # run
    mode: str = "evolve"
    output_dir: str = "out"
    gates: tuple = ("moment", "envelope")
    cap_factor: float = 2.0
    moment_tol: float = 1e-6
    residual_tol: float = 0.15
    gamma: float = 1.0
    alphas: tuple = (0.0, 0.25, 1.0)
    snapshots: bool = False
    series: str = ""


# config key -> (section, parser)
def _floats(text):
    return tuple(float(x) for x in re.split(r"[,\s]+", text.strip()) if x)


def _words(text):
    return tuple(x for x in re.split(r"[,\s]+", text.strip()) if x)


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMA = {
    "grid": {"n": int, "box_length": float},
    "params": {"alpha": float, "epsilon": float, "T": float, "theta": float, "K": float},
    "time": {"dt": float, "t_end": float, "output_every": int, "cfl": float, "nonlinear": _bool},
    "init": {"kind": str, "amplitude": float, "seed": int, "coeffs": _floats},
    "run": {"mode": str, "output_dir": str, "gates": _words, "cap_factor": float,
            "moment_tol": float, "residual_tol": float, "gamma": float, "alphas": _floats,
            "snapshots": _bool, "series": str},
}
KEY_SECTION = {k: s for s, keys in SCHEMA.items() for k in keys}


def _key_lines(text: str) -> dict:
    """(section, key) -> line number, for diagnostics."""
    out, section = {}, None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
        elif "=" in s and section and not s.startswith(("#", ";")):
            out[(section, s.split("=", 1)[0].strip())] = no
    return out


def _convert(section, key, raw, where):
    try:
        return SCHEMA[section][key](raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: [{section}] {key} = {raw!r}: {exc}") from None


def validate(cfg: RunConfig) -> RunConfig:
    problems = []
    if cfg.mode not in MODES:
        problems.append(f"[run] mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.kind not in INIT_KINDS:
        problems.append(f"[init] kind must be one of {INIT_KINDS}, got {cfg.kind!r}")
    if len(cfg.coeffs) != 3:
        problems.append("[init] coeffs needs three numbers")
    for g in cfg.gates:
        if g not in GATES:
            problems.append(f"[run] unknown gate {g!r}; known gates are {GATES}")
    if cfg.n < 8 or cfg.n % 2:
        problems.append("[grid] n must be an even integer >= 8")
    if cfg.box_length <= 0:
        problems.append("[grid] box_length must be positive")
    if cfg.T < 1:
        problems.append("[params] T must be >= 1")
    if not 0 < cfg.theta < 1.5:
        problems.append("[params] theta must lie in (0, 3/2)")
    if cfg.alpha < 0 or cfg.epsilon < 0:
        problems.append("[params] alpha and epsilon must be >= 0")
    if cfg.dt <= 0 or cfg.t_end <= 0 or cfg.output_every < 1:
        problems.append("[time] dt, t_end must be positive and output_every >= 1")
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read an INI file (optional) and apply ``overrides`` (key -> string or value)."""
    values = {}
    if path is not None:
        text = Path(path).read_text()
        lines = _key_lines(text)
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"{path}: unknown section [{section}]")
            for key, raw in parser.items(section):
                where = f"{path}:{lines.get((section, key), '?')}"
                if key not in SCHEMA[section]:
                    raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")
                values[key] = _convert(section, key, raw, where)
    for key, raw in (overrides or {}).items():
        if key not in KEY_SECTION:
            raise ConfigError(f"override: unknown key {key!r}")
        values[key] = _convert(KEY_SECTION[key], key, raw, "override") if isinstance(raw, str) else raw
    return validate(replace(RunConfig(), **values))


def dump_config(cfg: RunConfig) -> str:
    """INI text that reproduces ``cfg``."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            v = getattr(cfg, key)
            if isinstance(v, tuple):
                v = ", ".join(str(x) for x in v)
            lines.append(f"{key} = {v}")
        lines.append("")
    return "\n".join(lines)


CONFIG_FIELDS = tuple(f.name for f in fields(RunConfig))
