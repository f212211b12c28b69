"""Sectioned ``key = value`` run configuration.

Sections: ``[pop1]``, ``[pop2]`` (one line per type field, ``mean`` or
``mean, std``, plus ``nu`` and optionally ``truncation``), ``[game]``
(roster sizes and seed), ``[solver]`` and ``[sim]``.  Unknown keys are
rejected so typos surface as configuration errors.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .experiments import SolverSettings
from .model import TYPE_FIELDS, Marginal, Population, PopulationSpec
from .sim import SimConfig

SOLVER_KEYS = {"seed": int, "samples": int, "tol": float, "fp_tol": float, "fp_max_iter": int, "damping": float}
GAME_KEYS = {"n1": int, "n2": int, "seed": int}
SIM_KEYS = {"horizon": float, "n_steps": int, "n_paths": int, "seed": int}


@dataclass
class RunConfig:
    spec1: PopulationSpec
    spec2: PopulationSpec
    solver: dict = field(default_factory=dict)
    game: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.solver["seed"]

    def settings(self) -> SolverSettings:
        s = self.solver
        return SolverSettings(samples=s["samples"], fp_tol=s["fp_tol"], fp_max_iter=s["fp_max_iter"],
                              damping=s["damping"], tol=s["tol"])

    def sim_config(self) -> SimConfig:
        s = self.sim
        return SimConfig(horizon_T=s["horizon"], n_steps=s["n_steps"], n_paths=s["n_paths"], seed=s["seed"])

    def to_dict(self) -> dict:
        def pop(spec):
            d = {f: [spec.marginals[f].mean, spec.marginals[f].std] for f in TYPE_FIELDS}
            d.update(nu=spec.nu, truncation=spec.truncation_halfwidth)
            return d
        return {"pop1": pop(self.spec1), "pop2": pop(self.spec2), "game": dict(self.game),
                "solver": dict(self.solver), "sim": dict(self.sim)}


def _number(text: str, key: str, kind=float):
    try:
        return kind(text.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind.__name__}") from None


def _population(section, pop: Population) -> PopulationSpec:
    keys = set(section)
    allowed = set(TYPE_FIELDS) | {"nu", "truncation"}
    if keys - allowed:
        raise ConfigError(f"[pop{int(pop)}] unknown keys: {sorted(keys - allowed)}")
    if "nu" not in section:
        raise ConfigError(f"[pop{int(pop)}] needs nu")
    marginals = {}
    for name in TYPE_FIELDS:
        if name not in section:
            raise ConfigError(f"[pop{int(pop)}] missing {name}")
        parts = [p for p in section[name].replace(",", " ").split() if p]
        if len(parts) not in (1, 2):
            raise ConfigError(f"[pop{int(pop)}] {name}: expected 'mean' or 'mean, std'")
        vals = [_number(p, f"pop{int(pop)}.{name}") for p in parts]
        marginals[name] = Marginal(vals[0], vals[1] if len(vals) == 2 else 0.0)
    k = _number(section.get("truncation", "3"), "truncation")
    return PopulationSpec(marginals, pop, _number(section["nu"], "nu"), k)


def _typed(section, schema, name, defaults) -> dict:
    out = dict(defaults)
    if section is None:
        return out
    extra = set(section) - set(schema)
    if extra:
        raise ConfigError(f"[{name}] unknown keys: {sorted(extra)}")
    for key, kind in schema.items():
        if key in section:
            out[key] = _number(section[key], f"{name}.{key}", kind)
    return out


DEFAULTS = {
    "solver": {"seed": 0, "samples": 2000, "tol": 1e-12, "fp_tol": 1e-10, "fp_max_iter": 10_000, "damping": 1.0},
    "game": {"n1": 10, "n2": 10, "seed": 0},
    "sim": {"horizon": 1.0, "n_steps": 50, "n_paths": 100_000, "seed": 0},
}


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    extra = set(cp.sections()) - {"pop1", "pop2", "game", "solver", "sim"}
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")
    for name in ("pop1", "pop2"):
        if not cp.has_section(name):
            raise ConfigError(f"missing [{name}] section")
    cfg = RunConfig(
        _population(cp["pop1"], Population.POP1),
        _population(cp["pop2"], Population.POP2),
        solver=_typed(cp["solver"] if cp.has_section("solver") else None, SOLVER_KEYS, "solver", DEFAULTS["solver"]),
        game=_typed(cp["game"] if cp.has_section("game") else None, GAME_KEYS, "game", DEFAULTS["game"]),
        sim=_typed(cp["sim"] if cp.has_section("sim") else None, SIM_KEYS, "sim", DEFAULTS["sim"]),
    )
    cfg.settings()  # validates solver values early
    cfg.sim_config()
    if cfg.game["n1"] < 1 or cfg.game["n2"] < 1:
        raise ConfigError("[game] n1 and n2 must be >= 1")
    return cfg


def load_config(path=None) -> RunConfig:
    """Read ``path``; ``None`` loads the bundled calibration (``calibration.cfg``)."""
    if path is None:
        return parse_config(default_config_text())
    return parse_config(Path(path).read_text())


def default_config_text() -> str:
    return resources.files("jumpmfg").joinpath("calibration.cfg").read_text()
