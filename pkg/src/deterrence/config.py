"""Experiment configuration: one JSON document with optional sections.

Sections are ``model``, ``global_game``, ``sim`` and ``sweep`` plus a
top-level ``seed``. Every field has a default matching the back-of-the-
envelope calibration (currency in $B). :func:`normalize` fills defaults and
rejects unknown or invalid fields with a message naming the field; its
output is itself a valid config, so reports can echo it and be re-loaded.
:func:`load` also accepts a whole JSON report and re-uses its echo.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .global_games import (
    ExponentialPrize,
    GlobalGameSpec,
    IdentityPrize,
    NormalPrior,
    SolverOptions,
    UniformPrior,
)
from .model import ExplicitSanctions, ModelParams, ZipfSanctions, majority_threshold
from .sensitivity import DEFAULT_RANGES, SweepSpec
from .simulation import SEED_LIMIT, SimConfig, Strategy


class ConfigError(ValueError):
    """Invalid or unreadable configuration; the message names the field."""


DEFAULTS: dict[str, Any] = {
    "seed": None,
    "model": {
        "n": 5,
        "K": None,  # majority of n
        "q": None,  # derived from p_K when absent
        "p_K": 0.15,
        "beta": 0.06,
        "V": 1190.0,
        "pre_coordination_size": None,  # K - 1
        "sanctions": {"type": "uniform", "F": 135.0},
    },
    "global_game": {
        "prior": {"type": "normal", "mean": 71.47, "std": 100.0},
        "sigma": 5.0,
        "prize_map": {"type": "identity"},
        "solver": {
            "xtol": 1e-8,
            "ftol": 1e-12,
            "nodes": 64,
            "initial_halfwidth": 2.0,
            "max_expansions": 60,
            "monotone_grid": 50,
            "max_iterations": 400,
        },
    },
    "sim": {
        "replications": 100000,
        "information": "global_game",
        "strategy": "cutoff",
        "tau": None,  # solve for the equilibrium cutoff
        "alpha": None,
        "theta": None,
        "block_size": 65536,
        "workers": 1,
    },
    "sweep": {
        "ranges": {k: list(v) for k, v in DEFAULT_RANGES.items()},
        "grid": [101, 101],
        "metric": "V_safe",
        "levels": [500.0, 1000.0, 1191.17647, 1500.0, 2000.0],
    },
}

_SANCTION_KEYS = {"uniform": {"F"}, "explicit": {"values"}, "zipf": {"C"}}
_PRIOR_KEYS = {"normal": {"mean", "std"}, "uniform": {"lo", "hi"}}
_PRIZE_KEYS = {"identity": set(), "exponential": {"scale"}}


def _fail(path: str, message: str):
    raise ConfigError(f"{path}: {message}")


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


# Objects that a user value replaces wholesale instead of merging key by key.
_REPLACED = {"model.sanctions", "global_game.prior", "global_game.prize_map", "sweep.ranges"}


def _merge(defaults: dict, given, path: str) -> dict:
    if not isinstance(given, dict):
        _fail(path or "config", "must be a JSON object")
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        child = f"{path}.{key}" if path else key
        if key not in defaults:
            _fail(child, "unknown field")
        if child in _REPLACED or not isinstance(defaults[key], dict):
            out[key] = copy.deepcopy(value)
        else:
            out[key] = _merge(defaults[key], value, child)
    return out


def _check_tagged(obj, kinds: dict[str, set[str]], path: str) -> None:
    if not isinstance(obj, dict) or "type" not in obj:
        _fail(path, "must be an object with a 'type' field")
    kind = obj["type"]
    if kind not in kinds:
        _fail(f"{path}.type", f"must be one of {sorted(kinds)}, got {kind!r}")
    extra = set(obj) - kinds[kind] - {"type"}
    missing = kinds[kind] - set(obj)
    if extra:
        _fail(f"{path}.{sorted(extra)[0]}", f"unknown field for type {kind!r}")
    if missing:
        _fail(f"{path}.{sorted(missing)[0]}", f"required for type {kind!r}")


def normalize(raw: dict) -> dict:
    """Fill defaults and validate; returns a new, fully populated config."""
    cfg = _merge(DEFAULTS, raw, "")
    model_in = raw.get("model", {})
    seed = cfg["seed"]
    if seed is not None and not (_is_int(seed) and 0 <= seed < SEED_LIMIT):
        _fail("seed", "must be an unsigned 64-bit integer")

    model = cfg["model"]
    if isinstance(model_in, dict) and "q" in model_in and model_in["q"] is not None:
        if "p_K" in model_in and model_in["p_K"] is not None:
            _fail("model.q", "give either q or p_K, not both")
        model["p_K"] = None
    if not _is_int(model["n"]) or model["n"] < 2:
        _fail("model.n", "must be an integer >= 2")
    if model["K"] is None:
        model["K"] = majority_threshold(model["n"])
    if not _is_int(model["K"]) or not 1 <= model["K"] <= model["n"]:
        _fail("model.K", "must be an integer in [1, n]")
    for key in ("q", "p_K"):
        v = model[key]
        if v is not None and not (_is_number(v) and 0 < v < 1):
            _fail(f"model.{key}", "must lie in (0, 1)")
    if model["q"] is None and model["p_K"] is None:
        _fail("model.p_K", "one of q or p_K is required")
    if not (_is_number(model["beta"]) and 0 < model["beta"] <= 1):
        _fail("model.beta", "must lie in (0, 1]")
    if not (_is_number(model["V"]) and model["V"] >= 0):
        _fail("model.V", "must be a finite number >= 0")
    m = model["pre_coordination_size"]
    if m is not None and not (_is_int(m) and 0 <= m <= model["K"]):
        _fail("model.pre_coordination_size", "must be an integer in [0, K]")
    _check_tagged(model["sanctions"], _SANCTION_KEYS, "model.sanctions")

    gg = cfg["global_game"]
    _check_tagged(gg["prior"], _PRIOR_KEYS, "global_game.prior")
    _check_tagged(gg["prize_map"], _PRIZE_KEYS, "global_game.prize_map")
    if not (_is_number(gg["sigma"]) and gg["sigma"] > 0):
        _fail("global_game.sigma", "must be > 0")
    for key, value in gg["solver"].items():
        integral = key in ("nodes", "max_expansions", "monotone_grid", "max_iterations")
        ok = (_is_int(value) and value >= 1) if integral else (_is_number(value) and value > 0)
        if not ok:
            _fail(f"global_game.solver.{key}", "must be a positive integer" if integral else "must be > 0")

    sim = cfg["sim"]
    if not (_is_int(sim["replications"]) and sim["replications"] >= 1):
        _fail("sim.replications", "must be an integer >= 1")
    if sim["information"] not in ("global_game", "complete"):
        _fail("sim.information", "must be 'global_game' or 'complete'")
    if sim["strategy"] not in ("cutoff", "always", "never", "random"):
        _fail("sim.strategy", "must be one of cutoff, always, never, random")
    if sim["strategy"] == "random" and not (_is_number(sim["alpha"]) and 0 <= sim["alpha"] <= 1):
        _fail("sim.alpha", "random strategy needs alpha in [0, 1]")
    if sim["strategy"] == "cutoff" and sim["information"] == "complete":
        _fail("sim.strategy", "cutoff play needs information = 'global_game'")
    for key in ("block_size", "workers"):
        if not (_is_int(sim[key]) and sim[key] >= 1):
            _fail(f"sim.{key}", "must be an integer >= 1")
    for key in ("tau", "theta"):
        if sim[key] is not None and not _is_number(sim[key]):
            _fail(f"sim.{key}", "must be a finite number or null")

    sweep = cfg["sweep"]
    if sweep["metric"] not in ("V_safe", "u_join_at_one", "K_star", "q_star"):
        _fail("sweep.metric", "must be one of V_safe, u_join_at_one, K_star, q_star")
    grid = sweep["grid"]
    if not (isinstance(grid, list) and len(grid) == 2 and all(_is_int(g) and g >= 2 for g in grid)):
        _fail("sweep.grid", "must be two integers >= 2")
    levels = sweep["levels"]
    if not (isinstance(levels, list) and all(_is_number(x) and x > 0 for x in levels)):
        _fail("sweep.levels", "must be a list of positive numbers")
    ranges = sweep["ranges"]
    if not isinstance(ranges, dict):
        _fail("sweep.ranges", "must be an object")
    for name, pair in ranges.items():
        if name not in DEFAULT_RANGES:
            _fail(f"sweep.ranges.{name}", "unknown parameter")
        if not (isinstance(pair, list) and len(pair) == 2 and all(_is_number(x) for x in pair)):
            _fail(f"sweep.ranges.{name}", "must be [low, high]")
        if pair[0] > pair[1]:
            _fail(f"sweep.ranges.{name}", "low must not exceed high")

    # Build every object once so constructor-level errors surface here.
    experiment = Experiment(cfg)
    try:
        experiment.model_params()
    except ValueError as exc:
        _fail("model", str(exc))
    try:
        experiment.game_spec()
    except ValueError as exc:
        _fail("global_game", str(exc))
    try:
        experiment.sweep_spec()
    except ValueError as exc:
        _fail("sweep.ranges", str(exc).removeprefix("sweep: "))
    return cfg


def load(path: str | Path | None) -> dict:
    if path is None:
        return normalize({})
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON ({exc.msg}, line {exc.lineno})") from None
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    if set(raw) == {"command", "config", "result"}:
        # A report from an earlier run: re-run its echoed config.
        raw = raw["config"]
        if not isinstance(raw, dict):
            raise ConfigError("config: report echo must be a JSON object")
    return normalize(raw)


@dataclass(frozen=True)
class Experiment:
    """Typed views over a normalized config."""

    cfg: dict

    def model_params(self) -> ModelParams:
        m = self.cfg["model"]
        s = m["sanctions"]
        if s["type"] == "uniform":
            sanctions = ExplicitSanctions.uniform(float(s["F"]), m["n"])
        elif s["type"] == "explicit":
            sanctions = ExplicitSanctions(tuple(s["values"]))
        else:
            sanctions = ZipfSanctions(float(s["C"]))
        if m["q"] is not None:
            return ModelParams(
                m["n"], m["K"], float(m["q"]), float(m["beta"]), float(m["V"]),
                sanctions, m["pre_coordination_size"],
            )
        return ModelParams.from_coalition_detection(
            m["n"], m["K"], float(m["p_K"]), float(m["beta"]), float(m["V"]),
            sanctions, m["pre_coordination_size"],
        )

    def game_spec(self) -> GlobalGameSpec:
        g = self.cfg["global_game"]
        p = g["prior"]
        if p["type"] == "normal":
            prior = NormalPrior(float(p["mean"]), float(p["std"]))
        else:
            prior = UniformPrior(float(p["lo"]), float(p["hi"]))
        pm = g["prize_map"]
        prize = IdentityPrize() if pm["type"] == "identity" else ExponentialPrize(float(pm["scale"]))
        return GlobalGameSpec(
            base=self.model_params(),
            prior=prior,
            sigma=float(g["sigma"]),
            prize_map=prize,
            solver=SolverOptions(**g["solver"]),
        )

    def sim_config(self, seed: int, tau: float | None = None) -> SimConfig:
        s = self.cfg["sim"]
        kind = s["strategy"]
        if kind == "cutoff":
            strategy = Strategy.cutoff(s["tau"] if tau is None else tau)
        elif kind == "random":
            strategy = Strategy.random(s["alpha"])
        else:
            strategy = Strategy(kind)
        common = dict(
            replications=s["replications"],
            seed=seed,
            strategy=strategy,
            block_size=s["block_size"],
            workers=s["workers"],
        )
        if s["information"] == "complete":
            return SimConfig(params=self.model_params(), **common)
        return SimConfig(game=self.game_spec(), theta=s["theta"], **common)

    def sweep_spec(self) -> SweepSpec:
        w = self.cfg["sweep"]
        return SweepSpec(
            baseline=self.model_params(),
            ranges={k: tuple(v) for k, v in w["ranges"].items()},
            grid=tuple(w["grid"]),
            metric=w["metric"],
        )

    @property
    def levels(self) -> list[float]:
        return [float(x) for x in self.cfg["sweep"]["levels"]]
