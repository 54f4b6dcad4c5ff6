"""Run configuration: a flat JSON object validated before any computation."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import jsonschema

from .errors import ConfigError, PTDimerError
from .lattice import LatticeParams
from .propagation import InitialSpec
from .transitions import QuadratureSettings

COMMANDS = ("spectrum", "evolve", "sweep", "meandisp", "asymptotics-compare", "phase-diagram")
RECIPES = ("fig2", "fig3", "fig4")
NEEDS_COUPLINGS = ("spectrum", "evolve", "meandisp", "asymptotics-compare")

_number = {"type": "number"}
_numbers = {"type": "array", "items": _number, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "n_dimers": {"type": "integer"},
        "nu": _number,
        "nu_prime": _number,
        "gamma": _number,
        "boundary": {"enum": ["open", "periodic"]},
        "model": {"enum": ["pt_symmetric", "lossy"]},
        "dimer": {"type": "integer"},
        "theta": _number,
        "phi": _number,
        "t_max": _number,
        "n_times": {"type": "integer"},
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_max": {"type": ["number", "null"]},
                "n_steps": {"type": ["integer", "null"]},
                "tail_tol": _number,
                "max_doublings": {"type": "integer"},
            },
        },
        "nu_prime_list": _numbers,
        "gamma_list": _numbers,
        "recipe": {"enum": list(RECIPES)},
        "disorder": {
            "type": "object",
            "additionalProperties": False,
            "required": ["strength", "n_realizations"],
            "properties": {
                "strength": _number,
                "n_realizations": {"type": "integer"},
            },
        },
        "seed": {"type": "integer"},
        "out": {"type": "string"},
    },
}

DEFAULTS = {
    "n_dimers": 41,
    "nu": 1.0,
    "boundary": "open",
    "model": "pt_symmetric",
    "dimer": 0,
    "theta": 0.0,
    "phi": 0.0,
    "t_max": 10.0,
    "n_times": 501,
    "quadrature": {},
    "seed": 0,
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    lattice: LatticeParams | None
    initial: InitialSpec
    t_max: float
    n_times: int
    quadrature: QuadratureSettings
    nu_prime_list: tuple = ()
    gamma_list: tuple = ()
    recipe: str | None = None
    disorder_strength: float | None = None
    n_realizations: int | None = None
    seed: int = 0
    out: str | None = None
    normalized: dict = field(default_factory=dict, repr=False)

    @property
    def config_hash(self) -> str:
        # the output location does not change results
        return config_hash({k: v for k, v in self.normalized.items() if k != "out"})


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def _path(error):
    return "/".join(str(p) for p in error.absolute_path) or "<root>"


def parse_config(text, command: str | None = None, seed: int | None = None) -> RunConfig:
    """Parse and validate JSON config text; ``command``/``seed`` come from the CLI."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError(errors[0].message, _path(errors[0]))
    for key, value in raw.items():
        if isinstance(value, float) and not math.isfinite(value):
            raise ConfigError("must be finite", key)

    if command is not None:
        if "command" in raw and raw["command"] != command:
            raise ConfigError(f"config says {raw['command']!r} but CLI says {command!r}", "command")
        raw = {**raw, "command": command}
    if "command" not in raw:
        raise ConfigError("no command given", "command")
    cfg = {**DEFAULTS, **raw}
    cfg["quadrature"] = dict(cfg["quadrature"])
    if seed is not None:
        cfg["seed"] = seed
    cmd = cfg["command"]

    if cmd in NEEDS_COUPLINGS:
        for key in ("nu_prime", "gamma"):
            if key not in cfg:
                raise ConfigError(f"required for command {cmd!r}", key)
    if cmd == "sweep":
        if "nu_prime_list" not in cfg or "gamma" not in cfg:
            raise ConfigError("sweep needs 'gamma' and 'nu_prime_list'", "nu_prime_list")

    def check(cond, key, msg):
        if not cond:
            raise ConfigError(msg, key)

    lattice = None
    try:
        if "nu_prime" in cfg and "gamma" in cfg:
            lattice = LatticeParams(
                cfg["n_dimers"], cfg["nu"], cfg["nu_prime"], cfg["gamma"], cfg["boundary"], cfg["model"]
            )
        else:
            # validates n_dimers and nu even when couplings come from lists
            LatticeParams(cfg["n_dimers"], cfg["nu"], 0.0, 0.0, cfg["boundary"], cfg["model"])
    except PTDimerError as exc:
        msg = str(exc)
        key = next((k for k in ("n_dimers", "nu_prime", "nu", "gamma") if msg.startswith(k)), None)
        raise ConfigError(msg, key) from None

    half = cfg["n_dimers"] // 2
    check(-half <= cfg["dimer"] <= half, "dimer", f"must lie in [-{half}, {half}]")
    check(cfg["t_max"] > 0, "t_max", "must be > 0")
    check(cfg["n_times"] >= 2, "n_times", "must be >= 2")
    for key in ("nu_prime_list", "gamma_list"):
        for i, v in enumerate(cfg.get(key, ())):
            check(v >= 0 and math.isfinite(v), f"{key}/{i}", "must be finite and >= 0")
    try:
        quad = QuadratureSettings(**cfg["quadrature"])
    except PTDimerError as exc:
        raise ConfigError(str(exc), "quadrature") from None
    if cmd == "meandisp":
        check(cfg["gamma"] > 0, "gamma", "must be > 0 for meandisp")
    if cmd == "sweep":
        check(cfg["gamma"] > 0, "gamma", "must be > 0 for sweep")
    if cmd == "asymptotics-compare":
        check(cfg["nu_prime"] > 0, "nu_prime", "must be > 0 for asymptotics-compare")
        check(cfg["gamma"] > abs(cfg["nu"] - cfg["nu_prime"]), "gamma", "must exceed |nu - nu_prime| (broken phase)")
    disorder = cfg.get("disorder")
    if disorder is not None:
        check(disorder["strength"] >= 0, "disorder/strength", "must be >= 0")
        check(disorder["n_realizations"] >= 1, "disorder/n_realizations", "must be >= 1")

    return RunConfig(
        command=cmd,
        lattice=lattice,
        initial=InitialSpec(cfg["dimer"], float(cfg["theta"]), float(cfg["phi"])),
        t_max=float(cfg["t_max"]),
        n_times=int(cfg["n_times"]),
        quadrature=quad,
        nu_prime_list=tuple(float(v) for v in cfg.get("nu_prime_list", ())),
        gamma_list=tuple(float(v) for v in cfg.get("gamma_list", ())),
        recipe=cfg.get("recipe"),
        disorder_strength=None if disorder is None else float(disorder["strength"]),
        n_realizations=None if disorder is None else int(disorder["n_realizations"]),
        seed=int(cfg["seed"]),
        out=cfg.get("out"),
        normalized=cfg,
    )
