"""JSON run configuration.

Top-level keys: ``experiment``, ``params`` (eps, xi, kappa, a, b, c), ``n``,
``dt``, ``T``, ``seed``, ``out``, ``snapshot_every`` and an ``options`` object
holding experiment-specific settings.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from berislab.errors import ConfigError, DomainError, ValidationError
from berislab.qtensor import Params

EXPERIMENTS = (
    "full_beris",
    "trotter_rate",
    "ericksen_limit",
    "xi_escape",
    "phase_mismatch",
    "vortex_defects",
    "ode_portrait",
)

INITS = ("random", "zero", "lowest_shell", "taylor_green")
TOP_KEYS = {"experiment", "params", "n", "dt", "T", "seed", "out", "snapshot_every", "options"}
PARAM_KEYS = {f.name for f in dataclasses.fields(Params)}


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    params: Params
    n: int = 64
    dt: float = 1e-3
    T: float = 1.0
    seed: int = 0
    out: str = "runs/out"
    snapshot_every: int = 0
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["params"] = dataclasses.asdict(self.params)
        return d


def _number(raw, key, kind=float):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{key} must be a number, got {raw!r}")
    if kind is int:
        if isinstance(raw, float) and not raw.is_integer():
            raise ConfigError(f"{key} must be an integer, got {raw!r}")
        return int(raw)
    return float(raw)


def from_dict(raw: dict) -> RunConfig:
    """Build and validate a RunConfig; ConfigError for shape problems, ValidationError for values."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "experiment" not in raw:
        raise ConfigError("missing key: experiment")
    exp = raw["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}; registered: {list(EXPERIMENTS)}")
    praw = raw.get("params", {})
    if not isinstance(praw, dict):
        raise ConfigError("params must be an object")
    bad = set(praw) - PARAM_KEYS
    if bad:
        raise ConfigError(f"unknown params: {sorted(bad)}")
    params = Params(**{k: _number(v, f"params.{k}") for k, v in praw.items()})
    options = raw.get("options", {})
    if not isinstance(options, dict):
        raise ConfigError("options must be an object")
    cfg = RunConfig(
        experiment=exp,
        params=params,
        n=_number(raw.get("n", 64), "n", int),
        dt=_number(raw.get("dt", 1e-3), "dt"),
        T=_number(raw.get("T", 1.0), "T"),
        seed=_number(raw.get("seed", 0), "seed", int),
        out=str(raw.get("out", "runs/out")),
        snapshot_every=_number(raw.get("snapshot_every", 0), "snapshot_every", int),
        options=copy.deepcopy(options),
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    try:
        cfg.params.validate()
    except DomainError as exc:
        raise ValidationError(str(exc)) from None
    if cfg.n < 8 or cfg.n % 2:
        raise ValidationError(f"constraint violated: n even and >= 8 (got {cfg.n})")
    if not (cfg.dt > 0 and math.isfinite(cfg.dt)):
        raise ValidationError("constraint violated: dt > 0")
    if not (cfg.T > 0 and math.isfinite(cfg.T)):
        raise ValidationError("constraint violated: T > 0")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ValidationError("constraint violated: 0 <= seed < 2^64")
    if cfg.snapshot_every < 0:
        raise ValidationError("constraint violated: snapshot_every >= 0")
    if cfg.experiment in ("phase_mismatch", "ode_portrait") and not cfg.params.a < 0:
        raise ValidationError("constraint violated: a < 0 for this experiment")
    init = cfg.options.get("init")
    if init is not None and init not in INITS:
        raise ValidationError(f"constraint violated: init in {list(INITS)} (got {init!r})")
    if cfg.experiment == "xi_escape" and not cfg.options.get("lambda", 1e-3) > 0:
        raise ValidationError("constraint violated: lambda > 0")


def load(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    return from_dict(raw)


def override(raw: dict, key: str, value) -> dict:
    """Copy of ``raw`` with ``key`` set; bare names resolve to params, then top level, then options."""
    out = copy.deepcopy(raw)
    if "." in key:
        head, tail = key.split(".", 1)
        out.setdefault(head, {})[tail] = value
    elif key in PARAM_KEYS:
        out.setdefault("params", {})[key] = value
    elif key in TOP_KEYS:
        out[key] = value
    else:
        out.setdefault("options", {})[key] = value
    return out
