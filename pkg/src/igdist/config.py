"""Experiment configuration: JSON loading and validation.

A config names exactly one model (explicit P or rank-1 factors), the
two root vertex types (1-based in the file, as in all user-facing
labels), per-stage replicate counts, horizons, and a mandatory master
seed.  Unknown keys are rejected so that typos fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ValidationError
from .model import ModelParams, Rank1Params, rank1_build, validate_params

_TOP_KEYS = {
    "model",
    "rank1",
    "k1",
    "k2",
    "reps",
    "horizon",
    "depth",
    "seed",
    "workers",
    "output_dir",
    "c25",
    "scheme",
    "population_cap",
}
_REP_KEYS = {"graph", "pool", "bp"}


@dataclass
class ExperimentConfig:
    """Validated experiment description; k1/k2 are 0-based internally."""

    params: ModelParams
    seed: int
    k1: int = 0
    k2: int = 0
    graph_reps: int = 1000
    pool_size: int = 1000
    bp_reps: int = 10000
    horizon: int | None = None
    depth: int = 6
    workers: int = 1
    output_dir: str = "out"
    c25: float = 1.0
    scheme: dict | None = None
    population_cap: int = 100_000_000
    rank1: Rank1Params | None = None
    raw: dict = field(default_factory=dict, repr=False)


def _model_from_block(block: dict) -> ModelParams:
    extra = set(block) - {"n", "m", "P"}
    if extra:
        raise ConfigError(f"unknown model keys: {sorted(extra)}")
    for key in ("n", "m", "P"):
        if key not in block:
            raise ConfigError(f"model block missing '{key}'")
    return ModelParams(
        n=np.asarray(block["n"]), m=np.asarray(block["m"]), P=np.asarray(block["P"])
    )


def _rank1_from_block(block: dict) -> tuple[ModelParams, Rank1Params]:
    extra = set(block) - {"alpha", "beta", "n", "m"}
    if extra:
        raise ConfigError(f"unknown rank1 keys: {sorted(extra)}")
    for key in ("alpha", "beta", "n", "m"):
        if key not in block:
            raise ConfigError(f"rank1 block missing '{key}'")
    r = Rank1Params(alpha=np.asarray(block["alpha"]), beta=np.asarray(block["beta"]))
    params, _, _, _ = rank1_build(r, block["n"], block["m"])
    return params, r


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "seed" not in doc:
        raise ConfigError("seed required")
    if ("model" in doc) == ("rank1" in doc):
        raise ConfigError("exactly one model block required ('model' or 'rank1')")

    rank1 = None
    if "model" in doc:
        params = _model_from_block(doc["model"])
        validate_params(params)
    else:
        params, rank1 = _rank1_from_block(doc["rank1"])

    reps = doc.get("reps", {})
    if not isinstance(reps, dict) or set(reps) - _REP_KEYS:
        raise ConfigError(
            f"reps must be an object with keys among {sorted(_REP_KEYS)}"
        )
    for key, v in reps.items():
        if not isinstance(v, int) or v < 1:
            raise ConfigError(f"reps.{key} must be a positive integer")

    def positive_type(name, default, minimum=1):
        v = doc.get(name, default)
        if v is None:
            return None
        if not isinstance(v, int) or v < minimum:
            raise ConfigError(f"{name} must be an integer >= {minimum}")
        return v

    k1 = positive_type("k1", 1)
    k2 = positive_type("k2", 1)
    if k1 > params.K or k2 > params.K:
        raise ConfigError(f"k1/k2 must be within 1..{params.K}")

    cfg = ExperimentConfig(
        params=params,
        rank1=rank1,
        seed=int(doc["seed"]),
        k1=k1 - 1,
        k2=k2 - 1,
        graph_reps=reps.get("graph", 1000),
        pool_size=reps.get("pool", 1000),
        bp_reps=reps.get("bp", 10000),
        horizon=positive_type("horizon", None),
        depth=positive_type("depth", 6),
        workers=positive_type("workers", 1),
        output_dir=str(doc.get("output_dir", "out")),
        c25=float(doc.get("c25", 1.0)),
        scheme=doc.get("scheme"),
        population_cap=positive_type("population_cap", 100_000_000),
        raw=doc,
    )
    if cfg.k1 == cfg.k2 and params.n[cfg.k1] < 2:
        raise ConfigError("k1 == k2 requires at least two vertices of that type")
    return cfg


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"parse error in {path} at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e
    try:
        return config_from_dict(doc)
    except ValidationError as e:
        raise ConfigError(f"invalid model in {path}: {e}") from e
