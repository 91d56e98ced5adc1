"""JSON run configuration.

Sections: ``model``, ``grid``, ``patches``, ``algorithm``, ``output`` and an
optional top-level ``initial`` (integer constant or per-cell list).
Defaults follow the benchmark setup: delta0 = 0.125, sigma = 1e-4,
epsilon = 0.04, c2 = 2, patch overlap 0.2 in 1D and 0.1 in 2D.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .control import ControlField, ValueSet
from .exceptions import InvalidArgument
from .grid import Grid, build_grid
from .models import ConvectionDiffusionModel, ConvolutionModel, Model, QuadraticModel
from .patches import PatchSet, make_uniform_patches
from .slip import SlipConfig


class ConfigError(InvalidArgument):
    pass


_KIND_DEFAULTS = {
    "conv1d": {"dim": 1, "domain": (-1.0, 1.0), "values": (-1, 0, 1), "alpha": 5e-4, "overlap": 0.2, "max_outer_iters": 1000},
    "pde2d": {"dim": 2, "domain": (0.0, 1.0), "values": (0, 1), "alpha": 1e-3, "overlap": 0.1, "max_outer_iters": 100},
    "quadratic": {"dim": 1, "domain": (0.0, 1.0), "values": (0, 1), "alpha": 0.0, "overlap": 0.2, "max_outer_iters": 1000},
}


@dataclass
class ModelSection:
    kind: str
    alpha: float | None = None
    values: list | None = None
    tau: float = 0.1
    epsilon: float = 4e-2
    c2: float = 2.0
    target: object = 0.0


@dataclass
class GridSection:
    n: object = 64
    dim: int | None = None
    domain: list | None = None


@dataclass
class PatchSection:
    n_per_axis: object = 1
    overlap: object = None
    strict: bool = True


@dataclass
class AlgorithmSection:
    delta0: float = 0.125
    sigma: float = 1e-4
    max_outer_iters: int | None = None
    lipschitz: float | None = None
    k_cap: object = "auto"
    solver: str = "auto"
    dfs_cap: int = 25
    workers: int = 1


@dataclass
class OutputSection:
    dir: str = "."
    log: str | None = "iterations.jsonl"
    summary: str | None = "summary.csv"
    result: str | None = "result.json"
    pgm: bool = True
    field_csv: bool = True
    state_csv: bool = False
    patches_json: bool = False


@dataclass
class RunConfig:
    model: ModelSection
    grid: GridSection = field(default_factory=GridSection)
    patches: PatchSection = field(default_factory=PatchSection)
    algorithm: AlgorithmSection = field(default_factory=AlgorithmSection)
    output: OutputSection = field(default_factory=OutputSection)
    initial: object = None

    @property
    def defaults(self) -> dict:
        return _KIND_DEFAULTS[self.model.kind]


def _section(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in section {name!r}: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"section {name!r}: {exc}") from None


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(data) - {"model", "grid", "patches", "algorithm", "output", "initial"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    if "model" not in data:
        raise ConfigError("missing 'model' section")
    model = _section(ModelSection, data["model"], "model")
    if model.kind not in _KIND_DEFAULTS:
        raise ConfigError(f"model kind must be one of {sorted(_KIND_DEFAULTS)}, got {model.kind!r}")
    cfg = RunConfig(
        model,
        _section(GridSection, data.get("grid"), "grid"),
        _section(PatchSection, data.get("patches"), "patches"),
        _section(AlgorithmSection, data.get("algorithm"), "algorithm"),
        _section(OutputSection, data.get("output"), "output"),
        data.get("initial"),
    )
    # surface algorithm errors early, with their own messages
    slip_config(cfg)
    return cfg


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(data)


def slip_config(cfg: RunConfig) -> SlipConfig:
    a = cfg.algorithm
    return SlipConfig(
        delta0=a.delta0,
        sigma=a.sigma,
        max_outer_iters=a.max_outer_iters or cfg.defaults["max_outer_iters"],
        k_cap=a.k_cap,
        lipschitz=a.lipschitz,
        solver=a.solver,
        dfs_cap=a.dfs_cap,
        workers=a.workers,
        strict_cover=cfg.patches.strict,
    )


def value_set(cfg: RunConfig) -> ValueSet:
    return ValueSet(tuple(cfg.model.values if cfg.model.values is not None else cfg.defaults["values"]))


def alpha(cfg: RunConfig) -> float:
    a = cfg.model.alpha if cfg.model.alpha is not None else cfg.defaults["alpha"]
    if not a >= 0:
        raise ConfigError("alpha must be nonnegative")
    return float(a)


def build_grid_from(cfg: RunConfig) -> Grid:
    d = cfg.defaults
    dim = cfg.grid.dim or d["dim"]
    domain = cfg.grid.domain if cfg.grid.domain is not None else d["domain"]
    return build_grid(dim, domain, cfg.grid.n)


def build_model(cfg: RunConfig, grid: Grid | None = None) -> Model:
    grid = grid or build_grid_from(cfg)
    m = cfg.model
    if m.kind == "conv1d":
        return ConvolutionModel(grid, tau=m.tau)
    if m.kind == "pde2d":
        return ConvectionDiffusionModel(grid, epsilon=m.epsilon, c2=m.c2, value_set=value_set(cfg))
    return QuadraticModel(grid, m.target)


def build_patches(cfg: RunConfig, grid: Grid) -> PatchSet:
    overlap = cfg.patches.overlap if cfg.patches.overlap is not None else cfg.defaults["overlap"]
    return make_uniform_patches(grid, cfg.patches.n_per_axis, overlap, strict=cfg.patches.strict)


def initial_field(cfg: RunConfig, grid: Grid, vs: ValueSet) -> ControlField:
    init = cfg.initial
    if init is None:
        return ControlField.constant(grid, vs.closest_to_zero(), vs)
    if isinstance(init, (int, float)):
        return ControlField.constant(grid, int(init), vs)
    return ControlField(grid, init, vs)
