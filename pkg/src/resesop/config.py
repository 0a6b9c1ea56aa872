"""
Run configuration: one JSON document, validated into frozen dataclasses.

See ``docs/source/config.rst`` for the schema.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple, Type, TypeVar, Union

from resesop.definitions import (
    DEFAULT_FIELD_OF_VIEW,
    Engine,
    ExperimentKind,
    InexactnessMode,
    Initialization,
    MotionModel,
)
from resesop.errors import ConfigError
from resesop.operators import DEFAULT_DENSE_CAP, DEFAULT_NUDFT_PIXEL_CAP
from resesop.redundancy import DEFAULT_RANK_TOL
from resesop.solver import DEFAULT_MAX_BLOCKS

S = TypeVar("S")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _section(cls: Type[S], data: Any, name: str) -> S:
    """Builds a config section from a JSON object, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"`{name}` must be an object")
    known = {f.name for f in fields(cls)}  # type: ignore[arg-type]
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in `{name}`: {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid `{name}`: {e}") from e


@dataclass(frozen=True)
class GeometryConfig:
    n_angles: int = 192
    n_detectors: int = 406
    angle_max: float = math.pi
    detector_extent: Optional[float] = None
    ray_step: float = 0.5


@dataclass(frozen=True)
class MriConfig:
    n_coils: int = 4
    acceleration: int = 1
    center_lines: int = 0
    n_spokes: int = 32
    samples_per_spoke: Optional[int] = None
    pixel_cap: int = DEFAULT_NUDFT_PIXEL_CAP

    def __post_init__(self) -> None:
        _require(self.n_coils >= 1, "mri.n_coils must be >= 1")
        _require(self.acceleration >= 1, "mri.acceleration must be >= 1")
        _require(self.center_lines >= 0, "mri.center_lines must be >= 0")
        _require(self.n_spokes >= 1, "mri.n_spokes must be >= 1")


@dataclass(frozen=True)
class PartitionConfig:
    n_bins: int = 16
    block_sizes: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        _require(self.n_bins >= 1, "partition.n_bins must be >= 1")
        if self.block_sizes is not None:
            object.__setattr__(self, "block_sizes", tuple(int(v) for v in self.block_sizes))


@dataclass(frozen=True)
class PhantomConfig:
    porosity: float = 0.7
    smoothness: Optional[float] = None

    def __post_init__(self) -> None:
        _require(0 < self.porosity <= 1, "phantom.porosity must lie in (0, 1]")


@dataclass(frozen=True)
class MotionConfig:
    model: Optional[MotionModel] = None
    dt: float = 1.0
    reference_bin: Optional[int] = None

    def __post_init__(self) -> None:
        if self.model is not None:
            object.__setattr__(self, "model", MotionModel(self.model))
        _require(self.dt >= 0, "motion.dt must be >= 0")


@dataclass(frozen=True)
class NoiseConfig:
    delta: float = 0.0
    delta_relative: Optional[float] = None

    def __post_init__(self) -> None:
        _require(self.delta >= 0, "noise.delta must be >= 0")
        _require(
            self.delta_relative is None or self.delta_relative >= 0,
            "noise.delta_relative must be >= 0",
        )


@dataclass(frozen=True)
class SolverConfig:
    engine: Engine = Engine.SIMULTANEOUS
    mode: InexactnessMode = InexactnessMode.ORACLE_E
    init: Initialization = Initialization.ZERO
    k_max: int = 100
    tau: float = 1.001
    cg_steps: int = 2
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    max_blocks: int = DEFAULT_MAX_BLOCKS
    threads: Optional[int] = None
    delta: Optional[Union[float, Tuple[float, ...]]] = None
    eta: Optional[Tuple[float, ...]] = None
    rho: float = 1.0
    initial: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "engine", Engine(self.engine))
        object.__setattr__(self, "mode", InexactnessMode(self.mode))
        object.__setattr__(self, "init", Initialization(self.init))
        _require(self.k_max >= 0, "solver.k_max must be >= 0")
        _require(self.tau >= 1, "solver.tau must be >= 1")
        _require(self.cg_steps >= 0, "solver.cg_steps must be >= 0")
        _require(self.rho > 0, "solver.rho must be > 0")
        _require(self.threads is None or self.threads >= 1, "solver.threads must be >= 1")
        if isinstance(self.delta, list):
            object.__setattr__(self, "delta", tuple(float(v) for v in self.delta))
        if self.eta is not None:
            object.__setattr__(self, "eta", tuple(float(v) for v in self.eta))


@dataclass(frozen=True)
class RedundancyConfig:
    cap: int = DEFAULT_DENSE_CAP
    rank_tol: float = DEFAULT_RANK_TOL

    def __post_init__(self) -> None:
        _require(self.cap >= 1, "redundancy.cap must be >= 1")
        _require(0 < self.rank_tol < 1, "redundancy.rank_tol must lie in (0, 1)")


@dataclass(frozen=True)
class CustomDenseConfig:
    """ArrayFile paths, relative to the configuration file."""

    matrix: str = ""
    data: Optional[str] = None
    reference: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentKind
    image_size: int = 64
    field_of_view: float = DEFAULT_FIELD_OF_VIEW
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    mri: MriConfig = field(default_factory=MriConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    phantom: PhantomConfig = field(default_factory=PhantomConfig)
    motion: MotionConfig = field(default_factory=MotionConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    redundancy: RedundancyConfig = field(default_factory=RedundancyConfig)
    custom_dense: Optional[CustomDenseConfig] = None
    seed: int = 0
    output: str = "out"

    SECTIONS = {
        "geometry": GeometryConfig,
        "mri": MriConfig,
        "partition": PartitionConfig,
        "phantom": PhantomConfig,
        "motion": MotionConfig,
        "noise": NoiseConfig,
        "solver": SolverConfig,
        "redundancy": RedundancyConfig,
        "custom_dense": CustomDenseConfig,
    }

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "experiment", ExperimentKind(self.experiment))
        except ValueError as e:
            choices = ", ".join(k.value for k in ExperimentKind)
            raise ConfigError(f"unknown experiment `{self.experiment}`; use one of {choices}") from e
        _require(self.image_size >= 4, "image_size must be >= 4")
        _require(self.field_of_view > 0, "field_of_view must be > 0")
        _require(self.seed >= 0, "seed must be >= 0")
        if self.experiment == ExperimentKind.CUSTOM_DENSE:
            _require(
                self.custom_dense is not None and bool(self.custom_dense.matrix),
                "custom_dense.matrix is required for the custom_dense experiment",
            )
        model = self.motion_model
        allowed = {
            ExperimentKind.CT_FLOW: {MotionModel.NONE, MotionModel.FLOW, MotionModel.UNIFORM},
            ExperimentKind.MRI_CARTESIAN: {
                MotionModel.NONE, MotionModel.UNIFORM, MotionModel.NON_UNIFORM,
            },
            ExperimentKind.MRI_NUDFT: {MotionModel.NONE, MotionModel.UNIFORM},
            ExperimentKind.CUSTOM_DENSE: {MotionModel.NONE},
        }[self.experiment]
        _require(
            model in allowed,
            f"motion model `{model.value}` is not available for `{self.experiment.value}`",
        )

    @property
    def motion_model(self) -> MotionModel:
        if self.motion.model is not None:
            return self.motion.model
        return {
            ExperimentKind.CT_FLOW: MotionModel.FLOW,
            ExperimentKind.MRI_CARTESIAN: MotionModel.NON_UNIFORM,
            ExperimentKind.MRI_NUDFT: MotionModel.UNIFORM,
            ExperimentKind.CUSTOM_DENSE: MotionModel.NONE,
        }[self.experiment]

    @classmethod
    def from_dict(cls, document: Dict[str, Any], base_dir: str = ".") -> RunConfig:
        if not isinstance(document, dict):
            raise ConfigError("the configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(document) - known)
        if unknown:
            raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
        if "experiment" not in document:
            raise ConfigError("`experiment` is required")
        values = dict(document)
        for name, section in cls.SECTIONS.items():
            if name in values:
                values[name] = _section(section, values[name], name)
        try:
            config = cls(**values)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"invalid configuration: {e}") from e
        return config.resolved(base_dir)

    def resolved(self, base_dir: str) -> RunConfig:
        """Makes file references absolute and checks that they exist."""

        def resolve(path: Optional[str], key: str) -> Optional[str]:
            if path is None:
                return None
            full = os.path.normpath(os.path.join(base_dir, path))
            if not os.path.isfile(full):
                raise ConfigError(f"`{key}` refers to missing file '{full}'")
            return full

        solver = replace(self.solver, initial=resolve(self.solver.initial, "solver.initial"))
        custom = self.custom_dense
        if custom is not None:
            custom = CustomDenseConfig(
                matrix=resolve(custom.matrix, "custom_dense.matrix") or "",
                data=resolve(custom.data, "custom_dense.data"),
                reference=resolve(custom.reference, "custom_dense.reference"),
            )
        return replace(self, solver=solver, custom_dense=custom)

    def with_overrides(self, seed: Optional[int] = None, output: Optional[str] = None) -> RunConfig:
        updated = self
        if seed is not None:
            _require(seed >= 0, "seed must be >= 0")
            updated = replace(updated, seed=seed)
        if output is not None:
            updated = replace(updated, output=output)
        return updated


def load_config(path: str) -> RunConfig:
    """Reads and validates the run configuration at ``path``."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as e:
            raise ConfigError(f"'{path}' is not valid JSON: {e}") from e
    return RunConfig.from_dict(document, os.path.dirname(os.path.abspath(path)))


__all__ = [
    "GeometryConfig",
    "MriConfig",
    "PartitionConfig",
    "PhantomConfig",
    "MotionConfig",
    "NoiseConfig",
    "SolverConfig",
    "RedundancyConfig",
    "CustomDenseConfig",
    "RunConfig",
    "load_config",
]
