"""
Builds the experiments a :class:`~resesop.config.RunConfig` describes and runs the
simulate / reconstruct / analyze steps on them.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from resesop.config import RunConfig
from resesop.definitions import (
    ExperimentKind,
    ImageGrid,
    InexactnessMode,
    MeasurementVector,
    MotionModel,
    SubproblemPartition,
)
from resesop.dynamics import (
    DynamicScene,
    RigidMotion,
    cartesian_masks,
    dynamic_forward,
    ellipse_phantom,
    generate_porous_phantom,
    radial_spokes,
    sample_motion,
    simulate_dynamic_data,
    solve_stationary_flow,
    synthetic_coil_maps,
)
from resesop.errors import ConfigError, ShapeMismatchError
from resesop.operators import (
    LinearOperatorHandle,
    MatrixOperator,
    NudftOperator,
    RadonGeometry,
    RadonOperator,
    SenseOperator,
    SenseSetup,
    materialize_dense,
    split,
)
from resesop.redundancy import RedundancyReport, compute_B
from resesop.solver import (
    InexactnessProfile,
    ProblemConfig,
    ResesopResult,
    compute_inexactness,
    consistency_profile,
    run_resesop,
)
from resesop.serialization import read_array

logger = logging.getLogger(__name__)


@dataclass
class Experiment:
    """The static operator ``A^eta``, its partition into time bins and the dynamic scene."""

    config: RunConfig
    operator: LinearOperatorHandle
    partition: SubproblemPartition
    image_shape: Optional[Tuple[int, int]]
    scene: Optional[DynamicScene] = None
    p_map: Optional[np.ndarray] = None

    @property
    def reference(self) -> Optional[ImageGrid]:
        return None if self.scene is None else self.scene.reference


def _read_array_file(path: str) -> np.ndarray:
    with open(path, "rb") as handle:
        return read_array(handle)


def _rigid_motion(config: RunConfig, p_map: Optional[np.ndarray]) -> Optional[RigidMotion]:
    model = config.motion_model
    if model in (MotionModel.UNIFORM, MotionModel.NON_UNIFORM):
        return sample_motion(
            model, config.partition.n_bins, p_map, config.seed, config.motion.reference_bin
        )
    return None


def _ct_experiment(config: RunConfig) -> Experiment:
    size = config.image_size
    g = config.geometry
    geometry = RadonGeometry(g.n_angles, g.n_detectors, g.angle_max, g.detector_extent, g.ray_step)
    operator = RadonOperator((size, size), geometry, config.field_of_view)
    partition = SubproblemPartition.uniform(
        operator.range_size, config.partition.n_bins, unit=geometry.n_detectors
    )
    image, mask = generate_porous_phantom(size, config.phantom.porosity, config.seed, config.phantom.smoothness)
    image = ImageGrid(image.values, config.field_of_view)
    flow = None
    if config.motion_model == MotionModel.FLOW:
        flow = solve_stationary_flow(mask)
        logger.info("flow solved; max speed %.3f px per unit time", flow.max_speed)
    scene = DynamicScene(
        image, partition.count, motion=_rigid_motion(config, None), flow=flow, dt=config.motion.dt
    )
    return Experiment(config, operator, partition, (size, size), scene)


def _mri_cartesian_experiment(config: RunConfig) -> Experiment:
    size = config.image_size
    shape = (size, size)
    masks, p_map = cartesian_masks(
        shape, config.partition.n_bins, config.mri.acceleration, config.mri.center_lines
    )
    setup = SenseSetup(synthetic_coil_maps(shape, config.mri.n_coils), masks)
    operator = SenseOperator(setup)
    image = ellipse_phantom(size, field_of_view=config.field_of_view)
    image = ImageGrid(image.values.astype(np.complex128), config.field_of_view)
    scene = DynamicScene(image, setup.n_bins, motion=_rigid_motion(config, p_map))
    return Experiment(config, operator, operator.bin_partition(), shape, scene, p_map)


def _mri_nudft_experiment(config: RunConfig) -> Experiment:
    size = config.image_size
    shape = (size, size)
    spokes = radial_spokes(
        shape, config.mri.n_spokes, config.partition.n_bins, config.mri.samples_per_spoke
    )
    operator = NudftOperator(shape, np.concatenate(spokes), config.mri.pixel_cap)
    partition = SubproblemPartition.from_sizes([s.shape[0] for s in spokes])
    image = ellipse_phantom(size, field_of_view=config.field_of_view)
    image = ImageGrid(image.values.astype(np.complex128), config.field_of_view)
    scene = DynamicScene(image, partition.count, motion=_rigid_motion(config, None))
    return Experiment(config, operator, partition, shape, scene)


def _custom_dense_experiment(config: RunConfig) -> Experiment:
    custom = config.custom_dense
    if custom is None:
        raise ConfigError("custom_dense section is required")
    matrix = _read_array_file(custom.matrix)
    if matrix.ndim != 2:
        raise ShapeMismatchError("custom matrix dimensionality", matrix.ndim, 2)
    operator = MatrixOperator(matrix)
    if config.partition.block_sizes:
        partition = SubproblemPartition.from_sizes(config.partition.block_sizes)
    else:
        partition = SubproblemPartition.uniform(operator.range_size, config.partition.n_bins)
    partition.require_size(operator.range_size)
    scene = None
    shape: Optional[Tuple[int, int]] = None
    if custom.reference is not None:
        reference = _read_array_file(custom.reference)
        if reference.size != operator.domain_size:
            raise ShapeMismatchError("reference size", reference.size, operator.domain_size)
        values = reference if reference.ndim == 2 else reference.reshape(1, -1)
        shape = values.shape  # type: ignore[assignment]
        scene = DynamicScene(ImageGrid(values, config.field_of_view), partition.count)
    return Experiment(config, operator, partition, shape, scene)


def build_experiment(config: RunConfig) -> Experiment:
    builders = {
        ExperimentKind.CT_FLOW: _ct_experiment,
        ExperimentKind.MRI_CARTESIAN: _mri_cartesian_experiment,
        ExperimentKind.MRI_NUDFT: _mri_nudft_experiment,
        ExperimentKind.CUSTOM_DENSE: _custom_dense_experiment,
    }
    experiment = builders[config.experiment](config)
    logger.info(
        "%s: operator %r, %d block(s)",
        config.experiment.value,
        experiment.operator,
        experiment.partition.count,
    )
    return experiment


@dataclass
class Simulation:
    reference: ImageGrid
    data: MeasurementVector
    e: np.ndarray
    delta: float
    motion_document: Dict[str, Any]

    @property
    def data_norms(self) -> np.ndarray:
        return self.data.block_norms()


def motion_document(experiment: Experiment) -> Dict[str, Any]:
    """The exact per-bin deformation of the scene, replayable without the generator."""
    config = experiment.config
    scene = experiment.scene
    document: Dict[str, Any] = {"model": config.motion_model.value, "n_bins": experiment.partition.count}
    if scene is None:
        return document
    if scene.motion is not None:
        document.update(scene.motion.to_dict())
    if scene.flow is not None:
        document["dt"] = scene.dt
        document["times"] = [scene.bin_time(i) for i in range(scene.n_bins)]
    if experiment.p_map is not None:
        document["p_map"] = experiment.p_map.tolist()
    return document


def motion_from_document(document: Dict[str, Any]) -> Optional[RigidMotion]:
    if "bins" not in document:
        return None
    return RigidMotion.from_dict(document)


def noise_level(experiment: Experiment) -> float:
    """``noise.delta``, or ``noise.delta_relative`` times the norm of the noise-free data."""
    config = experiment.config
    if config.noise.delta_relative is None or experiment.scene is None:
        return config.noise.delta
    clean = dynamic_forward(experiment.scene, experiment.operator, experiment.partition)
    return config.noise.delta_relative * float(np.linalg.norm(clean.values))


def simulate(experiment: Experiment) -> Simulation:
    """Dynamic data of the experiment's scene and the inexactness level of every bin."""
    config = experiment.config
    scene = experiment.scene
    if scene is None:
        raise ConfigError("simulation needs a reference image (custom_dense.reference)")
    delta = noise_level(experiment)
    data = simulate_dynamic_data(scene, experiment.operator, experiment.partition, delta, config.seed)
    ops = split(experiment.operator, experiment.partition)
    e = compute_inexactness(scene.reference, ops, data)
    return Simulation(scene.reference, data, e, delta, motion_document(experiment))


def inexactness_profile(
    config: RunConfig, e: np.ndarray, delta: float
) -> InexactnessProfile:
    """The stripe widths the solver section asks for."""
    solver = config.solver
    if solver.mode == InexactnessMode.ORACLE_E:
        return InexactnessProfile.oracle(e, delta)
    noise = solver.delta if solver.delta is not None else delta
    eta = solver.eta if solver.eta is not None else (0.0,) * len(e)
    return InexactnessProfile.analytic(noise, eta, solver.rho)


@dataclass
class Reconstruction:
    result: ResesopResult
    e: np.ndarray
    final_norms: np.ndarray
    loss: float


def reconstruct(
    experiment: Experiment,
    data: MeasurementVector,
    e: np.ndarray,
    delta: float = 0.0,
    initial: Optional[np.ndarray] = None,
) -> Reconstruction:
    config = experiment.config
    solver = config.solver
    if initial is None and solver.initial is not None:
        initial = _read_array_file(solver.initial)
    problem = ProblemConfig(
        operator=experiment.operator,
        data=data,
        profile=inexactness_profile(config, e, delta),
        engine=solver.engine,
        init=solver.init,
        k_max=solver.k_max,
        tau=solver.tau,
        cg_steps=solver.cg_steps,
        newton_tol=solver.newton_tol,
        newton_max_iter=solver.newton_max_iter,
        max_blocks=solver.max_blocks,
        threads=solver.threads,
        initial=initial,
        image_shape=experiment.image_shape,
        field_of_view=config.field_of_view,
    )
    result = run_resesop(problem)
    ops = split(experiment.operator, experiment.partition)
    norms, loss = consistency_profile(result.iterate, ops, data, e)
    return Reconstruction(result, e, norms, loss)


def analyze_redundancy(experiment: Experiment) -> RedundancyReport:
    config = experiment.config
    matrix = materialize_dense(experiment.operator, config.redundancy.cap)
    return compute_B(matrix, experiment.partition, config.redundancy.rank_tol, config.redundancy.cap)


__all__ = [
    "Experiment",
    "build_experiment",
    "Simulation",
    "motion_document",
    "motion_from_document",
    "noise_level",
    "simulate",
    "inexactness_profile",
    "Reconstruction",
    "reconstruct",
    "analyze_redundancy",
]
