"""Finite-element heat conduction with latent heat: apparent capacity and heat integration."""

from .config import ConfigError, ExperimentConfig, load_config
from .estimators import PhaseChangeSimulator, StefanSolution
from .laser import LaserBeam, volumetric_source
from .latent_heat import ApparentCapacity, HeatIntegration, NoLatentHeat
from .material import MaterialModel, PhaseState, steel_316l, water
from .mesh import Mesh, build_box_mesh, build_layered_hex_mesh, build_line_mesh
from .postproc import MeltPoolMetrics, iteration_report, max_error_norm, melt_pool_metrics
from .solver import (
    ConvergenceError,
    HeatProblem,
    SimulationResult,
    SolverConfig,
    TimeController,
    VolumetricSource,
    simulate,
)
from .stefan import StefanProblem, front_position, solve_similarity_constant, temperature_at

__version__ = "0.1.0"

__all__ = [
    "ApparentCapacity",
    "ConfigError",
    "ConvergenceError",
    "ExperimentConfig",
    "HeatIntegration",
    "HeatProblem",
    "LaserBeam",
    "MaterialModel",
    "MeltPoolMetrics",
    "Mesh",
    "NoLatentHeat",
    "PhaseChangeSimulator",
    "PhaseState",
    "SimulationResult",
    "SolverConfig",
    "StefanProblem",
    "StefanSolution",
    "TimeController",
    "VolumetricSource",
    "build_box_mesh",
    "build_layered_hex_mesh",
    "build_line_mesh",
    "front_position",
    "iteration_report",
    "load_config",
    "max_error_norm",
    "melt_pool_metrics",
    "simulate",
    "solve_similarity_constant",
    "steel_316l",
    "temperature_at",
    "volumetric_source",
    "water",
]
