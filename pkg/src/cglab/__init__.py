"""Genus-3 Calabi-Gray construction toolkit."""

from .config import RunConfig, load_config, parse_config
from .errors import (ArcRoutingError, AssemblyError, ConfigError, CoverConsistencyError, NoAdmissibleU,
                     PositivityFailure, SeparatingLoopError, SpectralConvergenceError)
from .pipeline import RunOptions, RunReport, export_artifacts, run_pipeline, summarize
from .spectral import assemble_operators, morse_index, spectral_report
from .strominger import full_solve
from .surface import BranchConfig, build_surface, cyclic_unramified_cover, homology_loops, validate_config

__version__ = "0.1.0"

__all__ = [
    "ArcRoutingError", "AssemblyError", "BranchConfig", "ConfigError", "CoverConsistencyError", "NoAdmissibleU",
    "PositivityFailure", "RunConfig", "RunOptions", "RunReport", "SeparatingLoopError",
    "SpectralConvergenceError", "assemble_operators", "build_surface", "cyclic_unramified_cover",
    "export_artifacts", "full_solve", "homology_loops", "load_config", "morse_index", "parse_config",
    "run_pipeline", "spectral_report", "summarize", "validate_config",
]
