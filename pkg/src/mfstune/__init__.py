"""Preemptive sequential kriging optimization of MFS fictitious boundaries
for the three-sphere EEG forward problem."""

from .errors import MfsTuneError, RankFailure
from .geometry import DEFAULT_COUNTS, DEFAULT_HEAD, HeadModel, PointSet, ThetaBounds, ThetaVector, spiral_points
from .mfs import ForwardModel, MetricOptions, assemble, evaluate_scalp, quality_q, solve
from .oracle import Dipole, homogeneous_reference, layered_potential
from .sampling import DipoleRegion, RngStream, region_catalog, sample_dipole
from .tuner import Ledger, TunerConfig, TuningResult, pooled_mean, run

__version__ = "0.1.0"

__all__ = [
    "MfsTuneError", "RankFailure",
    "HeadModel", "DEFAULT_HEAD", "DEFAULT_COUNTS", "PointSet", "ThetaBounds", "ThetaVector", "spiral_points",
    "ForwardModel", "MetricOptions", "assemble", "solve", "evaluate_scalp", "quality_q",
    "Dipole", "layered_potential", "homogeneous_reference",
    "DipoleRegion", "RngStream", "region_catalog", "sample_dipole",
    "Ledger", "TunerConfig", "TuningResult", "pooled_mean", "run",
]
