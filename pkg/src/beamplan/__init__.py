"""Constrained-POMDP planner and simulator for mm-wave beam training vs. data
transmission on a road link."""

from .config import ExperimentConfig
from .kernels import BACKEND
from .linkbudget import DetectionSpec, RadioConfig
from .mobility import MobilityParams
from .model import ActionSpec, BeamModel, Obs

__all__ = [
    "ActionSpec",
    "BACKEND",
    "BeamModel",
    "DetectionSpec",
    "ExperimentConfig",
    "MobilityParams",
    "Obs",
    "RadioConfig",
]
