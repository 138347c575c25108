"""Random kinetic battery model: conservative depletion bounds under stochastic loads."""

from .core import BatteryParams, Soc, step_bounded, step_bounded_approx, step_unbounded
from .dist import InitSpec, SocDistribution, init_distribution, survival_probability, transform
from .exactsum import ExtendedSum
from .loads import DiscreteLoad, LoadModel, discretize_load
from .modelfile import Model, ModelError, load_model
from .mtp import Mtp, PeriodicCharge, compose, depletion_bound, propagate

__version__ = "0.1.0"

__all__ = [
    "BatteryParams",
    "Soc",
    "step_unbounded",
    "step_bounded",
    "step_bounded_approx",
    "InitSpec",
    "SocDistribution",
    "init_distribution",
    "transform",
    "survival_probability",
    "ExtendedSum",
    "LoadModel",
    "DiscreteLoad",
    "discretize_load",
    "Mtp",
    "PeriodicCharge",
    "compose",
    "propagate",
    "depletion_bound",
    "Model",
    "ModelError",
    "load_model",
]
