"""Bayesian hierarchical mixture clustering with a nested CRP and a multilevel HDP."""

from .evaluation import ari, f_measure, level_report, nmi, purity
from .inference import SamplerConfig, run_sampler
from .model import Hyperparams, generate

__all__ = ["Hyperparams", "SamplerConfig", "run_sampler", "generate",
           "purity", "nmi", "ari", "f_measure", "level_report"]
__version__ = "0.1.0"
