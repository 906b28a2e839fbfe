"""Continuous position measurement with linear Markovian feedback.

Gaussian moment dynamics, stochastic trajectories, a grid stochastic
Schroedinger solver and number-basis master equations for a monitored
harmonic oscillator.
"""
__version__ = "0.1.0"

from .control import (
    bath_parameters,
    decay_rate,
    effective_temperature,
    mean_excitation,
    optimal_gains,
    stationary_energy,
    stationary_gaussian,
)
from .errors import InvalidInput, NumericalFailure, QFeedbackError
from .moments import (
    FIG1_INITIAL,
    MomentState,
    integrate_moments,
    integrate_si_moments,
    stationary_moments,
    stationary_moments_free,
)
from .quadratures import FeedbackGains, OscillatorConfig, QuadratureFrame, normalize_frame, relative_strength
from .trajectories import EnsembleSpec, GaussianTrajectoryState, run_ensemble

__all__ = [
    "EnsembleSpec", "FIG1_INITIAL", "FeedbackGains", "GaussianTrajectoryState", "InvalidInput",
    "MomentState", "NumericalFailure", "OscillatorConfig", "QFeedbackError", "QuadratureFrame",
    "bath_parameters", "decay_rate", "effective_temperature", "integrate_moments",
    "integrate_si_moments", "mean_excitation", "normalize_frame", "optimal_gains",
    "relative_strength", "run_ensemble", "stationary_energy", "stationary_gaussian",
    "stationary_moments", "stationary_moments_free",
]
