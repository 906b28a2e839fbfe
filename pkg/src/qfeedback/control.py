"""Closed-form feedback design and the thermal-bath analogy.

Energies are in units of hbar omega and temperatures in hbar omega / k_B
unless stated otherwise.
"""
from dataclasses import dataclass
import math

from scipy import constants

from .errors import HeatingRegime, InvalidAnalogy, InvalidInput, NegativeOccupation
from .moments import stationary_moments
from .quadratures import FeedbackGains


@dataclass(frozen=True)
class ThermalAnalogy:
    c: float
    gamma_prime: float
    N_bath: float
    T_eff: float


@dataclass(frozen=True)
class OptimalGains:
    gains: FeedbackGains
    u_tilde: float
    v_tilde: float


def _sqrt_rm1(kappa):
    # sqrt(-1 + sqrt(1 + kappa^2)) without cancellation at small kappa
    return math.sqrt(kappa * kappa / (math.sqrt(1.0 + kappa * kappa) + 1.0))


def _check_kappa(kappa):
    if not kappa > 0:
        raise InvalidInput(f"kappa must be > 0, got {kappa}")


def optimal_gains(kappa, cfg):
    """Gains cancelling both Wiener terms of the mean-value equations at stationarity."""
    _check_kappa(kappa)
    if cfg.is_free:
        raise InvalidInput("optimal_gains needs omega > 0")
    s = _sqrt_rm1(kappa)
    mw2 = cfg.mass * cfg.omega**2
    u = mw2 * s * s
    v = -math.sqrt(2.0) * cfg.omega * s
    return OptimalGains(FeedbackGains(u, v), u / mw2, v / cfg.omega)


def decay_rate(kappa, omega):
    """Envelope decay rate of <Q>, <P> under the optimal gains (1/s)."""
    _check_kappa(kappa)
    # written so that it equals -v/2 of optimal_gains bit for bit
    return math.sqrt(2.0) * omega * _sqrt_rm1(kappa) / 2


def stationary_energy(kappa):
    """Stationary energy in the co-moving frame, units of hbar omega."""
    _check_kappa(kappa)
    return kappa / (2.0 * math.sqrt(2.0) * _sqrt_rm1(kappa))


def temperature_from_occupation(N):
    """Temperature (hbar omega / k_B) of a bath with mean occupation N."""
    if N < 0:
        raise NegativeOccupation(f"mean occupation {N} < 0")
    if N == 0:
        return 0.0
    return 1.0 / math.log1p(1.0 / N)


def bath_parameters(gains, kappa, cfg):
    """Match the RWA feedback master equation to a thermal Lindblad equation."""
    _check_kappa(kappa)
    u, v = gains.u, gains.v
    if v >= 0:
        raise HeatingRegime(f"v = {v} >= 0: no thermal analogy outside the cooling regime")
    w = cfg.omega
    kw = kappa * w
    # kw/4 + (u^2/(m w)^2 + v^2)/(4 kw) + v/2, completed to a square to avoid cancellation
    c = ((v + kw) ** 2 + (u / (cfg.mass * w)) ** 2) / (4 * kw)
    if c < 0:
        raise NegativeOccupation(f"pump coefficient c = {c} < 0")
    gamma_prime = -v
    N = c / gamma_prime
    return ThermalAnalogy(c, gamma_prime, N, temperature_from_occupation(N))


def effective_temperature(v, kappa, omega):
    """Temperature (hbar omega / k_B) from the gain alone, for u = 0.

    Uses 1 / (2 ln((v - kappa omega) / (v + kappa omega))), whose logarithm is
    undefined for -kappa omega < v < 0.
    """
    _check_kappa(kappa)
    if v >= 0:
        raise HeatingRegime(f"v = {v} >= 0")
    kw = kappa * omega
    if v == -kw:
        return 0.0
    ratio = (v - kw) / (v + kw)
    if ratio <= 0:
        raise InvalidAnalogy(f"log argument {ratio} <= 0 for v = {v} in (-kappa omega, 0)")
    return 1.0 / (2.0 * math.log(ratio))


def temperature_kelvin(T_units, omega_si, hbar_si=constants.hbar):
    """Convert a temperature in hbar omega / k_B to kelvin."""
    return T_units * hbar_si * omega_si / constants.k


def mean_excitation(t, n_i, N, gamma_prime):
    """Thermal relaxation <n>(t) = N + (n_i - N) exp(-gamma' t)."""
    if not gamma_prime > 0:
        raise InvalidInput("gamma_prime must be > 0")
    if n_i < 0 or N < 0:
        raise InvalidInput("occupations must be >= 0")
    return N + (n_i - N) * math.exp(-gamma_prime * t)


def stationary_gaussian(kappa):
    """Complex inverse width s of the stationary state exp(-s Q^2 / 2) (units m omega / hbar)."""
    x, _, z = stationary_moments(kappa)
    return complex(1.0, -z) / (2.0 * x)
