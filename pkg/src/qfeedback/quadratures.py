"""Oscillator parameters, measured quadrature frames and unit conversions.

Internally everything runs in oscillator units (hbar = m = omega = 1, time
tau = omega t). The helpers at the bottom of this module convert between
those and the physical units carried by :class:`OscillatorConfig`.
"""
from dataclasses import dataclass
import math

from .errors import FreeParticle, InvalidInput, UnnormalizableFrame, ZeroFrame


@dataclass(frozen=True)
class OscillatorConfig:
    """Physical parameters of the monitored particle.

    ``omega == 0`` is the free particle. ``gamma == 0`` is allowed so that the
    unmonitored reference dynamics can be expressed with the same object;
    anything needing the relative strength rejects it.
    """

    mass: float = 1.0
    omega: float = 1.0
    gamma: float = 0.5
    hbar: float = 1.0

    def __post_init__(self):
        if not self.mass > 0:
            raise InvalidInput(f"mass must be > 0, got {self.mass}")
        if not self.omega >= 0:
            raise InvalidInput(f"omega must be >= 0, got {self.omega}")
        if not self.gamma >= 0:
            raise InvalidInput(f"gamma must be >= 0, got {self.gamma}")
        if not self.hbar > 0:
            raise InvalidInput(f"hbar must be > 0, got {self.hbar}")

    @property
    def is_free(self):
        return self.omega == 0.0

    @classmethod
    def from_kappa(cls, kappa, mass=1.0, omega=1.0, hbar=1.0):
        """Config whose relative measurement strength equals ``kappa``."""
        if not omega > 0:
            raise FreeParticle("kappa is undefined for omega = 0")
        return cls(mass=mass, omega=omega, gamma=2.0 * mass * omega**2 * kappa / hbar, hbar=hbar)


@dataclass(frozen=True)
class QuadratureFrame:
    """Measured observable Q = alpha q + beta p and its conjugate
    P = -beta' q + alpha' p, normalised so alpha alpha' + beta beta' = 1."""

    alpha: float
    beta: float
    alpha_prime: float
    beta_prime: float

    @property
    def determinant(self):
        return self.alpha * self.alpha_prime + self.beta * self.beta_prime

    def to_qp(self, Q, P):
        """Position and momentum from frame coordinates."""
        return self.alpha_prime * Q - self.beta * P, self.beta_prime * Q + self.alpha * P

    def from_qp(self, q, p):
        return self.alpha * q + self.beta * p, -self.beta_prime * q + self.alpha_prime * p


POSITION_FRAME = QuadratureFrame(1.0, 0.0, 1.0, 0.0)


@dataclass(frozen=True)
class FeedbackGains:
    """Feedback generator F = u Q + v P (frame form).

    ``chi``/``delta`` hold the lab-frame form F = chi q + delta p when known.
    """

    u: float
    v: float
    chi: float | None = None
    delta: float | None = None

    def dimensionless(self, cfg):
        """(u / (m omega^2), v / omega)."""
        if cfg.is_free:
            raise FreeParticle("dimensionless gains need omega > 0")
        return self.u / (cfg.mass * cfg.omega**2), self.v / cfg.omega

    @classmethod
    def from_dimensionless(cls, u_tilde, v_tilde, cfg):
        return cls(u=u_tilde * cfg.mass * cfg.omega**2, v=v_tilde * cfg.omega)


ZERO_GAINS = FeedbackGains(0.0, 0.0, 0.0, 0.0)


def normalize_frame(alpha_raw, beta_raw, cfg):
    """Scale (alpha, beta) so that alpha**2 + (m omega beta)**2 = 1.

    The conjugate coefficients follow the harmonic form-invariance choice
    alpha' = alpha, beta' = (m omega)**2 beta.
    """
    if alpha_raw == 0 and beta_raw == 0:
        raise ZeroFrame("alpha and beta cannot both vanish")
    mw = cfg.mass * cfg.omega
    if mw == 0 and beta_raw != 0:
        raise UnnormalizableFrame("a free particle only admits position-like frames (beta = 0)")
    scale = math.hypot(alpha_raw, mw * beta_raw)
    alpha = alpha_raw / scale
    beta = beta_raw / scale
    return QuadratureFrame(alpha, beta, alpha, mw * mw * beta)


def relative_strength(cfg):
    """kappa = hbar gamma / (2 m omega^2)."""
    if cfg.is_free:
        raise FreeParticle("kappa is undefined for a free particle")
    return cfg.hbar * cfg.gamma / (2.0 * cfg.mass * cfg.omega**2)


def gains_lab_to_frame(chi, delta, frame):
    """Rewrite chi q + delta p as u Q + v P."""
    u = chi * frame.alpha_prime + delta * frame.beta_prime
    v = delta * frame.alpha - chi * frame.beta
    return u, v


def gains_frame_to_lab(u, v, frame):
    chi = u * frame.alpha - v * frame.beta_prime
    delta = u * frame.beta + v * frame.alpha_prime
    return chi, delta


def gains_in_frame(chi, delta, frame):
    """:class:`FeedbackGains` carrying both representations."""
    u, v = gains_lab_to_frame(chi, delta, frame)
    return FeedbackGains(u, v, chi, delta)


# -- unit conversions ---------------------------------------------------------

def moment_scales(cfg):
    """Divisors turning (var Q, var P, <{dQ, dP}>) into (x, y, z)."""
    if cfg.is_free:
        raise FreeParticle("oscillator units need omega > 0")
    mw = cfg.mass * cfg.omega
    return cfg.hbar / mw, cfg.hbar * mw, cfg.hbar


def moments_to_dimensionless(var_q, var_p, cov, cfg):
    sq, sp, sc = moment_scales(cfg)
    return var_q / sq, var_p / sp, cov / sc


def moments_from_dimensionless(x, y, z, cfg):
    sq, sp, sc = moment_scales(cfg)
    return x * sq, y * sp, z * sc


def means_to_dimensionless(q_mean, p_mean, cfg):
    sq, sp, _ = moment_scales(cfg)
    return q_mean / math.sqrt(sq), p_mean / math.sqrt(sp)


def means_from_dimensionless(q_bar, p_bar, cfg):
    sq, sp, _ = moment_scales(cfg)
    return q_bar * math.sqrt(sq), p_bar * math.sqrt(sp)


def time_to_dimensionless(t, cfg):
    if cfg.is_free:
        raise FreeParticle("oscillator time needs omega > 0")
    return t * cfg.omega


def time_from_dimensionless(tau, cfg):
    if cfg.is_free:
        raise FreeParticle("oscillator time needs omega > 0")
    return tau / cfg.omega
