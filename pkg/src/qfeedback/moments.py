"""Second-moment dynamics of the measured quadrature under Gaussian closure.

Dimensionless variables (oscillator units, tau = omega t)::

    x = (m omega / hbar) <dQ^2>
    y = <dP^2> / (hbar m omega)
    z = <{dQ, dP}> / hbar

obey ``x' = -2 kappa x^2 + z``, ``y' = kappa/2 (1 - z^2) - z`` and
``z' = 2 (y - x) - 2 kappa x z``. The same flow in physical units is
available through :func:`si_moment_rhs` and also covers the free particle.
"""
from dataclasses import dataclass
import math

import numpy as np

from ._accel import njit
from .errors import HeisenbergViolation, IntegrationUnstable, InvalidInput, NotFreeParticle
from .quadratures import moments_from_dimensionless, moments_to_dimensionless, relative_strength

HEISENBERG_TOL = 1e-9
DEFAULT_DTAU = 1e-3


@dataclass(frozen=True)
class MomentState:
    x: float
    y: float
    z: float
    tau: float = 0.0

    def __post_init__(self):
        if not (self.x > 0 and self.y > 0):
            raise InvalidInput(f"variances must be positive, got x={self.x}, y={self.y}")
        if uncertainty_defect(self) < -HEISENBERG_TOL:
            raise HeisenbergViolation(
                f"x*y - 1/4 - z^2/4 = {uncertainty_defect(self):.3e} violates the uncertainty bound")

    def as_tuple(self):
        return self.x, self.y, self.z


@dataclass(frozen=True)
class SIMoments:
    var_q: float
    var_p: float
    cov: float
    t: float = 0.0

    def defect(self, hbar):
        return self.var_q * self.var_p - hbar**2 / 4 - self.cov**2 / 4


def uncertainty_defect(s):
    """x y - 1/4 - z^2/4; zero for pure Gaussian states."""
    return s.x * s.y - 0.25 - 0.25 * s.z * s.z


# fig1 preset start: on the pure-state manifold, away from stationarity.
FIG1_INITIAL = MomentState(1 / math.sqrt(2), 5 / (8 * math.sqrt(2)), 0.5)
GROUND_STATE = MomentState(0.5, 0.5, 0.0)


def moment_rhs(s, kappa):
    x, y, z = s.x, s.y, s.z
    dx = -2.0 * kappa * x * x + z
    dy = 0.5 * kappa * (1.0 - z * z) - z
    dz = 2.0 * (y - x) - 2.0 * kappa * x * z
    return dx, dy, dz


def stationary_moments(kappa):
    """Closed-form fixed point (x_inf, y_inf, z_inf) of the moment flow."""
    if not kappa > 0:
        raise InvalidInput(f"kappa must be > 0, got {kappa}")
    r = math.sqrt(1.0 + kappa * kappa)
    # r - 1 loses precision for small kappa
    rm1 = kappa * kappa / (r + 1.0)
    z = rm1 / kappa
    x = math.sqrt(rm1) / (math.sqrt(2.0) * kappa)
    return x, r * x, z


def stationary_state(kappa):
    return MomentState(*stationary_moments(kappa))


def stationary_moments_free(cfg):
    """Stationary (var q, var p, cov) of a monitored free particle."""
    if not cfg.is_free:
        raise NotFreeParticle("stationary_moments_free needs omega = 0")
    if not cfg.gamma > 0:
        raise InvalidInput("a free particle has no stationary state without measurement")
    hb, m, g = cfg.hbar, cfg.mass, cfg.gamma
    return SIMoments(math.sqrt(hb / (m * g)), 0.5 * hb * math.sqrt(hb * m * g), hb)


def convergence_times(cfg):
    """The two convergence-time scales quoted for the moment flow (seconds).

    ``"measurement"`` is m omega / (hbar gamma); ``"relative"`` is
    1 / (omega kappa), which is twice as long. Neither is preferred here.
    """
    kappa = relative_strength(cfg)
    return {
        "measurement": cfg.mass * cfg.omega / (cfg.hbar * cfg.gamma),
        "relative": 1.0 / (cfg.omega * kappa),
    }


@njit
def _si_rhs(vq, vp, c, gamma, hbar, mass, w2):
    dvq = -gamma * vq * vq + c / mass
    dvp = 0.25 * gamma * (hbar * hbar - c * c) - mass * w2 * c
    dc = 2.0 * vp / mass - 2.0 * mass * w2 * vq - gamma * c * vq
    return dvq, dvp, dc


def si_moment_rhs(s, cfg):
    """Time derivatives (per second) of (var Q, var P, cov) for H = P^2/2m + m w^2 Q^2/2."""
    return _si_rhs(s.var_q, s.var_p, s.cov, cfg.gamma, cfg.hbar, cfg.mass, cfg.omega**2)


@njit
def _rk4_kernel(vq, vp, c, gamma, hbar, mass, w2, dt, n_steps, stride):
    """Classical RK4 on the moment flow; returns records and the first bad step (or -1)."""
    n_rec = n_steps // stride + 1
    out = np.empty((n_rec, 3))
    out[0, 0] = vq
    out[0, 1] = vp
    out[0, 2] = c
    bad = -1
    h2 = 0.5 * dt
    h6 = dt / 6.0
    for n in range(1, n_steps + 1):
        k1q, k1p, k1c = _si_rhs(vq, vp, c, gamma, hbar, mass, w2)
        k2q, k2p, k2c = _si_rhs(vq + h2 * k1q, vp + h2 * k1p, c + h2 * k1c, gamma, hbar, mass, w2)
        k3q, k3p, k3c = _si_rhs(vq + h2 * k2q, vp + h2 * k2p, c + h2 * k2c, gamma, hbar, mass, w2)
        k4q, k4p, k4c = _si_rhs(vq + dt * k3q, vp + dt * k3p, c + dt * k3c, gamma, hbar, mass, w2)
        vq = vq + h6 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        vp = vp + h6 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        c = c + h6 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
        if not (vq > 0.0 and vp > 0.0 and math.isfinite(c) and math.isfinite(vq) and math.isfinite(vp)):
            bad = n
            break
        if n % stride == 0:
            i = n // stride
            out[i, 0] = vq
            out[i, 1] = vp
            out[i, 2] = c
    return out, bad


def _n_steps(t_end, dt):
    if not (dt > 0 and t_end > 0):
        raise InvalidInput(f"need dt > 0 and t_end > 0, got dt={dt}, t_end={t_end}")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise InvalidInput(f"t_end={t_end} is not a multiple of dt={dt}")
    return n


@dataclass(frozen=True)
class MomentSeries:
    """Sampled solution of the dimensionless moment flow."""

    tau: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    kappa: float

    def __len__(self):
        return len(self.tau)

    def __getitem__(self, i):
        return MomentState(float(self.x[i]), float(self.y[i]), float(self.z[i]), float(self.tau[i]))

    @property
    def final(self):
        return self[-1]

    @property
    def defect(self):
        return self.x * self.y - 0.25 - 0.25 * self.z**2


def integrate_moments(s0, kappa, tau_end, dtau=DEFAULT_DTAU, record_stride=1):
    """Fixed-step RK4 solution of the dimensionless moment flow."""
    if not kappa >= 0:
        raise InvalidInput(f"kappa must be >= 0, got {kappa}")
    n = _n_steps(tau_end, dtau)
    if record_stride < 1 or n % record_stride:
        raise InvalidInput("record_stride must divide the number of steps")
    out, bad = _rk4_kernel(s0.x, s0.y, s0.z, 2.0 * kappa, 1.0, 1.0, 1.0, dtau, n, record_stride)
    if bad >= 0:
        raise IntegrationUnstable(f"moments left the physical region at step {bad}; reduce dtau")
    tau = s0.tau + dtau * record_stride * np.arange(out.shape[0])
    series = MomentSeries(tau, out[:, 0].copy(), out[:, 1].copy(), out[:, 2].copy(), kappa)
    if series.defect[-1] < -HEISENBERG_TOL:
        raise HeisenbergViolation(f"final defect {series.defect[-1]:.3e} below tolerance")
    return series


def moment_path(s0, kappa, n_steps, dtau):
    """(n_steps + 1, 3) array of moments at every step; used by the trajectory engine."""
    out, bad = _rk4_kernel(s0.x, s0.y, s0.z, 2.0 * kappa, 1.0, 1.0, 1.0, dtau, n_steps, 1)
    if bad >= 0:
        raise IntegrationUnstable(f"moments left the physical region at step {bad}; reduce dtau")
    return out


@dataclass(frozen=True)
class SISeries:
    t: np.ndarray
    var_q: np.ndarray
    var_p: np.ndarray
    cov: np.ndarray

    @property
    def final(self):
        return SIMoments(float(self.var_q[-1]), float(self.var_p[-1]), float(self.cov[-1]), float(self.t[-1]))


def integrate_si_moments(s0, cfg, t_end, dt, record_stride=1):
    """RK4 solution of the moment flow in physical units (any omega >= 0)."""
    n = _n_steps(t_end, dt)
    if record_stride < 1 or n % record_stride:
        raise InvalidInput("record_stride must divide the number of steps")
    out, bad = _rk4_kernel(s0.var_q, s0.var_p, s0.cov, cfg.gamma, cfg.hbar, cfg.mass, cfg.omega**2,
                           dt, n, record_stride)
    if bad >= 0:
        raise IntegrationUnstable(f"moments left the physical region at step {bad}; reduce dt")
    t = s0.t + dt * record_stride * np.arange(out.shape[0])
    return SISeries(t, out[:, 0].copy(), out[:, 1].copy(), out[:, 2].copy())


def to_dimensionless(s, cfg):
    x, y, z = moments_to_dimensionless(s.var_q, s.var_p, s.cov, cfg)
    return MomentState(x, y, z, s.t * cfg.omega)


def from_dimensionless(s, cfg):
    vq, vp, c = moments_from_dimensionless(s.x, s.y, s.z, cfg)
    return SIMoments(vq, vp, c, s.tau / cfg.omega)
