"""Selective dynamics of a monitored oscillator under Gaussian closure.

The state is the pair of dimensionless means (Qbar, Pbar) together with the
second moments. Under Gaussian closure the moments follow their own
deterministic flow, so only the means are stochastic::

    dQbar = (Pbar + v Qbar) dtau + sqrt(2 kappa) (x + v / (2 kappa)) dW
    dPbar = -(1 + u) Qbar dtau + sqrt(kappa / 2) (z - u / kappa) dW

with (u, v) the gains in oscillator units (u / (m omega^2), v / omega).

Two schemes are provided. ``euler_maruyama`` is the usual one. ``weak2`` is
the derivative-free explicit order-2 weak scheme for scalar noise::

    Ybar    = Y + a(Y) h + b_n dW
    Y_{n+1} = Y + (a(Ybar) + a(Y)) h / 2 + (b_n + b_{n+1}) dW / 2

Its general form also carries (b(Y+) - b(Y-)) (dW^2 - h) / (4 sqrt(h)) with
Y+- = Y + a h +- b sqrt(h); that term vanishes here because the noise
coefficients depend only on the moments, whose value at the supporting
points is taken from the RK4 moment step.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from . import _accel
from ._accel import njit
from .errors import BudgetExceeded, IntegrationUnstable, InvalidInput
from .moments import DEFAULT_DTAU, MomentState, _rk4_kernel, moment_path
from .quadratures import FeedbackGains, ZERO_GAINS

SCHEMES = ("euler_maruyama", "weak2")
DEFAULT_BUDGET = 2_000_000_000


@dataclass(frozen=True)
class GaussianTrajectoryState:
    Qbar: float
    Pbar: float
    moments: MomentState
    tau: float = 0.0


def _check_gains(kappa, gains):
    if kappa < 0:
        raise InvalidInput(f"kappa must be >= 0, got {kappa}")
    if kappa == 0 and (gains.u != 0 or gains.v != 0):
        raise InvalidInput("feedback needs a measurement signal (kappa > 0)")


def _noise_coefficients(x, z, kappa, u, v):
    if kappa == 0:
        return 0.0 * x, 0.0 * z
    return math.sqrt(2 * kappa) * (x + v / (2 * kappa)), math.sqrt(kappa / 2) * (z - u / kappa)


def drift_and_noise(s, kappa, gains):
    """Drift and Wiener coefficients of (Qbar, Pbar); gains in oscillator units."""
    _check_gains(kappa, gains)
    u, v = gains.u, gains.v
    drift_q = s.Pbar + v * s.Qbar
    drift_p = -(1.0 + u) * s.Qbar
    noise_q, noise_p = _noise_coefficients(s.moments.x, s.moments.z, kappa, u, v)
    return drift_q, drift_p, noise_q, noise_p


def _advance_moments(m, kappa, dtau):
    out, bad = _rk4_kernel(m.x, m.y, m.z, 2.0 * kappa, 1.0, 1.0, 1.0, dtau, 1, 1)
    if bad >= 0:
        raise IntegrationUnstable("moment step left the physical region")
    return MomentState(float(out[1, 0]), float(out[1, 1]), float(out[1, 2]), m.tau + dtau)


def step(s, dW, dtau, kappa, gains, scheme="weak2"):
    """Advance one step of size ``dtau`` driven by the Wiener increment ``dW``."""
    if scheme not in SCHEMES:
        raise InvalidInput(f"unknown scheme {scheme!r}")
    u, v = gains.u, gains.v
    dq, dp, bq, bp = drift_and_noise(s, kappa, gains)
    m1 = _advance_moments(s.moments, kappa, dtau)
    if scheme == "euler_maruyama":
        q1 = s.Qbar + dq * dtau + bq * dW
        p1 = s.Pbar + dp * dtau + bp * dW
    else:
        bq1, bp1 = _noise_coefficients(m1.x, m1.z, kappa, u, v)
        qs = s.Qbar + dq * dtau + bq * dW
        ps = s.Pbar + dp * dtau + bp * dW
        q1 = s.Qbar + 0.5 * ((ps + v * qs) + dq) * dtau + 0.5 * (bq + bq1) * dW
        p1 = s.Pbar + 0.5 * (-(1.0 + u) * qs + dp) * dtau + 0.5 * (bp + bp1) * dW
    if not (math.isfinite(q1) and math.isfinite(p1)):
        raise IntegrationUnstable("non-finite mean values")
    return GaussianTrajectoryState(q1, p1, m1, s.tau + dtau)


def energy(s):
    """Mean energy in units of hbar omega."""
    m = s.moments
    return 0.5 * (s.Pbar**2 + m.y) + 0.5 * (s.Qbar**2 + m.x)


def energy_drift_and_noise(s, kappa, gains, third_moments=(0.0, 0.0)):
    """Coefficients (per dtau, per dW) of the mean-energy increment.

    ``third_moments`` holds the dimensionless <dQ^3> and <{dP^2, dQ}>, which
    vanish under Gaussian closure.
    """
    _check_gains(kappa, gains)
    u, v = gains.u, gains.v
    m = s.moments
    Q, P = s.Qbar, s.Pbar
    if kappa == 0:
        return 0.0, 0.0
    a_q = m.x + v / (2 * kappa)
    a_p = m.z - u / kappa
    drift = (0.25 * kappa * (1 - (u / kappa) ** 2 - (v / kappa) ** 2)
             + v * (a_q + Q * Q)
             - 0.5 * u * (a_p + 2 * Q * P))
    q3, pq3 = third_moments
    noise = math.sqrt(kappa / 2) * (2 * Q * a_q + P * a_p + q3 + 0.5 * pq3)
    return drift, noise


def energy_increment(s, kappa, gains, dW, dtau, third_moments=(0.0, 0.0)):
    drift, noise = energy_drift_and_noise(s, kappa, gains, third_moments)
    return drift * dtau + noise * dW


@dataclass(frozen=True)
class MeanSeries:
    tau: np.ndarray
    Qbar: np.ndarray
    Pbar: np.ndarray


def mean_dynamics(s0, kappa, gains, tau_end, dtau=DEFAULT_DTAU):
    """Drift-only (non-selective) evolution of the means, classical RK4."""
    _check_gains(kappa, gains)
    n = int(round(tau_end / dtau))
    if n < 1:
        raise InvalidInput("tau_end must exceed dtau")
    A = np.array([[gains.v, 1.0], [-(1.0 + gains.u), 0.0]])
    # exact RK4 propagator of the linear system
    hA = dtau * A
    I = np.eye(2)
    M = I + hA @ (I + hA / 2 @ (I + hA / 3 @ (I + hA / 4)))
    out = np.empty((n + 1, 2))
    out[0] = s0.Qbar, s0.Pbar
    for k in range(n):
        out[k + 1] = M @ out[k]
    tau = s0.tau + dtau * np.arange(n + 1)
    return MeanSeries(tau, out[:, 0], out[:, 1])


# -- ensembles -----------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleSpec:
    n_traj: int = 100
    master_seed: int = 20240611
    dtau: float = DEFAULT_DTAU
    tau_end: float = 60.0
    scheme: str = "weak2"
    gains: FeedbackGains = ZERO_GAINS
    kappa: float = 0.25
    record_stride: int = 100
    initial: GaussianTrajectoryState = field(
        default_factory=lambda: GaussianTrajectoryState(0.0, 1.0, MomentState(0.5, 0.5, 0.0)))
    budget: int = DEFAULT_BUDGET

    def n_steps(self):
        n = int(round(self.tau_end / self.dtau))
        if n < 1 or abs(n * self.dtau - self.tau_end) > 1e-9 * max(1.0, self.tau_end):
            raise InvalidInput("tau_end must be a positive multiple of dtau")
        return n

    def validate(self):
        if self.n_traj < 1:
            raise InvalidInput("n_traj must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise InvalidInput("master_seed must be an unsigned 64-bit integer")
        if self.scheme not in SCHEMES:
            raise InvalidInput(f"unknown scheme {self.scheme!r}")
        if self.record_stride < 1:
            raise InvalidInput("record_stride must be >= 1")
        n = self.n_steps()
        if n % self.record_stride:
            raise InvalidInput("record_stride must divide the number of steps")
        if self.n_traj * n > self.budget:
            raise BudgetExceeded(f"{self.n_traj} x {n} steps exceeds the budget of {self.budget}")
        _check_gains(self.kappa, self.gains)


@dataclass(frozen=True)
class EnsembleResult:
    tau: np.ndarray
    mean_Q: np.ndarray
    std_Q: np.ndarray
    mean_P: np.ndarray
    std_P: np.ndarray
    mean_E: np.ndarray
    std_E: np.ndarray
    moments: np.ndarray  # (n_rec, 3), shared by all trajectories
    terminal: np.ndarray  # (n_traj, 2) final (Qbar, Pbar)
    kappa: float
    gains: FeedbackGains
    master_seed: int
    paths: np.ndarray | None = None  # (n_traj, n_rec, 2) when requested


def trajectory_stream(master_seed, index):
    """Counter-based generator for trajectory ``index``: Philox keyed by (seed, index)."""
    key = np.array([master_seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def wiener_increments(master_seed, index, n_steps, dtau):
    return trajectory_stream(master_seed, index).standard_normal(n_steps) * math.sqrt(dtau)


@njit
def _propagate_kernel(q, p, dW, bq, bp, u, v, dtau, weak2, stride):
    n_steps = dW.shape[0]
    out = np.empty((n_steps // stride + 1, 2))
    out[0, 0] = q
    out[0, 1] = p
    g = 1.0 + u
    for n in range(n_steps):
        dq = p + v * q
        dp = -g * q
        if weak2:
            qs = q + dq * dtau + bq[n] * dW[n]
            ps = p + dp * dtau + bp[n] * dW[n]
            q1 = q + 0.5 * ((ps + v * qs) + dq) * dtau + 0.5 * (bq[n] + bq[n + 1]) * dW[n]
            p1 = p + 0.5 * (-g * qs + dp) * dtau + 0.5 * (bp[n] + bp[n + 1]) * dW[n]
        else:
            q1 = q + dq * dtau + bq[n] * dW[n]
            p1 = p + dp * dtau + bp[n] * dW[n]
        q = q1
        p = p1
        if (n + 1) % stride == 0:
            i = (n + 1) // stride
            out[i, 0] = q
            out[i, 1] = p
    return out


def _propagate_numpy(q, p, dW, bq, bp, u, v, dtau, weak2, stride):
    """Vectorised over trajectories: q, p of shape (k,), dW of shape (k, n_steps)."""
    q = np.array(q, dtype=float)
    p = np.array(p, dtype=float)
    n_steps = dW.shape[1]
    out = np.empty((q.shape[0], n_steps // stride + 1, 2))
    out[:, 0, 0] = q
    out[:, 0, 1] = p
    g = 1.0 + u
    for n in range(n_steps):
        w = dW[:, n]
        dq = p + v * q
        dp = -g * q
        if weak2:
            qs = q + dq * dtau + bq[n] * w
            ps = p + dp * dtau + bp[n] * w
            q1 = q + 0.5 * ((ps + v * qs) + dq) * dtau + 0.5 * (bq[n] + bq[n + 1]) * w
            p1 = p + 0.5 * (-g * qs + dp) * dtau + 0.5 * (bp[n] + bp[n + 1]) * w
        else:
            q1 = q + dq * dtau + bq[n] * w
            p1 = p + dp * dtau + bp[n] * w
        q, p = q1, p1
        if (n + 1) % stride == 0:
            out[:, (n + 1) // stride] = np.stack([q, p], axis=1)
    return out


_NUMPY_BLOCK = 64


def run_ensemble(spec, workers=1, keep_paths=False, use_numba=None):
    """Run ``spec.n_traj`` independent trajectories and aggregate them.

    Trajectory ``i`` draws its increments from :func:`trajectory_stream`
    ``(spec.master_seed, i)``, so the result does not depend on ``workers``.
    """
    spec.validate()
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    n_steps = spec.n_steps()
    stride = spec.record_stride
    kappa = spec.kappa
    u, v = spec.gains.u, spec.gains.v
    mpath = moment_path(spec.initial.moments, kappa, n_steps, spec.dtau)
    bq, bp = _noise_coefficients(mpath[:, 0], mpath[:, 2], kappa, u, v)
    bq = np.ascontiguousarray(bq)
    bp = np.ascontiguousarray(bp)
    weak2 = spec.scheme == "weak2"
    q0, p0 = spec.initial.Qbar, spec.initial.Pbar
    n_rec = n_steps // stride + 1
    paths = np.empty((spec.n_traj, n_rec, 2))

    if use_numba:
        def task(i):
            dW = wiener_increments(spec.master_seed, i, n_steps, spec.dtau)
            paths[i] = _propagate_kernel(q0, p0, dW, bq, bp, u, v, spec.dtau, weak2, stride)
        tasks = range(spec.n_traj)
    else:
        def task(block):
            dW = np.stack([wiener_increments(spec.master_seed, i, n_steps, spec.dtau) for i in block])
            k = len(block)
            paths[block[0]:block[-1] + 1] = _propagate_numpy(
                np.full(k, q0), np.full(k, p0), dW, bq, bp, u, v, spec.dtau, weak2, stride)
        idx = list(range(spec.n_traj))
        tasks = [idx[j:j + _NUMPY_BLOCK] for j in range(0, len(idx), _NUMPY_BLOCK)]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(task, tasks))
    else:
        for t in tasks:
            task(t)

    if not np.all(np.isfinite(paths)):
        raise IntegrationUnstable("non-finite mean values in the ensemble")
    rec_m = mpath[::stride]
    Q = paths[:, :, 0]
    P = paths[:, :, 1]
    E = 0.5 * (Q**2 + P**2 + rec_m[:, 0] + rec_m[:, 1])
    tau = spec.initial.tau + spec.dtau * stride * np.arange(n_rec)
    return EnsembleResult(
        tau=tau,
        mean_Q=Q.mean(axis=0), std_Q=Q.std(axis=0),
        mean_P=P.mean(axis=0), std_P=P.std(axis=0),
        mean_E=E.mean(axis=0), std_E=E.std(axis=0),
        moments=rec_m.copy(),
        terminal=paths[:, -1, :].copy(),
        kappa=kappa, gains=spec.gains, master_seed=spec.master_seed,
        paths=paths if keep_paths else None,
    )
