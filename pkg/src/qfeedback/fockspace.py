"""Non-selective feedback master equations on a truncated number basis.

Two generators are provided:

* :func:`full_me_rhs`, the measurement-plus-feedback master equation

      -i/hbar [H, rho] - gamma/8 [M, [M, rho]] - 1/(2 hbar^2 gamma) [F, [F, rho]]
      - i/(2 hbar) [F, {M, rho}]

  with M the measured quadrature Q and F = u Q + v P;
* :func:`rwa_me_rhs`, its rotating-wave form

      -i/hbar [H, rho] - i u/(4 m omega) [{a, a+}, rho] + (c - v) D[a] rho + c D[a+] rho

  which is a thermal Lindblad equation with gamma' = -v and N = -c/v.
"""
from dataclasses import dataclass
import math

import numpy as np

from .control import bath_parameters
from .errors import InvalidInput, PositivityLoss, TruncationLeak
from .quadratures import POSITION_FRAME, FeedbackGains, OscillatorConfig, relative_strength

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = 1e-6
LEAK_TOL = 1e-6
DEFAULT_NMAX = 30


@dataclass(frozen=True)
class Operators:
    a: np.ndarray
    a_dagger: np.ndarray
    n: np.ndarray
    H: np.ndarray


def build_operators(n_max, cfg=None):
    """Ladder, number and Hamiltonian matrices on levels 0..n_max."""
    if n_max < 2:
        raise InvalidInput("n_max must be >= 2")
    cfg = cfg or OscillatorConfig()
    a = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(complex)
    n = np.diag(np.arange(n_max + 1, dtype=float)).astype(complex)
    H = cfg.hbar * cfg.omega * (n + 0.5 * np.eye(n_max + 1))
    return Operators(a, a.conj().T.copy(), n, H)


@dataclass(frozen=True, eq=False)
class FockDensityMatrix:
    rho: np.ndarray
    t: float = 0.0

    @property
    def n_max(self):
        return self.rho.shape[0] - 1

    def mean_n(self):
        return float(np.real(np.arange(self.n_max + 1) @ np.diag(self.rho)))

    def trace(self):
        return float(np.real(np.trace(self.rho)))

    def purity(self):
        return float(np.real(np.vdot(self.rho, self.rho)))

    def leak(self):
        """Population of the two highest levels."""
        return float(np.real(self.rho[-1, -1] + self.rho[-2, -2]))

    def check(self, leak_tol=LEAK_TOL, positivity_tol=POSITIVITY_TOL):
        r = self.rho
        herm = np.max(np.abs(r - r.conj().T))
        if herm > HERMITIAN_TOL:
            raise PositivityLoss(f"density matrix lost hermiticity ({herm:.2e})")
        if abs(self.trace() - 1.0) > TRACE_TOL:
            raise PositivityLoss(f"trace drifted to {self.trace()}")
        lam = np.linalg.eigvalsh(0.5 * (r + r.conj().T))[0]
        if lam < -positivity_tol:
            raise PositivityLoss(f"minimum eigenvalue {lam:.2e}")
        if self.leak() > leak_tol:
            raise TruncationLeak(f"top-level population {self.leak():.2e} at n_max = {self.n_max}")


def fock_state(k, n_max):
    rho = np.zeros((n_max + 1, n_max + 1), complex)
    rho[k, k] = 1.0
    return rho


def thermal_state(N, n_max):
    """Bose-Einstein populations with mean N, truncated and renormalised."""
    if N < 0:
        raise InvalidInput("N must be >= 0")
    if N == 0:
        return fock_state(0, n_max)
    k = np.arange(n_max + 1)
    p = (N / (N + 1.0)) ** k
    return np.diag(p / p.sum()).astype(complex)


def _quadratures(ops, cfg):
    sq = math.sqrt(cfg.hbar / (2 * cfg.mass * cfg.omega))
    sp = math.sqrt(cfg.hbar * cfg.mass * cfg.omega / 2)
    q = sq * (ops.a + ops.a_dagger)
    p = 1j * sp * (ops.a_dagger - ops.a)
    return q, p


def _comm(A, B):
    return A @ B - B @ A


class FullGenerator:
    """Precomputed :func:`full_me_rhs` for fixed parameters."""

    def __init__(self, n_max, cfg, frame=POSITION_FRAME, gains=None):
        if cfg.is_free:
            raise InvalidInput("the number basis needs omega > 0")
        ops = build_operators(n_max, cfg)
        q, p = _quadratures(ops, cfg)
        Q = frame.alpha * q + frame.beta * p
        P = -frame.beta_prime * q + frame.alpha_prime * p
        u, v = (gains.u, gains.v) if gains is not None else (0.0, 0.0)
        self.M = Q
        self.F = u * Q + v * P
        self.feedback = u != 0 or v != 0
        if self.feedback and not cfg.gamma > 0:
            raise InvalidInput("feedback needs gamma > 0")
        self.cfg = cfg
        e = np.real(np.diag(ops.H))
        self.dE = (e[:, None] - e[None, :]) / cfg.hbar

    def __call__(self, rho):
        c = self.cfg
        out = -1j * self.dE * rho
        if c.gamma > 0:
            out -= (c.gamma / 8) * _comm(self.M, _comm(self.M, rho))
        if self.feedback:
            F = self.F
            out -= _comm(F, _comm(F, rho)) / (2 * c.hbar**2 * c.gamma)
            MR = self.M @ rho
            out -= (0.5j / c.hbar) * _comm(F, MR + MR.conj().T)
        return out


class RWAGenerator:
    """Precomputed :func:`rwa_me_rhs` for fixed parameters."""

    def __init__(self, n_max, cfg, gains):
        ops = build_operators(n_max, cfg)
        kappa = relative_strength(cfg)
        bath = bath_parameters(gains, kappa, cfg)
        self.bath = bath
        self.down = bath.c + bath.gamma_prime  # c - v
        self.up = bath.c
        self.a = ops.a
        self.ad = ops.a_dagger
        self.ada = np.real(np.diag(ops.a_dagger @ ops.a))
        self.aad = np.real(np.diag(ops.a @ ops.a_dagger))
        e = np.real(np.diag(ops.H)) / cfg.hbar
        anti = (self.ada + self.aad) * gains.u / (4 * cfg.mass * cfg.omega)
        w = e + anti
        self.dE = w[:, None] - w[None, :]

    def __call__(self, rho):
        a, ad = self.a, self.ad
        out = -1j * self.dE * rho
        # D[a]: a rho a+ - {a+a, rho}/2 ; D[a+]: a+ rho a - {a a+, rho}/2
        out += self.down * (a @ rho @ ad - 0.5 * (self.ada[:, None] + self.ada[None, :]) * rho)
        out += self.up * (ad @ rho @ a - 0.5 * (self.aad[:, None] + self.aad[None, :]) * rho)
        return out


def full_me_rhs(rho, cfg, frame=POSITION_FRAME, gains=None):
    """Time derivative of ``rho`` under the full feedback master equation."""
    return FullGenerator(rho.shape[0] - 1, cfg, frame, gains)(rho)


def rwa_me_rhs(rho, cfg, gains):
    """Time derivative of ``rho`` under the rotating-wave master equation."""
    return RWAGenerator(rho.shape[0] - 1, cfg, gains)(rho)


@dataclass(frozen=True, eq=False)
class FockSeries:
    t: np.ndarray
    n_mean: np.ndarray
    trace: np.ndarray
    purity: np.ndarray
    leak: np.ndarray
    final: FockDensityMatrix


def integrate(rho0, rhs, t_end, dt, record_stride=1, leak_tol=LEAK_TOL,
              positivity_tol=POSITIVITY_TOL):
    """Classical RK4; invariants are checked at every recorded step."""
    if not (dt > 0 and t_end > 0):
        raise InvalidInput("need dt > 0 and t_end > 0")
    n = int(round(t_end / dt))
    rho = np.array(rho0, dtype=complex)
    state = FockDensityMatrix(rho, 0.0)
    state.check(leak_tol, positivity_tol)
    rows = [(0.0, state.mean_n(), state.trace(), state.purity(), state.leak())]
    h2, h6 = 0.5 * dt, dt / 6.0
    for i in range(1, n + 1):
        k1 = rhs(rho)
        k2 = rhs(rho + h2 * k1)
        k3 = rhs(rho + h2 * k2)
        k4 = rhs(rho + dt * k3)
        rho = rho + h6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if i % record_stride == 0 or i == n:
            state = FockDensityMatrix(rho, i * dt)
            state.check(leak_tol, positivity_tol)
            rows.append((i * dt, state.mean_n(), state.trace(), state.purity(), state.leak()))
    arr = np.array(rows)
    return FockSeries(*(arr[:, j] for j in range(5)), FockDensityMatrix(rho, n * dt))


def run_master_equation(rho0_fn, cfg, gains, t_end, dt, form="rwa", frame=POSITION_FRAME,
                        n_max=DEFAULT_NMAX, record_stride=10, max_n=480):
    """Integrate with automatic doubling of ``n_max`` whenever the truncation leaks.

    ``rho0_fn(n_max)`` builds the initial matrix for a given truncation.
    Returns ``(series, n_max_used)``.
    """
    if form not in ("rwa", "full"):
        raise InvalidInput(f"unknown master-equation form {form!r}")
    while True:
        rhs = RWAGenerator(n_max, cfg, gains) if form == "rwa" else FullGenerator(n_max, cfg, frame, gains)
        try:
            return integrate(rho0_fn(n_max), rhs, t_end, dt, record_stride), n_max
        except TruncationLeak:
            if 2 * n_max > max_n:
                raise
            n_max *= 2


def thermal_check_preset():
    """kappa = 0.01, u = 0, v = -2 kappa omega, starting from |1><1|."""
    kappa = 0.01
    cfg = OscillatorConfig.from_kappa(kappa)
    gains = FeedbackGains(0.0, -2 * kappa * cfg.omega)
    return cfg, gains
