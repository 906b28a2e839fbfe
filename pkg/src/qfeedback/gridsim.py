"""Stochastic Schrodinger equation for position measurement with linear feedback.

The wavefunction lives on a uniform periodic grid. One step of length dt is
a Strang splitting

    half kinetic  ->  exp(-i V dt / hbar - gamma/4 (q - <q>)^2 dt
                          + sqrt(gamma)/2 (q - <q>) dW)
                  ->  half kinetic  ->  exp(-i (chi q + delta p) dM / hbar)

with dM = <q> dt + dW / sqrt(gamma) built from the same dW, <q> taken at the
start of the step, followed by renormalisation. The momentum-space factors are
applied with FFTs.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from .control import optimal_gains, stationary_energy, stationary_gaussian
from .errors import BoundaryLeak, GridTooSmall, InvalidInput, NormCollapse, NotNormalized
from .moments import stationary_moments
from .quadratures import POSITION_FRAME, OscillatorConfig, relative_strength
from .trajectories import trajectory_stream

NORM_TOL = 1e-8
EDGE_FRACTION = 0.05
DEFAULT_POINTS = 1024
DEFAULT_HALF_WIDTH = 12.0  # in ground-state standard deviations


@dataclass(frozen=True)
class Grid:
    q_min: float
    dq: float
    n_points: int

    def __post_init__(self):
        n = self.n_points
        if n < 8 or n & (n - 1):
            raise InvalidInput(f"n_points must be a power of two >= 8, got {n}")
        if not self.dq > 0:
            raise InvalidInput("dq must be > 0")

    @classmethod
    def symmetric(cls, half_width, n_points=DEFAULT_POINTS):
        return cls(-half_width, 2.0 * half_width / n_points, n_points)

    @classmethod
    def for_oscillator(cls, cfg, n_points=DEFAULT_POINTS, widths=DEFAULT_HALF_WIDTH):
        """Grid spanning +-``widths`` ground-state standard deviations."""
        if cfg.is_free:
            raise InvalidInput("a free particle has no ground-state width; use Grid.symmetric")
        sigma0 = math.sqrt(cfg.hbar / (2 * cfg.mass * cfg.omega))
        return cls.symmetric(widths * sigma0, n_points)

    @property
    def q(self):
        return self.q_min + self.dq * np.arange(self.n_points)

    @property
    def q_max(self):
        return self.q_min + self.dq * (self.n_points - 1)

    @property
    def k(self):
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dq)

    @property
    def edge_points(self):
        return max(1, int(math.ceil(0.5 * EDGE_FRACTION * self.n_points)))


@dataclass(frozen=True, eq=False)
class GridWavefunction:
    grid: Grid
    amplitudes: np.ndarray

    @property
    def q_min(self):
        return self.grid.q_min

    @property
    def dq(self):
        return self.grid.dq

    @property
    def n_points(self):
        return self.grid.n_points

    def norm(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dq)

    def density(self):
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class PotentialSpec:
    """``kind`` is one of harmonic, free, quartic, tabulated.

    harmonic: V = m omega^2 q^2 / 2; quartic: V = a4 q^4 + a2 q^2;
    tabulated: ``values`` sampled on the simulation grid.
    """

    kind: str = "harmonic"
    mass: float = 1.0
    omega: float = 1.0
    a4: float = 0.0
    a2: float = 0.0
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("harmonic", "free", "quartic", "tabulated"):
            raise InvalidInput(f"unknown potential kind {self.kind!r}")

    def evaluate(self, grid):
        q = grid.q
        if self.kind == "harmonic":
            V = 0.5 * self.mass * self.omega**2 * q**2
        elif self.kind == "free":
            V = np.zeros_like(q)
        elif self.kind == "quartic":
            V = self.a4 * q**4 + self.a2 * q**2
        else:
            V = np.asarray(self.values, dtype=float)
            if V.shape != q.shape:
                raise InvalidInput(f"tabulated potential has {V.size} values for {q.size} grid points")
        if not np.all(np.isfinite(V)):
            raise InvalidInput("potential is not finite on the grid")
        return V


@dataclass(frozen=True)
class InitialGaussian:
    qbar: float = 0.0
    pbar: float = 0.0
    width: float = math.sqrt(0.5)
    cov: float = 0.0


@dataclass(frozen=True)
class GridSimConfig:
    cfg: OscillatorConfig = field(default_factory=OscillatorConfig)
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    chi: float = 0.0
    delta: float = 0.0
    dt: float = 1e-3
    seed: int = 0
    record_stride: int = 100
    snapshot_stride: int = 0
    n_points: int = DEFAULT_POINTS
    half_width: float = 0.0  # 0: DEFAULT_HALF_WIDTH ground-state widths
    initial: InitialGaussian = field(default_factory=InitialGaussian)
    leak_threshold: float = 1e-6
    frame: object = POSITION_FRAME

    def __post_init__(self):
        f = self.frame
        if (f.alpha, f.beta) != (1.0, 0.0):
            raise InvalidInput("grid simulation measures position only (alpha = 1, beta = 0)")
        if not self.dt > 0:
            raise InvalidInput("dt must be > 0")
        if self.record_stride < 1 or self.snapshot_stride < 0:
            raise InvalidInput("record_stride must be >= 1 and snapshot_stride >= 0")
        if self.cfg.gamma == 0 and (self.chi != 0 or self.delta != 0):
            raise InvalidInput("feedback needs a measurement signal (gamma > 0)")

    def make_grid(self):
        if self.half_width > 0:
            return Grid.symmetric(self.half_width, self.n_points)
        return Grid.for_oscillator(self.cfg, self.n_points)


# -- states --------------------------------------------------------------------

def _normalized(grid, psi):
    n = np.sum(np.abs(psi) ** 2) * grid.dq
    return GridWavefunction(grid, psi / math.sqrt(n))


def init_gaussian(grid, qbar, pbar, width, cov=0.0, hbar=1.0):
    """Gaussian with centre ``qbar``, momentum ``pbar``, position std ``width``
    and symmetrised covariance ``cov``."""
    if not width > 0:
        raise InvalidInput("width must be > 0")
    if qbar - 4 * width < grid.q_min or qbar + 4 * width > grid.q_max:
        raise GridTooSmall(f"Gaussian at {qbar} with width {width} does not fit in "
                           f"[{grid.q_min}, {grid.q_max}]")
    d = grid.q - qbar
    a = complex(1.0, -cov / hbar) / (4 * width**2)
    return _normalized(grid, np.exp(-a * d * d + 1j * pbar * grid.q / hbar))


def gaussian_from_width_parameter(grid, s, qbar=0.0, pbar=0.0, hbar=1.0):
    """State proportional to exp(-s (q - qbar)^2 / 2 + i pbar q / hbar), complex ``s``."""
    if not s.real > 0:
        raise InvalidInput("Re(s) must be > 0")
    d = grid.q - qbar
    return _normalized(grid, np.exp(-0.5 * s * d * d + 1j * pbar * grid.q / hbar))


def _apply_p(grid, psi, hbar=1.0):
    return hbar * np.fft.ifft(grid.k * np.fft.fft(psi))


@dataclass(frozen=True)
class Expectations:
    norm: float
    q: float
    p: float
    varq: float
    varp: float
    cov_sym: float
    skew_q: float
    energy: float
    density: np.ndarray


def _moments(grid, psi, V, mass, hbar):
    """Unchecked moment evaluation on raw amplitudes."""
    dq = grid.dq
    q = grid.q
    rho = (psi.real**2 + psi.imag**2) * dq
    norm = rho.sum()
    mq = (q * rho).sum() / norm
    d = q - mq
    varq = (d * d * rho).sum() / norm
    skew = (d**3 * rho).sum() / norm
    phi = np.fft.fft(psi)
    w = phi.real**2 + phi.imag**2
    w_sum = w.sum()
    k = grid.k
    mp = hbar * (k * w).sum() / w_sum
    p2 = hbar**2 * (k * k * w).sum() / w_sum
    varp = p2 - mp * mp
    ppsi = hbar * np.fft.ifft(k * phi)
    qp = (np.conj(psi) * q * ppsi).sum() * dq / norm
    cov = 2.0 * qp.real - 2.0 * mq * mp
    E = p2 / (2 * mass)
    if V is not None:
        E += (V * rho).sum() / norm
    return norm, mq, mp, varq, varp, cov, skew, E


def expectations(psi, potential=None, mass=1.0, hbar=1.0):
    """Position moments by quadrature, momentum moments spectrally.

    ``potential`` is either a :class:`PotentialSpec` or an array on the grid;
    without it the energy is kinetic only.
    """
    grid = psi.grid
    n = psi.norm()
    if abs(n - 1.0) > NORM_TOL:
        raise NotNormalized(f"norm {n} differs from 1")
    V = potential.evaluate(grid) if isinstance(potential, PotentialSpec) else potential
    norm, mq, mp, varq, varp, cov, skew, E = _moments(grid, psi.amplitudes, V, mass, hbar)
    return Expectations(norm, mq, mp, varq, varp, cov, skew, E, psi.density())


def comoving_transform(psi, hbar=1.0):
    """Displace the state so that <q> = <p> = 0."""
    grid = psi.grid
    ex = expectations(psi, hbar=hbar)
    shifted = np.fft.ifft(np.exp(1j * grid.k * ex.q) * np.fft.fft(psi.amplitudes))
    out = shifted * np.exp(-1j * ex.p * grid.q / hbar)
    return _normalized(grid, out)


# -- propagation -----------------------------------------------------------------

class SSEStepper:
    """Precomputed factors for repeated :func:`step_sse` calls on one grid."""

    def __init__(self, config, grid):
        self.config = config
        self.grid = grid
        c = config.cfg
        self.hbar, self.mass, self.gamma = c.hbar, c.mass, c.gamma
        self.V = config.potential.evaluate(grid)
        dt = config.dt
        self.q = grid.q
        self.k = grid.k
        self.kin_half = np.exp(-1j * self.hbar * self.k**2 * dt / (4 * self.mass))
        self.pot = np.exp(-1j * self.V * dt / self.hbar)
        self.feedback = config.chi != 0 or config.delta != 0
        n_edge = grid.edge_points
        self.edges = (slice(0, n_edge), slice(grid.n_points - n_edge, None))

    def step_raw(self, psi, dW):
        cfg = self.config
        dt = cfg.dt
        dq = self.grid.dq
        rho = (psi.real**2 + psi.imag**2)
        q_mean = (self.q * rho).sum() / rho.sum()
        psi = np.fft.ifft(self.kin_half * np.fft.fft(psi))
        if self.gamma > 0:
            d = self.q - q_mean
            psi = psi * self.pot * np.exp(-0.25 * self.gamma * d * d * dt
                                          + 0.5 * math.sqrt(self.gamma) * d * dW)
        else:
            psi = psi * self.pot
        half = self.kin_half
        if self.feedback:
            dM = q_mean * dt + dW / math.sqrt(self.gamma)
            if cfg.delta != 0:
                half = half * np.exp(-1j * cfg.delta * self.k * dM)
            psi = np.fft.ifft(half * np.fft.fft(psi))
            if cfg.chi != 0:
                psi = psi * np.exp(-1j * cfg.chi * dM * self.q / self.hbar)
        else:
            psi = np.fft.ifft(half * np.fft.fft(psi))
        norm = (psi.real**2 + psi.imag**2).sum() * dq
        if not norm >= 0.5:
            raise NormCollapse(f"norm dropped to {norm} in one step; reduce dt")
        psi = psi / math.sqrt(norm)
        return psi

    def check_boundary(self, psi):
        rho = psi.real**2 + psi.imag**2
        edge = (rho[self.edges[0]].sum() + rho[self.edges[1]].sum()) * self.grid.dq
        if edge > self.config.leak_threshold:
            raise BoundaryLeak(f"probability {edge:.2e} in the outer {EDGE_FRACTION:.0%} of the grid")

    def step(self, psi, dW):
        out = self.step_raw(psi.amplitudes, dW)
        self.check_boundary(out)
        return GridWavefunction(self.grid, out)


def step_sse(psi, dW, config):
    """One splitting step; see the module docstring."""
    return SSEStepper(config, psi.grid).step(psi, dW)


def apply_feedback(psi, chi, delta, dM, hbar=1.0):
    """The feedback unitary exp(-i (chi q + delta p) dM / hbar) on its own."""
    grid = psi.grid
    out = np.fft.ifft(np.exp(-1j * delta * grid.k * dM) * np.fft.fft(psi.amplitudes))
    out = out * np.exp(-1j * chi * dM * grid.q / hbar)
    return GridWavefunction(grid, out)


SERIES_COLUMNS = ("tau", "norm", "q", "p", "varq", "varp", "cov", "skewq", "energy")


@dataclass(frozen=True, eq=False)
class GridTrajectory:
    series: dict
    snapshots: list  # [(tau, density)]
    final: GridWavefunction
    grid: Grid


def initial_state(config, grid):
    ini = config.initial
    return init_gaussian(grid, ini.qbar, ini.pbar, ini.width, ini.cov, config.cfg.hbar)


def run_grid_trajectory(config, tau_end, dW=None, psi0=None):
    """Evolve :func:`step_sse` up to ``tau_end`` and record moments.

    Times are in units of 1/omega (raw time for omega = 0). Increments come
    from ``dW`` when given, else from the stream keyed by ``(config.seed, 0)``.
    """
    grid = config.make_grid()
    scale = config.cfg.omega if config.cfg.omega > 0 else 1.0
    dt_tau = config.dt * scale
    n = int(round(tau_end / dt_tau))
    if n < 1:
        raise InvalidInput("tau_end must exceed one time step")
    if dW is None:
        dW = trajectory_stream(config.seed, 0).standard_normal(n) * math.sqrt(config.dt)
    elif len(dW) < n:
        raise InvalidInput("not enough Wiener increments for the requested horizon")
    stepper = SSEStepper(config, grid)
    psi = (psi0 or initial_state(config, grid)).amplitudes
    stepper.check_boundary(psi)
    c = config.cfg
    rows = []
    snaps = []

    def record(i, psi):
        norm, mq, mp, vq, vp, cov, skew, E = _moments(grid, psi, stepper.V, c.mass, c.hbar)
        rows.append((i * dt_tau, norm, mq, mp, vq, vp, cov, skew, E))

    def snapshot(i, psi):
        snaps.append((i * dt_tau, psi.real**2 + psi.imag**2))

    record(0, psi)
    if config.snapshot_stride:
        snapshot(0, psi)
    for i in range(1, n + 1):
        psi = stepper.step_raw(psi, dW[i - 1])
        stepper.check_boundary(psi)
        if i % config.record_stride == 0:
            record(i, psi)
        if config.snapshot_stride and i % config.snapshot_stride == 0:
            snapshot(i, psi)
    arr = np.array(rows)
    series = {name: arr[:, j] for j, name in enumerate(SERIES_COLUMNS)}
    return GridTrajectory(series, snaps, GridWavefunction(grid, psi), grid)


def run_grid_ensemble(config, tau_end, n_traj, workers=1):
    """Independent grid trajectories; trajectory i uses stream (seed, i)."""
    scale = config.cfg.omega if config.cfg.omega > 0 else 1.0
    n = int(round(tau_end / (config.dt * scale)))

    def one(i):
        dW = trajectory_stream(config.seed, i).standard_normal(n) * math.sqrt(config.dt)
        return run_grid_trajectory(config, tau_end, dW=dW)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(n_traj)))
    return [one(i) for i in range(n_traj)]


# -- stationary-state check ---------------------------------------------------------

def verify_stationary_eigenpair(kappa, grid=None, energy_shift=0.0):
    """Residual of the two stationary eigen-equations for the Gaussian at ``kappa``.

    Oscillator units (hbar = m = omega = 1, position frame). Returns
    max(r1, r2) with r1 the energy-equation residual and r2 the residual of
    the noise-term equation, both relative to the state norm.
    """
    if grid is None:
        grid = Grid.for_oscillator(OscillatorConfig())
    x, _, z = stationary_moments(kappa)
    psi = gaussian_from_width_parameter(grid, stationary_gaussian(kappa)).amplitudes
    q = grid.q
    E = stationary_energy(kappa) + energy_shift
    kinetic = np.fft.ifft(0.5 * grid.k**2 * np.fft.fft(psi))
    h_psi = kinetic + 0.5 * q * q * psi
    r1_vec = h_psi - 0.5j * kappa * (q * q - x) * psi - E * psi
    r2_vec = (1j + z) * q * psi - 2.0 * x * _apply_p(grid, psi)
    nrm = np.linalg.norm(psi)
    return max(np.linalg.norm(r1_vec) / nrm, np.linalg.norm(r2_vec) / nrm)


# -- presets and probes ----------------------------------------------------------

FIG4_KAPPA = 0.25


def fig4_preset(name, seed=0, dt=1e-3):
    """Configurations for the three fig4 presets (oscillator units).

    a: no measurement, no feedback; b: measurement only; c: measurement with
    the optimal gains. All start from a displaced Gaussian.
    """
    name = name.lower().removeprefix("fig4")
    base = OscillatorConfig.from_kappa(FIG4_KAPPA)
    common = dict(dt=dt, seed=seed, record_stride=100, snapshot_stride=2000, n_points=1024,
                  half_width=12.0)
    if name == "a":
        return GridSimConfig(cfg=OscillatorConfig(gamma=0.0), initial=InitialGaussian(2.0, 0.0, 0.5), **common)
    if name == "b":
        return GridSimConfig(cfg=base, initial=InitialGaussian(2.0, 0.0, math.sqrt(0.5)), **common)
    if name == "c":
        g = optimal_gains(FIG4_KAPPA, base).gains
        x, _, z = stationary_moments(FIG4_KAPPA)
        return GridSimConfig(cfg=base, chi=g.u, delta=g.v,
                             initial=InitialGaussian(2.0, 0.0, math.sqrt(x), z), **common)
    raise InvalidInput(f"unknown fig4 preset {name!r}")


def quadratic_fit_gains(a4, a2, cfg):
    """Optimal lab-frame (chi, delta) for the quadratic part of a4 q^4 + a2 q^2."""
    if not a2 > 0:
        raise InvalidInput("local quadratic fit needs a2 > 0")
    omega_eff = math.sqrt(2 * a2 / cfg.mass)
    local = OscillatorConfig(mass=cfg.mass, omega=omega_eff, gamma=cfg.gamma, hbar=cfg.hbar)
    g = optimal_gains(relative_strength(local), local).gains
    return g.u, g.v


def quartic_cooling_probe(a4=0.05, a2=0.5, gamma=2.0, tau_end=20.0, dt=1e-3, seed=0,
                          n_points=1024, half_width=12.0, qbar0=2.0, late_fraction=0.5):
    """Time-averaged late energy with and without quadratic-fit feedback.

    Both runs share the same Wiener increments. Returns a dict with the two
    averages and the gains used.
    """
    cfg = OscillatorConfig(mass=1.0, omega=math.sqrt(2 * a2), gamma=gamma, hbar=1.0)
    chi, delta = quadratic_fit_gains(a4, a2, cfg)
    pot = PotentialSpec("quartic", a4=a4, a2=a2)
    ini = InitialGaussian(qbar0, 0.0, math.sqrt(0.5))
    n = int(round(tau_end / dt))
    dW = trajectory_stream(seed, 0).standard_normal(n) * math.sqrt(dt)
    out = {"chi": chi, "delta": delta}
    for label, (c, d) in {"feedback": (chi, delta), "free_running": (0.0, 0.0)}.items():
        conf = GridSimConfig(cfg=cfg, potential=pot, chi=c, delta=d, dt=dt, seed=seed,
                             record_stride=10, n_points=n_points, half_width=half_width,
                             initial=ini)
        # time unit: raw time (omega of cfg only sets the grid scale here)
        run = run_grid_trajectory(conf, tau_end * cfg.omega, dW=dW)
        E = run.series["energy"]
        out[label] = float(E[int(len(E) * (1 - late_fraction)):].mean())
    return out
