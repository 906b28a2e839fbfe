import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfeedback.control import bath_parameters, mean_excitation
from qfeedback.errors import InvalidInput, PositivityLoss, TruncationLeak
from qfeedback.fockspace import (
    FockDensityMatrix,
    FullGenerator,
    RWAGenerator,
    build_operators,
    fock_state,
    full_me_rhs,
    integrate,
    run_master_equation,
    rwa_me_rhs,
    thermal_check_preset,
    thermal_state,
)
from qfeedback.quadratures import FeedbackGains, OscillatorConfig, normalize_frame


def random_density(n_max, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n_max + 1, n_max + 1)) + 1j * rng.normal(size=(n_max + 1, n_max + 1))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


def test_operators():
    ops = build_operators(6)
    comm = ops.a @ ops.a_dagger - ops.a_dagger @ ops.a
    expected = np.eye(7)
    expected[-1, -1] = -6
    assert np.allclose(comm, expected)
    ket1 = np.zeros(7)
    ket1[1] = 1
    assert np.allclose(ops.a @ ket1, np.eye(7)[0])
    assert np.allclose(np.diag(ops.H), np.arange(7) + 0.5)
    with pytest.raises(InvalidInput):
        build_operators(1)


def test_full_generator_unitary_limit():
    cfg = OscillatorConfig(gamma=0.0)
    rho = random_density(10, 0)
    d = full_me_rhs(rho, cfg)
    ops = build_operators(10)
    assert abs(np.trace(ops.H @ d)) < 1e-12


def test_full_generator_heating_rate():
    kappa = 0.01
    cfg = OscillatorConfig.from_kappa(kappa)
    ops = build_operators(30)
    rho = thermal_state(0.3, 30)
    dn = np.real(np.trace(ops.n @ full_me_rhs(rho, cfg)))
    assert dn == pytest.approx(kappa / 4, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 2.0), st.floats(-1, 1), st.floats(-1, 1), st.floats(-2, 2))
def test_full_generator_is_traceless(seed, kappa, u, v, beta):
    cfg = OscillatorConfig.from_kappa(kappa)
    frame = normalize_frame(1.0, beta, cfg)
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    d = full_me_rhs(A + A.conj().T, cfg, frame, FeedbackGains(u, v))
    assert abs(np.trace(d)) < 1e-12 * max(1.0, np.abs(d).max())
    assert np.allclose(d, d.conj().T, atol=1e-12 * max(1.0, np.abs(d).max()))


def test_full_feedback_translates_mean():
    # F = v p with position measurement: d<q>/dt gains v <q>
    cfg = OscillatorConfig.from_kappa(0.2)
    ops = build_operators(25)
    q = (ops.a + ops.a_dagger) / np.sqrt(2)
    p = 1j * (ops.a_dagger - ops.a) / np.sqrt(2)
    rho = random_density(6, 2)
    rho = np.pad(rho, (0, 19))
    v = -0.3
    d_fb = full_me_rhs(rho, cfg, gains=FeedbackGains(0.0, v))
    d_0 = full_me_rhs(rho, cfg)
    extra = np.real(np.trace(q @ (d_fb - d_0)))
    assert extra == pytest.approx(v * np.real(np.trace(q @ rho)), abs=1e-12)
    assert np.isfinite(np.trace(p @ d_fb))


def test_rwa_thermal_fixed_point():
    cfg, g = thermal_check_preset()
    assert np.abs(rwa_me_rhs(thermal_state(0.125, 30), cfg, g)).max() < 1e-10
    vac = rwa_me_rhs(fock_state(0, 30), OscillatorConfig.from_kappa(0.01), FeedbackGains(0.0, -0.01))
    assert np.abs(vac).max() < 1e-15


@settings(max_examples=50, deadline=None)
@given(st.floats(0.001, 0.5), st.floats(0.1, 20.0))
def test_thermal_state_is_fixed_for_any_cooling_gain(kappa, ratio):
    cfg = OscillatorConfig.from_kappa(kappa)
    g = FeedbackGains(0.0, -ratio * kappa)
    N = bath_parameters(g, kappa, cfg).N_bath
    n_max = 30 if N < 1 else 200
    if (N / (N + 1)) ** n_max > 1e-6:
        return
    assert np.abs(rwa_me_rhs(thermal_state(N, n_max), cfg, g)).max() < 1e-8


def test_rwa_number_equation():
    cfg, g = thermal_check_preset()
    gen = RWAGenerator(30, cfg, g)
    ops = build_operators(30)
    b = gen.bath
    for seed in range(5):
        rho = random_density(30, seed)
        # the top level's a+ is cut; keep it empty for the identity to hold
        rho[-1, :] = rho[:, -1] = 0
        rho /= np.trace(rho)
        n = np.real(np.trace(ops.n @ rho))
        dn = np.real(np.trace(ops.n @ gen(rho)))
        assert dn == pytest.approx(-b.gamma_prime * n + b.gamma_prime * b.N_bath, abs=1e-10)


def test_lamb_term_leaves_population():
    cfg = OscillatorConfig.from_kappa(0.05)
    ops = build_operators(20)
    rho = random_density(20, 3)
    a = rwa_me_rhs(rho, cfg, FeedbackGains(0.3, -0.1))
    b = rwa_me_rhs(rho, cfg, FeedbackGains(0.0, -0.1))
    c = bath_parameters(FeedbackGains(0.3, -0.1), 0.05, cfg).c - bath_parameters(FeedbackGains(0.0, -0.1), 0.05, cfg).c
    # u only changes c and adds a number-conserving commutator
    assert np.real(np.trace(ops.n @ (a - b))) == pytest.approx(
        c * np.real(np.trace((ops.a @ ops.a_dagger - ops.a_dagger @ ops.a) @ rho)), abs=1e-12)


def test_thermal_relaxation_run():
    cfg, g = thermal_check_preset()
    ser, n_used = run_master_equation(lambda n: fock_state(1, n), cfg, g, 200.0, 0.1)
    assert n_used == 30
    ref = np.array([mean_excitation(t, 1.0, 0.125, 0.02) for t in ser.t])
    assert np.max(np.abs(ser.n_mean - ref) / ref) < 1e-6
    assert np.max(np.abs(ser.trace - 1)) < 1e-8


def test_full_and_rwa_agree_at_small_kappa():
    cfg, g = thermal_check_preset()
    rwa, _ = run_master_equation(lambda n: thermal_state(0.125, n), cfg, g, 50.0, 0.05, form="rwa")
    full, _ = run_master_equation(lambda n: thermal_state(0.125, n), cfg, g, 50.0, 0.05, form="full")
    assert full.n_mean[-1] == pytest.approx(rwa.n_mean[-1], rel=0.05)


def test_invariant_checks():
    rho = fock_state(5, 6)
    with pytest.raises(TruncationLeak):
        FockDensityMatrix(rho).check()
    bad = np.diag([1.2, -0.2, 0, 0, 0]).astype(complex)
    with pytest.raises(PositivityLoss):
        FockDensityMatrix(bad).check()


def test_automatic_doubling():
    # heating with no feedback pushes population up; a tiny truncation must grow
    cfg = OscillatorConfig.from_kappa(0.5)
    ser, n_used = run_master_equation(lambda n: fock_state(0, n), cfg, None, 4.0, 0.01, form="full",
                                      n_max=4, record_stride=10)
    assert n_used > 4


def test_full_generator_validation():
    with pytest.raises(InvalidInput):
        FullGenerator(5, OscillatorConfig(gamma=0.0), gains=FeedbackGains(0.1, 0.0))
    with pytest.raises(InvalidInput):
        integrate(fock_state(0, 5), lambda r: 0 * r, -1.0, 0.1)
