import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfeedback.errors import HeisenbergViolation, IntegrationUnstable, InvalidInput, NotFreeParticle
from qfeedback.moments import (
    FIG1_INITIAL,
    GROUND_STATE,
    MomentState,
    SIMoments,
    convergence_times,
    from_dimensionless,
    integrate_moments,
    integrate_si_moments,
    moment_rhs,
    si_moment_rhs,
    stationary_moments,
    stationary_moments_free,
    stationary_state,
    to_dimensionless,
    uncertainty_defect,
)
from qfeedback.quadratures import OscillatorConfig

KAPPAS = [0.01, 0.05, 0.25, 1.0, 4.0, 16.0]

# frozen closed-form values
STAT_025 = (0.4961967868047122, 0.511467940771979, 0.12310562561766053)
STAT_1 = (0.4550898605622274, 0.6435942529055827, 0.4142135623730951)


def test_stationary_values():
    assert stationary_moments(0.25) == pytest.approx(STAT_025, abs=1e-15)
    assert stationary_moments(1.0) == pytest.approx(STAT_1, abs=1e-15)
    assert stationary_moments(1e-9) == pytest.approx((0.5, 0.5, 0.0), abs=1e-9)
    with pytest.raises(InvalidInput):
        stationary_moments(0.0)


@pytest.mark.parametrize("kappa", KAPPAS)
def test_fixed_point_and_product_identity(kappa):
    s = stationary_state(kappa)
    assert max(abs(d) for d in moment_rhs(s, kappa)) < 1e-10
    assert abs(uncertainty_defect(s)) < 1e-12


def test_monotone_in_kappa():
    vals = np.array([stationary_moments(k) for k in KAPPAS])
    assert np.all(np.diff(vals[:, 1]) > 0)
    assert np.all(np.diff(vals[:, 2]) > 0)


def test_rhs_examples():
    assert moment_rhs(FIG1_INITIAL, 0.25) == pytest.approx((0.25, -0.40625, -0.7071067811865476), abs=1e-12)
    assert moment_rhs(GROUND_STATE, 0.0) == (0.0, 0.0, 0.0)


def test_defect_examples():
    assert uncertainty_defect(FIG1_INITIAL) == pytest.approx(0.0, abs=1e-15)
    assert uncertainty_defect(MomentState(1.0, 1.0, 0.0)) == 0.75


def test_state_validation():
    with pytest.raises(InvalidInput):
        MomentState(-1.0, 1.0, 0.0)
    with pytest.raises(HeisenbergViolation):
        MomentState(0.1, 0.1, 0.0)


def test_fig1_run():
    ser = integrate_moments(FIG1_INITIAL, 0.25, 50.0, 1e-3, record_stride=100)
    assert len(ser) == 501
    f = ser.final
    assert (f.x, f.y, f.z) == pytest.approx((0.49619752172506737, 0.5114673225287306, 0.12310674850896337), abs=1e-12)
    assert max(abs(a - b) for a, b in zip(f.as_tuple(), STAT_025)) < 1e-5


def test_stationary_start_is_flat():
    ser = integrate_moments(stationary_state(1.0), 1.0, 5.0, 1e-3)
    for arr, v in zip((ser.x, ser.y, ser.z), STAT_1):
        assert np.max(np.abs(arr - v)) < 1e-12


def test_defect_decay_law():
    kappa = 0.5
    s0 = MomentState(0.8, 0.9, 0.1)
    ser = integrate_moments(s0, kappa, 10.0, 1e-3)
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (ser.x[1:] + ser.x[:-1]) * 1e-3)])
    predicted = uncertainty_defect(s0) * np.exp(-2 * kappa * integral)
    assert np.max(np.abs(ser.defect - predicted)) < 1e-6
    assert np.all(np.diff(ser.defect) <= 0)


def test_unstable_step_is_reported():
    with pytest.raises(IntegrationUnstable):
        integrate_moments(MomentState(5.0, 5.0, 0.0), 16.0, 10.0, 0.5)


def test_bad_horizon():
    with pytest.raises(InvalidInput):
        integrate_moments(GROUND_STATE, 0.25, 1.0005, 1e-3)


def test_free_particle():
    s = stationary_moments_free(OscillatorConfig(mass=1, omega=0, gamma=1, hbar=1))
    assert (s.var_q, s.var_p, s.cov) == pytest.approx((1.0, 0.5, 1.0))
    assert s.var_q * s.var_p == pytest.approx(0.25 + s.cov**2 / 4)
    assert stationary_moments_free(OscillatorConfig(mass=2, omega=0, gamma=8)).var_q == pytest.approx(0.25)
    with pytest.raises(NotFreeParticle):
        stationary_moments_free(OscillatorConfig())
    cfg = OscillatorConfig(mass=1, omega=0, gamma=1)
    assert max(abs(d) for d in si_moment_rhs(s, cfg)) < 1e-15


def test_free_particle_convergence():
    cfg = OscillatorConfig(mass=1.0, omega=0.0, gamma=1.0)
    f = integrate_si_moments(SIMoments(2.0, 0.3, 0.0), cfg, 40.0, 1e-3).final
    ref = stationary_moments_free(cfg)
    assert f.var_q == pytest.approx(ref.var_q, rel=1e-6)
    assert f.var_p == pytest.approx(ref.var_p, rel=1e-6)
    assert f.cov == pytest.approx(ref.cov, rel=1e-6)


def test_unmeasured_rotation_period():
    # kappa = 0: variances exchange with period pi in tau
    s0 = MomentState(0.8, 0.5, 0.3)
    ser = integrate_moments(s0, 0.0, math.pi, math.pi / 10000)
    assert ser.final.as_tuple() == pytest.approx(s0.as_tuple(), abs=1e-10)
    mid = ser[5000]  # a quarter turn swaps the variances
    assert (mid.x, mid.y, mid.z) == pytest.approx((s0.y, s0.x, -s0.z), abs=1e-10)


def test_convergence_times_factor_two():
    t = convergence_times(OscillatorConfig(gamma=0.5))
    assert t["relative"] == pytest.approx(2 * t["measurement"])


positive = st.floats(0.05, 5.0)


@settings(max_examples=100, deadline=None)
@given(positive, positive, st.floats(-2, 2), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.01, 4))
def test_si_rhs_matches_dimensionless(x, extra, z, m, w, kappa):
    y = (0.25 + 0.25 * z * z) / x + extra
    cfg = OscillatorConfig.from_kappa(kappa, mass=m, omega=w)
    s = MomentState(x, y, z)
    si = from_dimensionless(s, cfg)
    back = to_dimensionless(si, cfg)
    assert back.as_tuple() == pytest.approx(s.as_tuple(), rel=1e-12)
    d_si = si_moment_rhs(si, cfg)
    mw = m * w
    # per-second SI derivatives -> per-tau dimensionless derivatives
    d = (d_si[0] * mw / (cfg.hbar * w), d_si[1] / (cfg.hbar * mw * w), d_si[2] / (cfg.hbar * w))
    assert d == pytest.approx(moment_rhs(s, kappa), rel=1e-10, abs=1e-12)
