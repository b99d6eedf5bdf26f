import numpy as np
import pytest

from waveop4d.potential import RadialPotential
from waveop4d.zero_energy import (
    DEFAULT_SHOOTING,
    BracketError,
    SectorState,
    decay_fit,
    find_bracket,
    matching_angle,
    ode_residual,
    radial_zero_solve,
    small_r_exponent,
    solve_sector,
    tune_coupling,
)

GAUSS = RadialPotential("gaussian", coupling=-1.0)
# regression baselines for the Gaussian well
C_STAR = {1: -18.8257022819, 2: -36.3278358418}
M1_L1 = 12.99337453


@pytest.mark.parametrize("ell", [0, 1, 2])
def test_free_mismatch_closed_form(ell):
    rm = DEFAULT_SHOOTING.r_match
    assert radial_zero_solve(GAUSS, ell, 0.0) == pytest.approx((ell + (2 + ell)) / rm, rel=1e-8)


def test_mismatch_changes_sign_across_threshold():
    lo, hi = find_bracket(GAUSS, 1)
    assert lo < C_STAR[1] < hi
    assert np.sign(matching_angle(GAUSS, 1, lo)) != np.sign(matching_angle(GAUSS, 1, hi))
    with pytest.raises(BracketError):
        tune_coupling(GAUSS, 1, (-5.0, -1.0))


@pytest.mark.parametrize("ell", [1, 2])
def test_couplings_regression(states, ell):
    st = states[ell]
    assert st.coupling == pytest.approx(C_STAR[ell], abs=1e-6)
    assert abs(st.mismatch) < 1e-8
    assert abs(st.l2_norm - 1) <= 1e-8
    assert ode_residual(st) <= 1e-6


def test_scaled_family_same_coupling():
    scaled = RadialPotential("gaussian", coupling=-1.0, scale=2.0)
    tuned = tune_coupling(scaled, 1, find_bracket(scaled, 1))
    assert tuned.coupling == pytest.approx(C_STAR[1], abs=1e-6)


def test_moments(states):
    s1, s2 = states[1], states[2]
    assert abs(s1.m0) <= 1e-10 and abs(s2.m0) <= 1e-10
    assert np.max(np.abs(s2.m1)) <= 1e-10
    nonzero = np.flatnonzero(np.abs(s1.m1) > 1e-8)
    assert nonzero.tolist() == [0]
    assert abs(s1.m1[0]) == pytest.approx(M1_L1, rel=1e-6)


@pytest.mark.parametrize("ell", [1, 2])
def test_decay_and_small_r(states, ell):
    assert decay_fit(states[ell]) == pytest.approx(-(2 + ell), abs=0.1)
    assert small_r_exponent(states[ell]) == pytest.approx(ell, abs=1e-3)


def test_exterior_tail_is_exact_harmonic(states):
    st = states[1]
    r = np.array([70.0, 140.0])
    assert np.log(st.u_at(r)[1] / st.u_at(r)[0]) / np.log(2.0) == pytest.approx(-3.0, abs=1e-12)


def test_resonance_class_flag():
    st = solve_sector(GAUSS, 0)
    assert st.resonance_class
    assert st.coupling < 0


def test_save_load_roundtrip(states, tmp_path):
    st = states[2]
    st.save(tmp_path / "s.csv", extra={"config_hash": "abc"})
    assert (tmp_path / "s.csv").read_text().startswith("# config_hash=abc\nr,u\n")
    back = SectorState.load(tmp_path / "s.csv")
    r = np.linspace(0.01, 80, 300)
    assert np.allclose(back.u_at(r), st.u_at(r), rtol=1e-12, atol=1e-15)
    assert back.coupling == st.coupling and np.array_equal(back.m1, st.m1)


def test_rejects_bad_sector():
    with pytest.raises(ValueError):
        matching_angle(GAUSS, 7, -1.0)
