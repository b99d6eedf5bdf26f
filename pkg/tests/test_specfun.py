from math import gamma

import mpmath as mp
import numpy as np
import pytest

from waveop4d.specfun import (
    ASYMP_SWITCH,
    SERIES_SWITCH,
    CutoffSpec,
    DomainError,
    bessel_j1,
    bessel_jn,
    bessel_jy,
    bessel_y1,
    bessel_yn,
    composite_gauss_legendre,
    gauss_legendre,
    smooth_cutoff,
    sphere3_rule,
)


def _mp(f, n, xs):
    return np.array([float(f(n, mp.mpf(float(x)))) for x in xs])


@pytest.mark.parametrize("n", range(5))
def test_bessel_against_mpmath(n):
    xs = np.concatenate([np.geomspace(1e-4, 1.0, 40), np.linspace(1.0, 80.0, 400), [SERIES_SWITCH, ASYMP_SWITCH]])
    j, y = bessel_jy(n, xs)
    ref_j = _mp(mp.besselj, n, xs)
    ref_y = _mp(mp.bessely, n, xs)
    assert np.max(np.abs(j - ref_j)) < 2e-15
    assert np.max(np.abs(y - ref_y) / np.maximum(1.0, np.abs(ref_y))) < 2e-15


@pytest.mark.parametrize("n", range(5))
def test_jn_relative_accuracy_near_zeros(n):
    zeros = [float(mp.besseljzero(n, k)) for k in range(1, 30)]
    xs = np.concatenate([z + np.array([-0.3, -1e-3, -1e-9, 1e-12, 1e-6, 0.2]) for z in zeros])
    ref = _mp(mp.besselj, n, xs)
    assert np.max(np.abs(bessel_jn(n, xs) - ref) / np.abs(ref)) < 1e-13


def test_j1_examples():
    assert bessel_j1(0.0) == 0.0
    assert abs(bessel_j1(3.8317059702)) < 1e-8
    x = 50.0
    assert abs(bessel_j1(x) - np.sqrt(2 / (np.pi * x)) * np.cos(x - 0.75 * np.pi)) < 0.002
    assert abs(bessel_y1(x) - np.sqrt(2 / (np.pi * x)) * np.sin(x - 0.75 * np.pi)) < 0.002


def test_y1_small_argument():
    x = 1e-4
    assert abs(x * bessel_y1(x) / (-2 / np.pi) - 1) <= 1e-4


def test_wronskian():
    x = np.geomspace(1e-4, 1e3, 500)
    j1, y1 = bessel_jy(1, x)
    j0, y0 = bessel_jy(0, x)
    # J1' = J0 - J1/x, same for Y
    w = j1 * (y0 - y1 / x) - (j0 - j1 / x) * y1
    assert np.max(np.abs(w * np.pi * x / 2 - 1)) < 1e-9
    assert abs(bessel_j1(1.0) * (bessel_yn(0, 1.0) - bessel_y1(1.0))
               - (bessel_jn(0, 1.0) - bessel_j1(1.0)) * bessel_y1(1.0) - 2 / np.pi) < 1e-10


def test_bessel_domain_errors():
    with pytest.raises(DomainError):
        bessel_jn(1, -1.0)
    with pytest.raises(DomainError):
        bessel_yn(1, 0.0)
    with pytest.raises(DomainError):
        bessel_jn(5, 1.0)
    with pytest.raises(DomainError):
        bessel_jy(1, np.array([1.0, np.nan]))


def test_scalar_and_array_shapes():
    assert isinstance(bessel_jn(2, 3.0), float)
    a = bessel_jn(2, np.ones((3, 4)))
    assert a.shape == (3, 4)


def test_cutoff_values():
    spec = CutoffSpec(0.5)
    assert smooth_cutoff(0.125, spec) == 1.0
    assert smooth_cutoff(1.0, spec) == 0.0
    assert smooth_cutoff(0.375, spec) == pytest.approx(0.5, abs=1e-15)
    lam = np.linspace(0.25, 0.5, 101)
    v = smooth_cutoff(lam, spec)
    assert np.all(np.diff(v) <= 0) and np.all((v >= 0) & (v <= 1))


def test_gauss_legendre_exactness():
    rule = gauss_legendre(10, 0.0, 2.0)
    for k in range(20):
        assert rule.integrate(rule.nodes ** k) == pytest.approx(2.0 ** (k + 1) / (k + 1), rel=1e-13)
    comp = composite_gauss_legendre(np.array([0.0, 0.5, 1.0, 3.0]), 8)
    assert comp.integrate(np.exp(comp.nodes)) == pytest.approx(np.exp(3.0) - 1, rel=1e-14)


def test_sphere_rule_moments():
    rule = sphere3_rule(8)
    z = rule.nodes
    assert np.allclose(np.linalg.norm(z, axis=1), 1.0)
    assert abs(rule.integrate(np.ones(len(rule))) - 2 * np.pi ** 2) < 1e-12
    assert abs(rule.integrate(z[:, 0])) < 1e-12
    assert abs(rule.integrate(z[:, 0] ** 2) - np.pi ** 2 / 2) < 1e-12
    # int_{S^3} z1^a z2^b = 2 Gamma((a+1)/2) Gamma((b+1)/2) Gamma(1/2)^2 / Gamma((a+b+4)/2) for even a, b
    exact = 2 * gamma(2.5) * gamma(2.5) * gamma(0.5) ** 2 / gamma(6.0)
    assert rule.integrate(z[:, 0] ** 4 * z[:, 1] ** 4) == pytest.approx(exact, rel=1e-12)
