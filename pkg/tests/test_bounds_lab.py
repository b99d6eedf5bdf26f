import numpy as np
import pytest

from waveop4d.bounds_lab import (
    DEFAULT_LEMMA_PARAMS,
    SyntheticKernel,
    annulus_log_probe,
    fit_decay_exponent,
    fit_regime_bound,
    lp_growth_slope,
    schur_sums,
    weight,
    weighted_convolution_check,
)
from waveop4d.wave_kernel import KernelGrid, KernelGridSpec, assemble_ws_grid

SPEC = KernelGridSpec(0.25, 1000.0, 49, 3)


def test_weight_is_exact_inverse_of_synthetic_model():
    r = np.geomspace(0.1, 100.0, 7)
    rx, ry = np.meshgrid(r, r)
    model = SyntheticKernel(2.0, 3.0, 1.0, "Y-LARGE")
    mask = model(rx, ry) != 0
    assert mask.any()
    assert np.allclose((model(rx, ry) * weight(rx, ry, (2.0, 3.0, 1.0)))[mask], 1.0, rtol=1e-14)


def test_synthetic_sup_and_trend():
    g = SyntheticKernel(2.0, 3.0, 0.0, "Y-LARGE").sample(SPEC)
    fit = fit_regime_bound(g, "Y-LARGE", (2, 3, 0))
    assert fit.sup == pytest.approx(1.0, rel=1e-12)
    assert abs(fit.trend_slope) < 1e-12 and fit.holds()
    # a weight one power too strong grows linearly with the truncation radius,
    # up to where the geometric grid nodes fall below each radius
    over = fit_regime_bound(g, "Y-LARGE", (2, 4, 0))
    assert over.trend_slope == pytest.approx(1.0, abs=0.15) and not over.holds()


def test_synthetic_decay_exponents():
    g = SyntheticKernel(5.0, 0.0, 0.0, "X-LARGE").sample(SPEC)
    assert fit_decay_exponent(g, "X-LARGE", "x") == pytest.approx(5.0, abs=1e-3)
    with pytest.raises(ValueError):
        fit_decay_exponent(g, "X-LARGE", "z")


def test_fit_rejects_thin_regimes():
    g = SyntheticKernel(2.0, 3.0, 0.0, "Y-LARGE").sample(KernelGridSpec(1.0, 10.0, 5, 2))
    with pytest.raises(ValueError, match="samples"):
        fit_regime_bound(g, "Y-LARGE", (2, 3, 0))
    with pytest.raises(ValueError):
        fit_regime_bound(g, "NOWHERE", (0, 0, 0))
    with pytest.raises(ValueError):
        SyntheticKernel(1.0, 1.0, 1.0, "NOWHERE")


def test_kernel_y_exponent_dichotomy(states):
    spec = KernelGridSpec(0.5, 2000.0, 40, 3)
    y1 = fit_decay_exponent(assemble_ws_grid(states[1], spec), "Y-LARGE", "y")
    y2 = fit_decay_exponent(assemble_ws_grid(states[2], spec), "Y-LARGE", "y")
    assert y1 == pytest.approx(3.0, abs=0.3)
    assert y2 == pytest.approx(4.0, abs=0.3)


def test_schur_sums_of_model_kernels():
    fast = schur_sums(SyntheticKernel(5.0, 0.0, 0.0, "X-LARGE"))
    slow = schur_sums(SyntheticKernel(4.0, 0.0, 0.0, "X-LARGE"))
    ring = schur_sums(SyntheticKernel(3.0, 0.0, 2.0, "RING"))
    # the convergent column sum approaches its limit like 1/R
    steps = np.abs(np.diff(fast.col_sup))
    assert steps[1] <= 0.6 * steps[0] and fast.relative_change("col") < 0.05
    ring_steps = np.abs(np.diff(ring.col_sup))
    assert ring_steps[1] <= 0.6 * ring_steps[0] and ring.relative_change("row") < 0.01
    # <x>^-4 integrated over |x| > 2|y| grows like 2 pi^2 log R
    growth = np.diff(slow.col_sup) / np.diff(np.log(slow.radii))
    assert np.allclose(growth / (2 * np.pi ** 2), 1.0, rtol=0.15)
    # the row sums of an X-LARGE kernel stay bounded either way
    assert slow.relative_change("row") < 0.05


def test_grid_schur_matches_synthetic_for_regime_restriction():
    model = SyntheticKernel(5.0, 0.0, 0.0, "X-LARGE")
    g = model.sample(KernelGridSpec(0.01, 40.0, 400, 1))
    full = KernelGrid(g.scenario, g.rx, g.ry, g.theta, (1.0 + g.rx ** 2) ** -2.5 + 0j)
    restricted = schur_sums(full, regime="X-LARGE", radii=(10.0, 20.0, 40.0))
    exact = schur_sums(g, radii=(10.0, 20.0, 40.0))
    assert np.allclose(restricted.col_sup, exact.col_sup, rtol=1e-12)


@pytest.mark.parametrize("a,b,p,slope", [(2.0, 3.0, 2.0, -1.0), (2.0, 3.0, 8.0, 0.5)])
def test_lp_growth_slopes(a, b, p, slope):
    assert lp_growth_slope(a, b, p, (1e3, 1e4, 1e5)) == pytest.approx(slope, abs=0.1)


def test_lp_faster_y_decay_is_bounded():
    assert lp_growth_slope(2.0, 4.0, 8.0, (1e3, 1e4, 1e5)) <= 0.05


def test_annulus_probe():
    radii = (8.0, 32.0, 128.0)
    log0 = np.array(annulus_log_probe(radii, beta=0.0)) / np.log(radii)
    assert log0.max() / log0.min() <= 2.0
    flat = annulus_log_probe(radii, beta=1.0)
    assert max(flat) / min(flat) <= 1.5
    assert annulus_log_probe(radii, f=lambda s: 0.0) == [0.0] * 3


@pytest.mark.parametrize("lemma", sorted(DEFAULT_LEMMA_PARAMS))
def test_convolution_lemma_ratios_bounded(lemma):
    check = weighted_convolution_check(lemma, DEFAULT_LEMMA_PARAMS[lemma][0], extent=40.0)
    assert np.isfinite(check.sup_ratio) and check.stable


@pytest.mark.parametrize("lemma,params", [
    ("A1", {"alpha": 3.0, "beta": 2.0, "N": 8.0}),
    ("A1", {"alpha": 1.0, "beta": 0.5, "N": 8.0}),
    ("B1", {"s": 1.5, "alpha": 1.0, "beta": 1.0, "gamma": 0.0, "N": 8.0}),
    ("LARGEW", {"k": 2.0, "alpha": 0.0, "N": 6.0}),
    ("C9", {}),
])
def test_convolution_hypotheses_enforced(lemma, params):
    with pytest.raises(ValueError):
        weighted_convolution_check(lemma, params)
