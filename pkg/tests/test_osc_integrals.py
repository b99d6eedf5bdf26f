import numpy as np
import pytest
from scipy import integrate, special

from waveop4d.osc_integrals import (
    OscTable,
    TableConfig,
    TableRangeError,
    build_table,
    certify,
    certify_left_regimes,
    envelope,
    ibp_probe,
    lambda_integral,
    left_lambda_integral,
    refinement_change,
)
from waveop4d.specfun import CutoffSpec, smooth_cutoff

CUT = CutoffSpec(0.5)


def _oracle(A, B, j=0, p=-1, lp=0, left=False):
    """scipy quad with scipy.special Bessel functions."""

    def r0p(lam, r):
        x = lam * r
        return -lam / (8 * np.pi * r) * (special.y1(x) - 1j * special.j1(x))

    def d_r0p(lam, r):
        x = lam * r
        return lam ** 3 / (8 * np.pi) * (special.yn(2, x) - 1j * special.jv(2, x)) / x

    def diff(lam, r):
        x = lam * r
        g = [special.j1(x) / x, -special.jv(2, x) / x, -special.j1(x) / x + 3 * special.jv(2, x) / x ** 2][j]
        return 1j * lam ** (2 + j) / (4 * np.pi) * g

    def f(lam):
        w = lam ** p * smooth_cutoff(lam, CUT) * (np.log(lam) ** lp if lp else 1.0)
        return (d_r0p(lam, A) if left else r0p(lam, A)) * diff(lam, B) * w

    opts = dict(points=[0.25], limit=4000, epsabs=1e-15, epsrel=1e-11)
    re = integrate.quad(lambda t: f(t).real, 0, 0.5, **opts)[0]
    im = integrate.quad(lambda t: f(t).imag, 0, 0.5, **opts)[0]
    return re + 1j * im


@pytest.mark.parametrize("triple", [(0, -1, 0), (1, -1, 0), (2, -1, 0), (0, 1, 1)])
@pytest.mark.parametrize("AB", [(10.0, 10.0), (3.0, 40.0), (60.0, 2.0), (0.2, 0.5)])
def test_direct_against_scipy_oracle(triple, AB):
    got = lambda_integral(*AB, *triple, cutoff=CUT)
    ref = _oracle(*AB, *triple)
    assert abs(got - ref) <= 1e-7 * abs(ref) + 1e-14


@pytest.mark.parametrize("AB", [(10.0, 10.0), (3.0, 40.0), (60.0, 2.0)])
def test_left_against_scipy_oracle(AB):
    got = left_lambda_integral(*AB, cutoff=CUT)
    ref = _oracle(*AB, left=True)
    assert abs(got - ref) <= 1e-7 * abs(ref)


def test_bound_ratio_regression_and_refinement():
    A = B = 10.0
    val = lambda_integral(A, B, 0, cutoff=CUT)
    tight = lambda_integral(A, B, 0, cutoff=CUT, tol=1e-16)
    assert abs(val - tight) <= 1e-9 * abs(tight)
    ratio = abs(val) / envelope(A, B, 0)
    assert ratio == pytest.approx(7.609256107e-4, rel=1e-8)


def test_small_b_limit():
    A = 5.0
    vals = [abs(lambda_integral(A, B, 0, cutoff=CUT)) for B in (1e-3, 1e-2)]
    bound = A ** -2 / np.sqrt(1 + A * A)
    assert all(np.isfinite(v) and v <= bound for v in vals)
    # the right factor tends to i lam^2 / (8 pi): I is B-independent to O(B^2)
    assert vals[0] == pytest.approx(vals[1], rel=1e-3)


@pytest.fixture(scope="module")
def small_table():
    return build_table(TableConfig(0, -1, 0, a_max=50.0, b_max=50.0))


def test_lookup_exact_at_nodes(small_table):
    t = small_table
    ia, ib = np.array([0, 17, 60, t.a_grid.size - 1]), np.array([3, 40, 90, t.b_grid.size - 1])
    assert np.array_equal(t.lookup(t.a_grid[ia], t.b_grid[ib]), t.values[ia, ib])


def test_lookup_off_node_accuracy(small_table, rng):
    A = np.exp(rng.uniform(np.log(1e-2), np.log(49.0), 100))
    B = np.exp(rng.uniform(np.log(1e-2), np.log(49.0), 100))
    got = small_table.lookup(A, B)
    ref = np.array([lambda_integral(a, b, 0, cutoff=CUT) for a, b in zip(A, B)])
    assert np.max(np.abs(got - ref) / np.abs(ref)) <= 1e-3


def test_interpolation_refinement_order(rng):
    def max_err(per_decade, step):
        t = build_table(TableConfig(0, -1, 0, a_max=20.0, b_max=20.0, per_decade=per_decade, step=step))
        A = np.exp(rng.uniform(np.log(0.05), np.log(19.0), 40))
        B = np.exp(rng.uniform(np.log(0.05), np.log(19.0), 40))
        ref = np.array([lambda_integral(a, b, 0, cutoff=CUT) for a, b in zip(A, B)])
        return np.max(np.abs(t.lookup(A, B) - ref) / np.abs(ref))

    rng_state = rng.bit_generator.state
    coarse = max_err(12, 0.5)
    rng.bit_generator.state = rng_state
    fine = max_err(24, 0.25)
    assert fine * 4 <= coarse


def test_table_matches_direct_and_refinement(small_table):
    t = small_table
    for ia, ib in [(10, 80), (70, 70), (120, 5)]:
        ref = lambda_integral(t.a_grid[ia], t.b_grid[ib], 0, cutoff=CUT)
        assert abs(t.values[ia, ib] - ref) <= 1e-8 * abs(ref)
    assert refinement_change(t) < 1e-8


def test_certificates(small_table):
    c = certify(small_table, inner_max=25.0)
    assert np.isfinite(c.sup) and c.stable
    left = build_table(TableConfig(kind="left", a_max=50.0, b_max=50.0))
    regimes = certify_left_regimes(left, inner_max=25.0)
    assert set(regimes) == {"A>2B", "B>2A", "A~B"}
    assert all(r.stable for r in regimes.values())


def test_save_load_and_range(small_table, tmp_path):
    path = tmp_path / "t.npz"
    small_table.save(path, extra={"config_hash": "x"})
    back = OscTable.load(path)
    assert back.config == small_table.config
    assert np.array_equal(back.values, small_table.values)
    with pytest.raises(TableRangeError):
        small_table.lookup(80.0, 1.0, fallback=False)
    assert small_table.lookup(80.0, 1.0) == pytest.approx(lambda_integral(80.0, 1.0, cutoff=CUT), rel=1e-12)


def test_argument_validation():
    with pytest.raises(ValueError):
        lambda_integral(1.0, 1.0, 3, -1, 0)
    with pytest.raises(ValueError):
        lambda_integral(0.0, 1.0)
    with pytest.raises(ValueError):
        TableConfig(kind="middle")


def test_ibp_probe_zero_frequency_and_admissibility():
    cut = CutoffSpec(8.0)
    for beta in (0.0, 0.5, 1.0):
        ref = integrate.quad(lambda t: t ** beta * smooth_cutoff(t, cut), 0, 8.0, points=[4.0], epsabs=1e-14)[0]
        assert ibp_probe(0.0, beta) == pytest.approx(ref, rel=1e-10)
    with pytest.raises(ValueError):
        ibp_probe(10.0, 3.5)
    with pytest.raises(ValueError):
        ibp_probe(-1.0, 0.0)
