import numpy as np
import pytest

from waveop4d.harmonics import (
    SPHERE_AREA,
    addition_factor,
    multiplet_basis,
    multiplet_size,
    representative_harmonic,
)
from waveop4d.specfun import sphere3_rule


@pytest.mark.parametrize("ell", range(4))
def test_basis_orthonormal_and_harmonic(ell):
    rule = sphere3_rule(2 * ell + 4)
    Y = multiplet_basis(ell, rule.nodes)
    gram = (Y * rule.weights[:, None]).T @ Y
    assert np.allclose(gram, np.eye(multiplet_size(ell)), atol=1e-12)
    # orthogonal to every lower degree
    for k in range(ell):
        Z = multiplet_basis(k, rule.nodes)
        assert np.allclose((Y * rule.weights[:, None]).T @ Z, 0.0, atol=1e-12)


@pytest.mark.parametrize("ell", range(4))
def test_addition_theorem(ell, rng):
    a = rng.normal(size=(6, 4))
    b = rng.normal(size=(6, 4))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    lhs = np.sum(multiplet_basis(ell, a) * multiplet_basis(ell, b), axis=1)
    assert np.allclose(lhs, addition_factor(ell, np.sum(a * b, axis=1)), atol=1e-12)
    assert addition_factor(ell, 1.0) == pytest.approx(multiplet_size(ell) / SPHERE_AREA)


@pytest.mark.parametrize("ell", range(4))
def test_representative_normalized(ell):
    rule = sphere3_rule(2 * ell + 2)
    y = representative_harmonic(ell, rule.nodes)
    assert rule.integrate(y ** 2) == pytest.approx(1.0, rel=1e-12)
    if ell:
        assert abs(rule.integrate(y)) < 1e-12
