"""Spherical harmonics on S^3 for small degree.

Real orthonormal bases are built numerically: homogeneous monomials of degree
``ell`` restricted to the sphere span ``H_ell + H_{ell-2} + ...``, so
projecting out the degree ``ell-2`` span (in the quadrature inner product)
leaves exactly the harmonics of degree ``ell``.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .specfun import sphere3_rule

SPHERE_AREA = 2.0 * np.pi ** 2


def multiplet_size(ell: int) -> int:
    return (ell + 1) ** 2


def chebyshev_u(ell: int, t):
    """Chebyshev polynomial of the second kind (Gegenbauer ``C^1_ell``)."""
    t = np.asarray(t, dtype=float)
    u_prev, u = np.ones_like(t), 2.0 * t
    if ell == 0:
        return u_prev
    for _ in range(1, ell):
        u_prev, u = u, 2.0 * t * u - u_prev
    return u


def addition_factor(ell: int, t):
    """``sum_m Y_m(a) Y_m(b)`` over an orthonormal degree-ell basis, ``t = a.b``."""
    return (ell + 1) * chebyshev_u(ell, t) / SPHERE_AREA


def _exponents(deg: int):
    return [e for e in itertools.product(range(deg + 1), repeat=4) if sum(e) == deg]


def _monomials(points: np.ndarray, exps) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    out = np.ones((pts.shape[0], len(exps)))
    for j, e in enumerate(exps):
        for axis, k in enumerate(e):
            if k:
                out[:, j] *= pts[:, axis] ** k
    return out


@lru_cache(maxsize=None)
def _basis_coefficients(ell: int):
    exps = _exponents(ell)
    rule = sphere3_rule(2 * ell + 2)
    sw = np.sqrt(rule.weights)[:, None]
    a = _monomials(rule.nodes, exps) * sw
    if ell >= 2:
        b = _monomials(rule.nodes, _exponents(ell - 2)) * sw
        q, _ = np.linalg.qr(b)
        a = a - q @ (q.T @ a)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    d = multiplet_size(ell)
    vals = u[:, :d] / sw
    coef, *_ = np.linalg.lstsq(_monomials(rule.nodes, exps), vals, rcond=None)
    return exps, coef


def multiplet_basis(ell: int, directions) -> np.ndarray:
    """Values ``(n, (ell+1)^2)`` of a real orthonormal degree-ell basis."""
    if not 0 <= ell <= 4:
        raise ValueError(f"harmonic degree {ell} not supported (0..4)")
    pts = np.atleast_2d(np.asarray(directions, dtype=float))
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    exps, coef = _basis_coefficients(ell)
    return _monomials(pts, exps) @ coef


@lru_cache(maxsize=None)
def _representative_norm(ell: int) -> float:
    rule = sphere3_rule(2 * ell + 2)
    vals = np.prod(rule.nodes[:, :ell], axis=1) if ell else np.ones(len(rule))
    return float(np.sqrt(rule.integrate(vals ** 2)))


def representative_harmonic(ell: int, directions) -> np.ndarray:
    """Normalized ``z1 z2 ... z_ell`` on S^3 (harmonic for ``ell <= 4``)."""
    pts = np.atleast_2d(np.asarray(directions, dtype=float))
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    vals = np.prod(pts[:, :ell], axis=1) if ell else np.ones(pts.shape[0])
    return vals / _representative_norm(ell)
