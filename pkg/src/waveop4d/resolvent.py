"""
Free resolvent kernels of -Delta in four dimensions.

The outgoing/incoming resolvents at energy lam^2 are radial convolution
kernels::

    R0+-(lam^2, r) = -lam / (8 pi r) * [Y1(lam r) -+ i J1(lam r)]

so that their difference is ``i lam J1(lam r) / (4 pi r)``, an entire function
of ``r``. Radial derivatives are obtained from the Bessel recurrences
``(Z1(x)/x)' = -Z2(x)/x`` and ``(Z2(x)/x)' = Z1(x)/x - 3 Z2(x)/x^2``; finite
differences appear only in the tests.
"""

from __future__ import annotations

import numpy as np

from .specfun import DomainError, bessel_jn, bessel_jy

_8PI = 8.0 * np.pi
_4PI = 4.0 * np.pi


def _check(lam, r):
    lam = np.asarray(lam, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
        raise DomainError("resolvent: lam must be positive")
    if np.any(~np.isfinite(r)) or np.any(r <= 0):
        raise DomainError("resolvent: r must be positive (kernel singular at r = 0)")
    return lam, r


def _out(val, lam, r):
    return complex(val) if np.ndim(lam) == 0 and np.ndim(r) == 0 else val


def r0_plus(lam, r):
    """Outgoing free resolvent kernel ``R0+(lam^2, r)``."""
    lam, r = _check(lam, r)
    j1, y1 = bessel_jy(1, lam * r)
    val = -lam / (_8PI * r) * (y1 - 1j * j1)
    return _out(val, lam, r)


def r0_minus(lam, r):
    """Incoming free resolvent kernel ``R0-(lam^2, r)``."""
    lam, r = _check(lam, r)
    j1, y1 = bessel_jy(1, lam * r)
    val = -lam / (_8PI * r) * (y1 + 1j * j1)
    return _out(val, lam, r)


def r0_diff(lam, r):
    """``(R0+ - R0-)(lam^2, r) = i lam J1(lam r) / (4 pi r)``; purely imaginary."""
    lam, r = _check(lam, r)
    val = 1j * lam * np.asarray(bessel_jn(1, lam * r)) / (_4PI * r)
    return _out(val, lam, r)


def _g_derivative(x: np.ndarray, j: int) -> np.ndarray:
    """j-th derivative of ``J1(x)/x``."""
    if j == 0:
        return np.asarray(bessel_jn(1, x)) / x
    j2 = np.asarray(bessel_jn(2, x))
    if j == 1:
        return -j2 / x
    j1 = np.asarray(bessel_jn(1, x))
    return -j1 / x + 3.0 * j2 / (x * x)


def r0_diff_radial_derivative(lam, r, j: int = 1):
    """``d^j/dr^j`` of ``(R0+ - R0-)(lam^2, r)`` for ``j`` in {0, 1, 2}."""
    if j not in (0, 1, 2):
        raise ValueError(f"derivative order must be 0, 1 or 2, got {j}")
    lam, r = _check(lam, r)
    val = 1j * lam ** (2 + j) / _4PI * _g_derivative(lam * r, j)
    return _out(val, lam, r)


def r0_plus_radial_derivative(lam, r):
    """``d/dr R0+(lam^2, r) = lam^3 / (8 pi) * (Y2 - i J2)(lam r) / (lam r)``."""
    lam, r = _check(lam, r)
    x = lam * r
    j2, y2 = bessel_jy(2, x)
    val = lam ** 3 / _8PI * (y2 - 1j * j2) / x
    return _out(val, lam, r)


def green_zero_energy(r):
    """Zero-energy Green's function ``1 / (4 pi^2 r^2)`` of -Delta in R^4."""
    r = np.asarray(r, dtype=float)
    return 1.0 / (4.0 * np.pi ** 2 * r * r)
