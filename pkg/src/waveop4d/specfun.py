"""
Special functions and quadrature primitives
===========================================

Integer-order Bessel functions of small order, the smooth low-energy cutoff,
and deterministic quadrature rules on intervals and on the unit sphere S^3.

Bessel evaluation
-----------------
Three bands, each accurate to a few ulps in absolute terms:

* ``x < 2``: ascending power series with a fixed number of terms;
* ``2 <= x < 20``: Miller backward recurrence for ``J``, with ``Y_0`` and
  ``Y_1`` from their Neumann series in the same ``J_k`` sequence;
* ``x >= 20``: Hankel asymptotic expansion for orders 0 and 1.

Higher orders of ``Y`` (and of ``J`` in the asymptotic band) follow by upward
recurrence, which is stable for ``x > n``. The power series is confined to
small ``x`` because its terms reach ``e^x / x`` and cancel.

All functions accept scalars or arrays and return ``float`` / ``ndarray``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib.resources import files

import numpy as np

SERIES_SWITCH = 2.0
ASYMP_SWITCH = 20.0
_N_SERIES = 48
_N_ASYMP = 24
_EULER_GAMMA = 0.57721566490153286061
MAX_ORDER = 4


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def _as_array(x, *, allow_zero: bool, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name}: non-finite argument")
    if allow_zero:
        if np.any(arr < 0):
            raise DomainError(f"{name}: negative argument")
    elif np.any(arr <= 0):
        raise DomainError(f"{name}: argument must be positive")
    return arr


def _ret(arr: np.ndarray, like):
    return float(arr) if np.ndim(like) == 0 else arr


# ---------------------------------------------------------------------------
# power series (x < SERIES_SWITCH)
# ---------------------------------------------------------------------------

def _series_j(n: int, x: np.ndarray) -> np.ndarray:
    q = -0.25 * x * x
    term = (0.5 * x) ** n / math.factorial(n)
    total = term.copy()
    for k in range(1, _N_SERIES):
        term = term * q / (k * (k + n))
        total += term
    return total


@lru_cache(maxsize=None)
def _psi_sums(n: int) -> np.ndarray:
    # psi(k+1) + psi(n+k+1) for k = 0.._N_SERIES-1
    h = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, _N_SERIES + n + 1))])
    k = np.arange(_N_SERIES)
    return (h[k] - _EULER_GAMMA) + (h[n + k] - _EULER_GAMMA)


def _series_y(n: int, x: np.ndarray) -> np.ndarray:
    half = 0.5 * x
    q = -0.25 * x * x
    psi = _psi_sums(n)
    term = half ** n / math.factorial(n)
    acc = psi[0] * term
    for k in range(1, _N_SERIES):
        term = term * q / (k * (k + n))
        acc += psi[k] * term
    out = (2.0 / np.pi) * np.log(half) * _series_j(n, x) - acc / np.pi
    if n > 0:
        finite = np.zeros_like(x)
        q2 = 0.25 * x * x
        for k in range(n):
            finite += math.factorial(n - k - 1) / math.factorial(k) * q2 ** k
        out -= finite * half ** (-n) / np.pi
    return out


# ---------------------------------------------------------------------------
# Hankel asymptotic expansion (x >= ASYMP_SWITCH)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _asymp_coeffs(nu: int) -> np.ndarray:
    mu = 4.0 * nu * nu
    a = [1.0]
    for k in range(1, _N_ASYMP):
        a.append(a[-1] * (mu - (2 * k - 1) ** 2) / (k * 8.0))
    return np.array(a)


def _asymp_pq(nu: int, x: np.ndarray):
    a = _asymp_coeffs(nu)
    inv = 1.0 / x
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    pw = np.ones_like(x)
    for k in range(_N_ASYMP):
        term = a[k] * pw
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p += sign * term
        else:
            q += sign * term
        pw = pw * inv
    return p, q


def _asymp_jy(nu: int, x: np.ndarray):
    p, q = _asymp_pq(nu, x)
    w = x - (0.5 * nu + 0.25) * np.pi
    c, s = np.cos(w), np.sin(w)
    amp = np.sqrt(2.0 / (np.pi * x))
    return amp * (p * c - q * s), amp * (p * s + q * c)


# ---------------------------------------------------------------------------
# backward recurrence (SERIES_SWITCH <= x < ASYMP_SWITCH)
# ---------------------------------------------------------------------------

def _miller(x: np.ndarray) -> np.ndarray:
    """``J_0 .. J_{N}`` by backward recurrence normalized with ``J_0 + 2 sum J_2k = 1``.

    Rows index the order. Absolute accuracy is a few ulps, unlike the power
    series, which cancels terms of size ``e^x / x`` here.
    """
    top = float(np.max(x))
    N = int(top + 10.0 * top ** (1.0 / 3.0) + 20.0)
    N += N % 2
    f = np.zeros((N + 2,) + x.shape)
    f[N] = 1e-30
    for k in range(N, 0, -1):
        f[k - 1] = 2.0 * k / x * f[k] - f[k + 1]
    norm = f[0] + 2.0 * f[2:N + 1:2].sum(axis=0)
    return f[:N + 1] / norm


def _mid_jy(n: int, x: np.ndarray):
    J = _miller(x)
    N = J.shape[0] - 1
    k = np.arange(1, N // 2 + 1)[:, None]
    sign = np.where(k % 2, -1.0, 1.0)
    L = np.log(0.5 * x) + _EULER_GAMMA
    # Neumann series for Y_0 and its derivative
    y0 = (2.0 / np.pi) * (L * J[0] - 2.0 * np.sum(sign * J[2:N + 1:2] / k, axis=0))
    odd_lo = J[1:N:2]
    odd_hi = np.concatenate([J[3:N + 1:2], np.zeros((1,) + x.shape)])
    y1 = (2.0 / np.pi) * (L * J[1] - J[0] / x + np.sum(sign * (odd_lo - odd_hi) / k, axis=0))
    for m in range(1, n):
        y0, y1 = y1, 2.0 * m / x * y1 - y0
    return J[n], (y0 if n == 0 else y1)


def _mid_jy_chunked(n: int, x: np.ndarray, chunk: int = 1 << 15):
    # the recurrence holds ~70 rows per point; cap the working set
    if x.size <= chunk:
        return _mid_jy(n, x)
    parts = [_mid_jy(n, x[i:i + chunk]) for i in range(0, x.size, chunk)]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


# ---------------------------------------------------------------------------
# public Bessel functions
# ---------------------------------------------------------------------------

def _large_jy(n: int, x: np.ndarray):
    j0, y0 = _asymp_jy(0, x)
    if n == 0:
        return j0, y0
    j1, y1 = _asymp_jy(1, x)
    for m in range(1, n):
        j0, j1 = j1, 2.0 * m / x * j1 - j0
        y0, y1 = y1, 2.0 * m / x * y1 - y0
    return j1, y1


def _evaluate(n: int, arr: np.ndarray, want_j: bool, want_y: bool):
    j = np.empty_like(arr) if want_j else None
    y = np.empty_like(arr) if want_y else None
    bands = (arr < SERIES_SWITCH, (arr >= SERIES_SWITCH) & (arr < ASYMP_SWITCH), arr >= ASYMP_SWITCH)
    for b, sel in enumerate(bands):
        if not np.any(sel):
            continue
        xs = arr[sel]
        if b == 0:
            if want_j:
                j[sel] = _series_j(n, xs)
            if want_y:
                y[sel] = _series_y(n, xs)
            continue
        jv, yv = _mid_jy_chunked(n, xs) if b == 1 else _large_jy(n, xs)
        if want_j:
            j[sel] = jv
        if want_y:
            y[sel] = yv
    return j, y


# ---------------------------------------------------------------------------
# near-zero refinement of J_n
# ---------------------------------------------------------------------------
#
# Any evaluation from a rounded argument carries an absolute error of an ulp
# or so, which is a large relative error next to a zero. Within ZERO_RADIUS of
# a tabulated zero z = hi + lo, J_n is instead summed as a Taylor series in
# h = (x - hi) - lo, whose coefficients follow from the Bessel equation.

ZERO_RADIUS = 0.5
_N_TAYLOR = 30


@lru_cache(maxsize=1)
def _zero_table() -> dict:
    rows = np.loadtxt(files("waveop4d").joinpath("data", "bessel_j_zeros.csv").read_text().splitlines()[1:],
                      delimiter=",", ndmin=2)
    return {n: (rows[rows[:, 0] == n, 2], rows[rows[:, 0] == n, 3]) for n in range(MAX_ORDER + 1)}


@lru_cache(maxsize=None)
def _zero_taylor(n: int) -> np.ndarray:
    """Taylor coefficients ``c[k, m]`` of ``J_n(z_k + h)``; ``c[:, 0] = 0``."""
    z = _zero_table()[n][0]
    c = np.zeros((z.size, _N_TAYLOR + 2))
    # J_n'(z) at a zero of J_n
    c[:, 1] = -_evaluate(1, z, True, False)[0] if n == 0 else _evaluate(n - 1, z, True, False)[0]
    for m in range(0, _N_TAYLOR):
        prev1 = c[:, m - 1] if m >= 1 else 0.0
        prev2 = c[:, m - 2] if m >= 2 else 0.0
        c[:, m + 2] = -(z * (m + 1) * (2 * m + 1) * c[:, m + 1] + (m * m + z * z - n * n) * c[:, m]
                        + 2 * z * prev1 + prev2) / (z * z * (m + 2) * (m + 1))
    return c[:, :_N_TAYLOR]


def _refine_near_zeros(n: int, x: np.ndarray, out: np.ndarray) -> None:
    hi, lo = _zero_table()[n]
    k = np.clip(np.searchsorted(hi, x), 1, hi.size - 1)
    k = np.where(np.abs(x - hi[k - 1]) < np.abs(x - hi[k]), k - 1, k)
    h = (x - hi[k]) - lo[k]
    near = np.abs(h) < ZERO_RADIUS
    if not np.any(near):
        return
    c = _zero_taylor(n)[k[near]]
    hn = h[near]
    acc = c[:, -1]
    for m in range(_N_TAYLOR - 2, -1, -1):
        acc = acc * hn + c[:, m]
    out[near] = acc


def bessel_jn(n: int, x):
    """Bessel function of the first kind ``J_n(x)`` for ``0 <= n <= 4``, ``x >= 0``.

    Relative accuracy is kept near the zeros below 200 as well.
    """
    if not 0 <= n <= MAX_ORDER:
        raise DomainError(f"bessel_jn: order {n} not supported (0..{MAX_ORDER})")
    arr = _as_array(x, allow_zero=True, name="bessel_jn")
    out = _evaluate(n, arr, True, False)[0]
    if arr.size:
        _refine_near_zeros(n, arr.ravel(), out.reshape(-1))
    return _ret(out, x)


def bessel_yn(n: int, x):
    """Bessel function of the second kind ``Y_n(x)`` for ``0 <= n <= 4``, ``x > 0``."""
    if not 0 <= n <= MAX_ORDER:
        raise DomainError(f"bessel_yn: order {n} not supported (0..{MAX_ORDER})")
    arr = _as_array(x, allow_zero=False, name="bessel_yn")
    return _ret(_evaluate(n, arr, False, True)[1], x)


def bessel_j0(x):
    return bessel_jn(0, x)


def bessel_j1(x):
    """Order-1 Bessel function of the first kind.

    Raises :class:`DomainError` for negative or non-finite ``x``.
    """
    return bessel_jn(1, x)


def bessel_y0(x):
    return bessel_yn(0, x)


def bessel_y1(x):
    """Order-1 Bessel function of the second kind, ``x > 0``."""
    return bessel_yn(1, x)


def bessel_jy(n: int, x):
    """Return ``(J_n(x), Y_n(x))`` together for positive array ``x``.

    Shares the evaluation between the two kinds; this is the hot path of the
    oscillatory integrals, so ``J_n`` here is absolutely (not relatively)
    accurate near its zeros.
    """
    if not 0 <= n <= MAX_ORDER:
        raise DomainError(f"bessel_jy: order {n} not supported (0..{MAX_ORDER})")
    arr = _as_array(x, allow_zero=False, name="bessel_jy")
    j, y = _evaluate(n, arr, True, True)
    return j, y


# ---------------------------------------------------------------------------
# smooth cutoff
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutoffSpec:
    """Low-energy cutoff: identically 1 on ``[0, lam0/2]``, 0 on ``[lam0, inf)``."""

    lam0: float = 0.5

    def __post_init__(self):
        if not (self.lam0 > 0 and math.isfinite(self.lam0)):
            raise ValueError(f"lam0 must be positive, got {self.lam0}")

    @property
    def plateau(self) -> float:
        return 0.5 * self.lam0


def _g(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_cutoff(lam, spec: CutoffSpec = CutoffSpec()):
    """Smooth cutoff value at spectral parameter ``lam >= 0``.

    Transition profile ``h(t) = g(t) / (g(t) + g(1 - t))`` with
    ``g(t) = exp(-1/t)``, ``t = (lam0 - lam) / (lam0 / 2)``.
    """
    arr = np.asarray(lam, dtype=float)
    if np.any(arr < 0):
        raise DomainError("smooth_cutoff: lam must be nonnegative")
    t = np.clip((spec.lam0 - arr) / spec.plateau, 0.0, 1.0)
    a = _g(t)
    b = _g(1.0 - t)
    out = a / (a + b)
    return _ret(out, lam)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights; ``nodes`` is ``(n,)`` or ``(n, 4)``."""

    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))

    def __len__(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=64)
def _gl_reference(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule:
    """n-point Gauss-Legendre rule on ``[a, b]``."""
    x, w = _gl_reference(n)
    half = 0.5 * (b - a)
    return QuadratureRule(0.5 * (a + b) + half * x, half * w)


def composite_gauss_legendre(breaks, n: int) -> QuadratureRule:
    """Gauss-Legendre with ``n`` nodes on each panel ``[breaks[i], breaks[i+1]]``."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = _gl_reference(n)
    lo, hi = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (lo + hi) + half * x).ravel()
    weights = (half * w).ravel()
    return QuadratureRule(nodes, weights)


def graded_breaks(a: float, b: float, ratio: float = 0.5, levels: int = 30) -> np.ndarray:
    """Breakpoints on ``[a, b]`` refined geometrically toward ``a``."""
    frac = ratio ** np.arange(levels, 0, -1)
    return np.concatenate([[a], a + (b - a) * frac, [b]])


def sphere3_rule(degree: int) -> QuadratureRule:
    """Product rule on S^3 exact for polynomials of total degree ``<= degree``.

    Hyperspherical angles ``(chi, theta, phi)`` with measure
    ``sin^2(chi) sin(theta) dchi dtheta dphi``: Gauss-Chebyshev (second kind)
    in ``cos chi``, Gauss-Legendre in ``cos theta``, and the trapezoid rule in
    ``phi``.
    """
    if not (isinstance(degree, (int, np.integer)) and 1 <= degree <= 20):
        raise ValueError(f"sphere3_rule: unsupported degree {degree!r} (1..20)")
    m = degree // 2 + 1
    k = np.arange(1, m + 1)
    ang = k * np.pi / (m + 1)
    t_chi = np.cos(ang)
    w_chi = np.pi / (m + 1) * np.sin(ang) ** 2
    t_th, w_th = np.polynomial.legendre.leggauss(m)
    n_phi = degree + 1
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    w_phi = np.full(n_phi, 2.0 * np.pi / n_phi)

    C, T, P = np.meshgrid(t_chi, t_th, phi, indexing="ij")
    WC, WT, WP = np.meshgrid(w_chi, w_th, w_phi, indexing="ij")
    s_chi = np.sqrt(1.0 - C ** 2)
    s_th = np.sqrt(1.0 - T ** 2)
    nodes = np.stack(
        [C, s_chi * T, s_chi * s_th * np.cos(P), s_chi * s_th * np.sin(P)], axis=-1
    ).reshape(-1, 4)
    weights = (WC * WT * WP).ravel()
    return QuadratureRule(nodes, weights)
