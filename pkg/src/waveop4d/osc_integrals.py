"""
Oscillatory spectral integrals
==============================

The workhorse integrals pair an outgoing resolvent at distance ``A`` with
(a radial derivative of) the resolvent difference at distance ``B``::

    I(A, B) = int_0^inf R0+(lam^2, A) d_B^j (R0+ - R0-)(lam^2, B)
                        lam^p (log lam)^lp Phi(lam) dlam

Supported ``(j, p, lp)``: ``(0,-1,0)``, ``(1,-1,0)``, ``(2,-1,0)`` and the
logarithmic variant ``(0,1,1)``. A companion integral puts the derivative on
the left factor instead.

Quadrature
----------
The integrand oscillates with frequency about ``A + B``. Panels have length
at most ``pi / (A + B + 1)`` (and at most ``lam0 / 8``, so the cutoff
transition is resolved), breakpoints always include ``lam0 / 2`` and the
first panel is graded geometrically toward ``lam = 0`` where the resolvent
has ``log`` terms. Each panel is checked with 16 against 24 Gauss-Legendre
nodes and halved while they disagree.

Tables
------
:func:`build_table` evaluates a whole log-spaced ``(A, B)`` grid on one
shared set of nodes: the integral becomes a matrix product of the two
factors sampled at those nodes. Lookups interpolate ``I / envelope`` with
bicubic splines in ``(log A, log B)`` and fall back to direct evaluation off
the grid.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .resolvent import r0_diff_radial_derivative, r0_plus, r0_plus_radial_derivative
from .specfun import CutoffSpec, _gl_reference, smooth_cutoff

SUPPORTED_TRIPLES = {(0, -1, 0), (1, -1, 0), (2, -1, 0), (0, 1, 1)}
GRID_MIN = 1e-3
GRID_MAX = 200.0


class QuadratureError(RuntimeError):
    """Panel refinement did not converge."""


class TableRangeError(ValueError):
    """A table does not cover the requested arguments."""


def _check_triple(j, p, lp):
    if (j, p, lp) not in SUPPORTED_TRIPLES:
        raise ValueError(f"unsupported (j, p, lp) = {(j, p, lp)}; expected one of {sorted(SUPPORTED_TRIPLES)}")


def _jap(x):
    return np.sqrt(1.0 + np.square(x))


def _weight(lam, p, lp, cutoff):
    w = lam ** p * smooth_cutoff(lam, cutoff)
    if lp:
        w = w * np.log(lam) ** lp
    return w


def _right_integrand(lam, A, B, j, p, lp, cutoff):
    return (r0_plus(lam, A) * r0_diff_radial_derivative(lam, B, j)
            * _weight(lam, p, lp, cutoff))


def _left_integrand(lam, A, B, cutoff):
    return (r0_plus_radial_derivative(lam, A) * r0_diff_radial_derivative(lam, B, 0)
            * _weight(lam, -1, 0, cutoff))


def lambda_breaks(freq: float, cutoff: CutoffSpec, grading: int = 24) -> np.ndarray:
    """Panel breakpoints on ``[0, lam0]`` for oscillation frequency ``freq``."""
    lam0 = cutoff.lam0
    h = min(np.pi / (freq + 1.0), lam0 / 8.0)
    n = int(np.ceil(cutoff.plateau / h))
    left = np.linspace(0.0, cutoff.plateau, n + 1)
    right = np.linspace(cutoff.plateau, lam0, n + 1)
    first = left[1]
    graded = first * 0.5 ** np.arange(grading, 0, -1)
    return np.concatenate([[0.0], graded, left[1:], right[1:]])


def _panel_rule(a, b, n):
    x, w = _gl_reference(n)
    half = 0.5 * (b - a)
    return 0.5 * (a + b)[:, None] + half[:, None] * x, half[:, None] * w


def _adaptive(func, breaks, tol, max_depth=14):
    a, b = breaks[:-1], breaks[1:]
    total = 0.0 + 0.0j
    worst = 0.0
    for depth in range(max_depth + 1):
        x16, w16 = _panel_rule(a, b, 16)
        x24, w24 = _panel_rule(a, b, 24)
        q16 = np.sum(w16 * func(x16.ravel()).reshape(x16.shape), axis=1)
        q24 = np.sum(w24 * func(x24.ravel()).reshape(x24.shape), axis=1)
        err = np.abs(q24 - q16)
        panel_tol = tol * np.maximum((b - a) / (breaks[-1] - breaks[0]), 1e-3)
        ok = err <= np.maximum(panel_tol, 1e-15 * np.abs(q24))
        total += np.sum(q24[ok])
        if np.all(ok):
            return total
        worst = float(np.max(err[~ok]))
        if depth == max_depth:
            break
        a_bad, b_bad = a[~ok], b[~ok]
        mid = 0.5 * (a_bad + b_bad)
        a = np.concatenate([a_bad, mid])
        b = np.concatenate([mid, b_bad])
        order = np.argsort(a, kind="stable")
        a, b = a[order], b[order]
    raise QuadratureError(
        f"panel refinement did not converge: {a.size} panels left, worst 16/24 gap {worst:.3e}, tol {tol:.3e}")


def default_tolerance(A: float) -> float:
    """Absolute error target ``1e-8 (1 + A^-2)``; panels aim 100x lower."""
    return 1e-8 * (1.0 + A ** -2)


def _check_range(A, B):
    for name, v in (("A", A), ("B", B)):
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be positive, got {v}")


def lambda_integral(A: float, B: float, j: int = 0, p: int = -1, lp: int = 0,
                    cutoff: CutoffSpec = CutoffSpec(), tol: float | None = None) -> complex:
    """Direct adaptive evaluation of ``I_j(A, B)`` for one triple."""
    _check_triple(j, p, lp)
    _check_range(A, B)
    tol = 1e-2 * default_tolerance(A) if tol is None else tol
    f = lambda lam: _right_integrand(lam, A, B, j, p, lp, cutoff)  # noqa: E731
    return complex(_adaptive(f, lambda_breaks(A + B, cutoff), tol))


def left_lambda_integral(A: float, B: float, cutoff: CutoffSpec = CutoffSpec(),
                         tol: float | None = None) -> complex:
    """``int d_A R0+(lam^2, A) (R0+ - R0-)(lam^2, B) lam^-1 Phi(lam) dlam``."""
    _check_range(A, B)
    tol = 1e-2 * 1e-8 * (1.0 + A ** -3) if tol is None else tol
    f = lambda lam: _left_integrand(lam, A, B, cutoff)  # noqa: E731
    return complex(_adaptive(f, lambda_breaks(A + B, cutoff), tol))


# ---------------------------------------------------------------------------
# envelopes (bound shapes used for scaling and certification)
# ---------------------------------------------------------------------------

def envelope(A, B, j: int = 0, p: int = -1, lp: int = 0):
    """Bound shape ``<log<A-B>>^lp / (A^2 <A+B> <A-B>^(1+j+(p+1)))``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    d = _jap(A - B)
    out = 1.0 / (A ** 2 * _jap(A + B) * d ** (1 + j + (p + 1)))
    if lp:
        out = out * _jap(np.log(d)) ** lp
    return out


def left_envelope(A, B):
    """Piecewise shape: ``A^-3`` times ``<A>^-2``, ``<B>^-2`` or ``<A-B>^-2``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    second = np.where(A > 2 * B, _jap(A), np.where(B > 2 * A, _jap(B), _jap(A - B)))
    return 1.0 / (A ** 3 * second ** 2)


def left_regime(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return np.where(A > 2 * B, "A>2B", np.where(B > 2 * A, "B>2A", "A~B"))


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def table_grid(lo: float, hi: float, per_decade: int = 24, switch: float = 4.0,
               step: float = 1.0) -> np.ndarray:
    """Log-spaced nodes up to ``switch``, then uniform with spacing ``step``.

    Off-diagonal the integrals oscillate in each argument with period about
    ``2 pi / lam0``, so a purely logarithmic grid under-resolves large ``A``.
    """
    if hi <= switch:
        n = max(4, int(np.ceil(per_decade * np.log10(hi / lo))) + 1)
        return np.geomspace(lo, hi, n)
    n_log = max(2, int(np.ceil(per_decade * np.log10(switch / lo))) + 1)
    n_lin = max(2, int(np.ceil((hi - switch) / step)) + 1)
    return np.concatenate([np.geomspace(lo, switch, n_log)[:-1], np.linspace(switch, hi, n_lin)])


@dataclass(frozen=True)
class TableConfig:
    """Table parameters. Grid extents and spacings left as ``None`` scale
    with the natural length ``1 / lam0``: ``A_max = 100 / lam0`` (200 at the
    default cutoff), uniform spacing ``0.125 / lam0`` beyond ``2 / lam0``."""

    j: int = 0
    p: int = -1
    lp: int = 0
    kind: str = "right"
    a_min: float = GRID_MIN
    a_max: float | None = None
    b_min: float = GRID_MIN
    b_max: float | None = None
    per_decade: int = 48
    step: float | None = None
    lam0: float = 0.5
    gl_order: int = 24
    density: int = 1

    def __post_init__(self):
        if self.kind not in ("right", "left"):
            raise ValueError(f"table kind must be 'right' or 'left', got {self.kind!r}")
        if self.kind == "right":
            _check_triple(self.j, self.p, self.lp)
        if not self.lam0 > 0:
            raise ValueError("lam0 must be positive")
        for lo, hi in ((self.a_min, self.a_hi), (self.b_min, self.b_hi)):
            if not 0 < lo < hi:
                raise ValueError(f"bad table grid range [{lo}, {hi}]")
        if not (self.per_decade >= 2 and self.spacing > 0):
            raise ValueError("grid density must be positive")

    @property
    def cutoff(self) -> CutoffSpec:
        return CutoffSpec(self.lam0)

    @property
    def a_hi(self) -> float:
        return 100.0 / self.lam0 if self.a_max is None else self.a_max

    @property
    def b_hi(self) -> float:
        return 100.0 / self.lam0 if self.b_max is None else self.b_max

    @property
    def spacing(self) -> float:
        return 0.125 / self.lam0 if self.step is None else self.step

    @property
    def inner_max(self) -> float:
        """Half-extent used by the grid-extension stability check."""
        return 0.5 * min(self.a_hi, self.b_hi)

    def a_grid(self):
        return table_grid(self.a_min, self.a_hi, self.per_decade, 2.0 / self.lam0, self.spacing)

    def b_grid(self):
        return table_grid(self.b_min, self.b_hi, self.per_decade, 2.0 / self.lam0, self.spacing)


def shared_lambda_rule(freq: float, cutoff: CutoffSpec, order: int = 24, density: int = 1):
    """Composite rule shared by all table entries up to frequency ``freq``."""
    breaks = lambda_breaks(freq, cutoff)
    if density > 1:
        sub = np.linspace(0.0, 1.0, density + 1)[:-1]
        breaks = np.concatenate([(breaks[:-1, None] + np.diff(breaks)[:, None] * sub).ravel(),
                                 breaks[-1:]])
    x, w = _panel_rule(breaks[:-1], breaks[1:], order)
    return x.ravel(), w.ravel()


def _table_values(cfg: TableConfig, a_grid, b_grid, chunk: int = 64):
    cutoff = cfg.cutoff
    lam, wq = shared_lambda_rule(a_grid[-1] + b_grid[-1], cutoff, cfg.gl_order, cfg.density)
    keep = wq * smooth_cutoff(lam, cutoff) != 0.0
    lam, wq = lam[keep], wq[keep]
    if cfg.kind == "right":
        wl = wq * _weight(lam, cfg.p, cfg.lp, cutoff)
        right = r0_diff_radial_derivative(lam[:, None], b_grid[None, :], cfg.j)
        left_fn = r0_plus
    else:
        wl = wq * _weight(lam, -1, 0, cutoff)
        right = r0_diff_radial_derivative(lam[:, None], b_grid[None, :], 0)
        left_fn = r0_plus_radial_derivative
    out = np.empty((a_grid.size, b_grid.size), dtype=complex)
    for s in range(0, a_grid.size, chunk):
        left = left_fn(lam[:, None], a_grid[None, s:s + chunk]) * wl[:, None]
        out[s:s + chunk] = left.T @ right
    return out


@dataclass
class OscTable:
    """Precomputed ``I(A, B)`` on a log-spaced grid with bicubic lookup."""

    config: TableConfig
    a_grid: np.ndarray
    b_grid: np.ndarray
    values: np.ndarray
    _splines: tuple = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("table contains non-finite values")
        la, lb = np.log(self.a_grid), np.log(self.b_grid)
        scaled = self.values / self._env(self.a_grid[:, None], self.b_grid[None, :])
        self._splines = (RectBivariateSpline(la, lb, scaled.real, kx=3, ky=3, s=0),
                         RectBivariateSpline(la, lb, scaled.imag, kx=3, ky=3, s=0))

    def _env(self, A, B):
        c = self.config
        return left_envelope(A, B) if c.kind == "left" else envelope(A, B, c.j, c.p, c.lp)

    def covers(self, A, B) -> np.ndarray:
        A, B = np.asarray(A), np.asarray(B)
        return ((A >= self.a_grid[0]) & (A <= self.a_grid[-1])
                & (B >= self.b_grid[0]) & (B <= self.b_grid[-1]))

    def direct(self, A: float, B: float) -> complex:
        c = self.config
        if c.kind == "left":
            return left_lambda_integral(A, B, c.cutoff)
        return lambda_integral(A, B, c.j, c.p, c.lp, c.cutoff)

    def lookup(self, A, B, fallback: bool = True):
        """Interpolated values; exact at nodes, direct evaluation off the grid."""
        A_arr = np.atleast_1d(np.asarray(A, dtype=float))
        B_arr = np.atleast_1d(np.asarray(B, dtype=float))
        A_arr, B_arr = np.broadcast_arrays(A_arr, B_arr)
        out = np.empty(A_arr.shape, dtype=complex)
        inside = self.covers(A_arr, B_arr)
        if np.any(inside):
            a, b = A_arr[inside], B_arr[inside]
            la, lb = np.log(a), np.log(b)
            sre, sim = self._splines
            val = (sre(la, lb, grid=False) + 1j * sim(la, lb, grid=False)) * self._env(a, b)
            ia = np.searchsorted(self.a_grid, a)
            ib = np.searchsorted(self.b_grid, b)
            ia_c = np.minimum(ia, self.a_grid.size - 1)
            ib_c = np.minimum(ib, self.b_grid.size - 1)
            hit = (self.a_grid[ia_c] == a) & (self.b_grid[ib_c] == b)
            val[hit] = self.values[ia_c[hit], ib_c[hit]]
            out[inside] = val
        if np.any(~inside):
            if not fallback:
                bad = np.flatnonzero(~inside.ravel())[0]
                raise TableRangeError(
                    f"(A, B) = ({A_arr.ravel()[bad]:.4g}, {B_arr.ravel()[bad]:.4g}) outside table "
                    f"[{self.a_grid[0]:.3g}, {self.a_grid[-1]:.3g}] x [{self.b_grid[0]:.3g}, {self.b_grid[-1]:.3g}]")
            idx = np.argwhere(~inside)
            for k in idx:
                k = tuple(k)
                out[k] = self.direct(float(A_arr[k]), float(B_arr[k]))
        if np.ndim(A) == 0 and np.ndim(B) == 0:
            return complex(out.ravel()[0])
        return out

    def save(self, path, extra: dict | None = None) -> None:
        """``.npz`` with the grids, values and a JSON metadata string."""
        meta = json.dumps({**asdict(self.config), **(extra or {})}, sort_keys=True)
        np.savez(Path(path), a_grid=self.a_grid, b_grid=self.b_grid, values=self.values,
                 meta=np.array(meta))

    @classmethod
    def load(cls, path) -> "OscTable":
        with np.load(Path(path)) as data:
            meta = json.loads(str(data["meta"]))
            fields = TableConfig.__dataclass_fields__
            cfg = TableConfig(**{k: v for k, v in meta.items() if k in fields})
            return cls(cfg, data["a_grid"], data["b_grid"], data["values"])


def build_table(config: TableConfig = TableConfig()) -> OscTable:
    a_grid, b_grid = config.a_grid(), config.b_grid()
    return OscTable(config, a_grid, b_grid, _table_values(config, a_grid, b_grid))


def refinement_change(table: OscTable) -> float:
    """Max relative change at interior nodes when the node density doubles."""
    cfg = table.config
    finer = TableConfig(**{**asdict(cfg), "density": 2 * cfg.density})
    ref = _table_values(finer, table.a_grid, table.b_grid)
    inner = (slice(1, -1), slice(1, -1))
    return float(np.max(np.abs(ref[inner] - table.values[inner]) / np.abs(ref[inner])))


# ---------------------------------------------------------------------------
# bound certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundCertificate:
    label: str
    sup: float
    sup_location: tuple
    sup_inner: float
    extension_ratio: float

    @property
    def stable(self) -> bool:
        return bool(np.isfinite(self.sup) and self.extension_ratio < 2.0)


def certify(table: OscTable, inner_max: float | None = None, label: str | None = None,
            mask=None) -> BoundCertificate:
    """Sup of ``|I| / envelope`` over the grid and over ``A, B <= inner_max``."""
    inner_max = table.config.inner_max if inner_max is None else inner_max
    A, B = np.meshgrid(table.a_grid, table.b_grid, indexing="ij")
    ratio = np.abs(table.values) / table._env(A, B)
    sel = np.ones_like(ratio, dtype=bool) if mask is None else mask(A, B)
    inner = sel & (A <= inner_max) & (B <= inner_max)
    full = np.where(sel, ratio, -np.inf)
    k = np.unravel_index(np.argmax(full), full.shape)
    sup = float(full[k])
    sup_inner = float(np.max(np.where(inner, ratio, -np.inf)))
    c = table.config
    label = label or ("left" if c.kind == "left" else f"j={c.j},p={c.p},lp={c.lp}")
    return BoundCertificate(label, sup, (float(A[k]), float(B[k])), sup_inner, sup / sup_inner)


def certify_left_regimes(table: OscTable, inner_max: float | None = None) -> dict:
    """Separate certificates for the three regimes of the left-derivative bound."""
    if table.config.kind != "left":
        raise ValueError("left-regime certification needs a 'left' table")
    masks = {
        "A>2B": lambda A, B: A > 2 * B,
        "B>2A": lambda A, B: B > 2 * A,
        "A~B": lambda A, B: (A <= 2 * B) & (B <= 2 * A),
    }
    return {name: certify(table, inner_max, label=f"left {name}", mask=m) for name, m in masks.items()}


# ---------------------------------------------------------------------------
# integration-by-parts probe
# ---------------------------------------------------------------------------

# The endpoint term ~ rho^-(beta+1) dominates only once rho * lam0 / 2 >> 1;
# below that the Fourier tail of the cutoff transition swamps it.
IBP_PROBE_CUTOFF = CutoffSpec(8.0)
IBP_RHO = np.geomspace(10.0, 1000.0, 21)


def ibp_probe(rho: float, beta: float, M: int = 4, cutoff: CutoffSpec = IBP_PROBE_CUTOFF) -> float:
    """``|int_0^inf e^{i rho lam} lam^beta Phi(lam) dlam|``.

    ``M`` is the number of derivatives the symbol bound is assumed for; it
    only enters through the admissibility check ``M > beta + 1``.
    """
    if not beta > -1:
        raise ValueError("beta must exceed -1")
    if not (isinstance(M, (int, np.integer)) and beta + 1 < M <= 4):
        raise ValueError(f"need beta + 1 < M <= 4, got M={M}")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    breaks = lambda_breaks(rho, cutoff, grading=40)
    f = lambda lam: np.exp(1j * rho * lam) * lam ** beta * smooth_cutoff(lam, cutoff)  # noqa: E731
    scale = cutoff.lam0 ** (beta + 1) / (beta + 1)
    return float(abs(_adaptive(f, breaks, 1e-10 * scale * _jap(rho) ** (-beta - 1))))


def ibp_slope(beta: float, rhos=IBP_RHO, cutoff: CutoffSpec = IBP_PROBE_CUTOFF) -> float:
    """Fitted log-log decay slope of :func:`ibp_probe` over ``rhos``."""
    return fit_loglog_slope(rhos, [ibp_probe(r, beta, cutoff=cutoff) for r in rhos])


def fit_loglog_slope(x, y) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)
    return float(slope)
