"""
Leading low-energy wave-operator kernels.

For an eigenspace spanned by a full degree-``ell`` multiplet
``psi_m(x) = u(|x|) Y_m(x_hat)`` the singular term has kernel::

    K(x, y) = 1/(pi i) int dlam Phi(lam)/lam
              sum_m [R0+(lam^2) V psi_m](x) [(R0+ - R0-)(lam^2) V psi_m](y)

Two independent assembly routes are provided.

Partial waves (production). Both free kernels are diagonal in spherical
harmonics. With ``nu = ell + 1``, ``f = V u`` and ``H = J + iY``::

    R0+(lam^2)(x, z) -> (i pi / 2) J_nu(lam r<) H_nu(lam r>) / (r r')
    (R0+ - R0-)     -> i pi J_nu(lam r) J_nu(lam r') / (r r')

so ``K = 1/(pi i) * (ell+1) U_ell(cos theta) / (2 pi^2) * M(|x|, |y|)`` with
``M`` a one-dimensional lambda integral of products of radial transforms.
Evaluating a whole ``(|x|, |y|)`` grid is a single matrix product.

Spatial quadrature (oracle). The defining eight-dimensional integral with the
lambda integral taken from an :class:`~waveop4d.osc_integrals.OscTable`,
radial Gauss-Legendre times an S^3 rule in each of ``z`` and ``w``.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .harmonics import addition_factor, multiplet_basis, multiplet_size
from .osc_integrals import TableRangeError, lambda_breaks
from .resolvent import r0_diff, r0_diff_radial_derivative
from .specfun import (
    CutoffSpec,
    QuadratureRule,
    _gl_reference,
    bessel_jn,
    bessel_jy,
    composite_gauss_legendre,
    gauss_legendre,
    graded_breaks,
    smooth_cutoff,
    sphere3_rule,
)
from .zero_energy import SectorState

REGIMES = ("X-LARGE", "RING", "Y-LARGE")
PREFACTOR = 1.0 / (np.pi * 1j)


def regime_of(rx, ry):
    """Regime tag: ``|x| > 2|y|``, ``|y| > 2|x|`` or the ring in between."""
    rx = np.asarray(rx, dtype=float)
    ry = np.asarray(ry, dtype=float)
    return np.where(rx > 2 * ry, "X-LARGE", np.where(ry > 2 * rx, "Y-LARGE", "RING"))


def canonical_points(rx, ry, theta):
    """``x = rx e1`` and ``y = ry (cos theta e1 + sin theta e2)``."""
    x = np.array([rx, 0.0, 0.0, 0.0])
    y = np.array([ry * np.cos(theta), ry * np.sin(theta), 0.0, 0.0])
    return x, y


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelGridSpec:
    r_min: float = 0.5
    r_max: float = 40.0
    n_r: int = 40
    n_theta: int = 7

    def __post_init__(self):
        if not (0 < self.r_min < self.r_max and self.n_r >= 2 and self.n_theta >= 1):
            raise ValueError(f"bad kernel grid spec {self}")

    @classmethod
    def for_cutoff(cls, lam0: float, rho_min: float = 0.25, rho_max: float = 1000.0,
                   n_r: int = 73, n_theta: int = 7) -> "KernelGridSpec":
        """Radii fixed in units of ``1 / lam0``.

        The kernel only settles onto its power laws once ``lam0 * r`` is a few
        hundred, because the cutoff transition leaves an oscillating tail.
        """
        return cls(rho_min / lam0, rho_max / lam0, n_r, n_theta)

    def radii(self) -> np.ndarray:
        return np.geomspace(self.r_min, self.r_max, self.n_r)

    def thetas(self) -> np.ndarray:
        if self.n_theta == 1:
            return np.array([0.0])
        return np.linspace(0.0, np.pi, self.n_theta)


@dataclass
class KernelGrid:
    """Kernel samples on ``(rx, ry, theta)``; flat arrays of equal length."""

    scenario: str
    rx: np.ndarray
    ry: np.ndarray
    theta: np.ndarray
    values: np.ndarray
    regime: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.regime is None:
            self.regime = regime_of(self.rx, self.ry)
        if np.any(self.rx <= 0) or np.any(self.ry <= 0):
            raise ValueError("kernel samples must have rx > 0 and ry > 0")

    def __len__(self) -> int:
        return self.values.size

    def select(self, regime: str) -> "KernelGrid":
        keep = self.regime == regime
        return KernelGrid(self.scenario, self.rx[keep], self.ry[keep], self.theta[keep],
                          self.values[keep], self.regime[keep], dict(self.meta))

    def to_csv(self, path, comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["rx", "ry", "theta", "re_K", "im_K", "regime"])
            for row in zip(self.rx, self.ry, self.theta, self.values.real, self.values.imag, self.regime):
                w.writerow([repr(float(v)) for v in row[:5]] + [row[5]])

    @classmethod
    def from_csv(cls, path, scenario: str = "") -> "KernelGrid":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))
        col = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
        return cls(scenario, col("rx"), col("ry"), col("theta"), col("re_K") + 1j * col("im_K"),
                   np.array([r["regime"] for r in rows]))


# ---------------------------------------------------------------------------
# partial-wave route
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartialWaveConfig:
    r_v: float = 12.0
    radial_panel: float = 0.5
    radial_order: int = 16
    lam0: float = 0.5
    gl_order: int = 24
    density: int = 1

    @property
    def cutoff(self) -> CutoffSpec:
        return CutoffSpec(self.lam0)

    def refined(self) -> "PartialWaveConfig":
        """Double the lambda density and the radial density."""
        return PartialWaveConfig(self.r_v, self.radial_panel / 2, self.radial_order, self.lam0,
                                 self.gl_order, 2 * self.density)


def _radial_rule(a: float, b: float, cfg: PartialWaveConfig) -> QuadratureRule:
    n = max(1, int(np.ceil((b - a) / cfg.radial_panel)))
    return composite_gauss_legendre(np.linspace(a, b, n + 1), cfg.radial_order)


def _source(state: SectorState, r):
    return state.vpsi_radial(r) * r * r


def _subdivide(breaks: np.ndarray, density: int) -> np.ndarray:
    if density <= 1:
        return breaks
    sub = np.linspace(0.0, 1.0, density + 1)[:-1]
    return np.concatenate([(breaks[:-1, None] + np.diff(breaks)[:, None] * sub).ravel(), breaks[-1:]])


@lru_cache(maxsize=None)
def _panel_interpolation(order: int, n_sub: int) -> np.ndarray:
    """Matrix taking values at ``order`` Gauss nodes on [-1, 1] to the Gauss
    nodes of ``n_sub`` equal sub-panels (Legendre series, well conditioned)."""
    x, _ = _gl_reference(order)
    edges = np.linspace(-1.0, 1.0, n_sub + 1)
    t = (0.5 * (edges[:-1, None] + edges[1:, None]) + 0.5 * np.diff(edges)[:, None] * x).ravel()
    vc = np.polynomial.legendre.legvander(x, order - 1)
    vf = np.polynomial.legendre.legvander(t, order - 1)
    return vf @ np.linalg.inv(vc)


@dataclass(frozen=True)
class TwoLevelRule:
    """Coarse lambda rule resolving the radial transforms, fine rule resolving
    the oscillation at the sample radii, and the panel-wise interpolation."""

    coarse: np.ndarray
    fine: np.ndarray
    weights: np.ndarray
    blocks: tuple

    def to_fine(self, values: np.ndarray) -> np.ndarray:
        """Interpolate ``(n_coarse, ...)`` values onto the fine nodes."""
        out = []
        for c_sl, mat in self.blocks:
            out.append(np.tensordot(mat, values[c_sl], axes=(1, 0)))
        return np.concatenate(out, axis=0)


def lambda_rule(r_max_x: float, r_max_y: float, cfg: PartialWaveConfig) -> TwoLevelRule:
    cutoff = cfg.cutoff
    order = cfg.gl_order
    coarse_breaks = _subdivide(lambda_breaks(2.0 * cfg.r_v + 1.0, cutoff), cfg.density)
    h_fine = np.pi / (r_max_x + r_max_y + 2.0 * cfg.r_v + 1.0) / cfg.density
    xg, wg = _gl_reference(order)
    coarse, fine, weights, blocks = [], [], [], []
    for k, (a, b) in enumerate(zip(coarse_breaks[:-1], coarse_breaks[1:])):
        half = 0.5 * (b - a)
        coarse.append(0.5 * (a + b) + half * xg)
        n_sub = max(1, int(np.ceil((b - a) / h_fine)))
        edges = np.linspace(a, b, n_sub + 1)
        sh = 0.5 * np.diff(edges)
        fine.append((0.5 * (edges[:-1, None] + edges[1:, None]) + sh[:, None] * xg).ravel())
        weights.append((sh[:, None] * wg).ravel())
        blocks.append((slice(k * order, (k + 1) * order), _panel_interpolation(order, n_sub)))
    return TwoLevelRule(np.concatenate(coarse), np.concatenate(fine), np.concatenate(weights),
                        tuple(blocks))


def source_transform(state: SectorState, lam: np.ndarray, cfg: PartialWaveConfig) -> np.ndarray:
    """``T(lam) = int_0^R_V J_nu(lam r) f(r) r^2 dr``."""
    nu = state.ell + 1
    rule = _radial_rule(0.0, cfg.r_v, cfg)
    jr = bessel_jn(nu, lam[:, None] * rule.nodes[None, :])
    return jr @ (rule.weights * _source(state, rule.nodes))


def _near_factor(state, lam, r, cfg):
    """``H(lam r) * inner + J(lam r) * outer`` for ``r < R_V`` (no prefactor)."""
    nu = state.ell + 1
    jx, yx = bessel_jy(nu, lam * r)
    rule_in = _radial_rule(0.0, r, cfg)
    inner = bessel_jn(nu, lam[:, None] * rule_in.nodes) @ (rule_in.weights * _source(state, rule_in.nodes))
    rule_out = _radial_rule(r, cfg.r_v, cfg)
    jo, yo = bessel_jy(nu, lam[:, None] * rule_out.nodes)
    outer = (jo + 1j * yo) @ (rule_out.weights * _source(state, rule_out.nodes))
    return (jx + 1j * yx) * inner + jx * outer


def outgoing_factor(state: SectorState, lam: np.ndarray, rx: np.ndarray,
                    cfg: PartialWaveConfig, transform: np.ndarray | None = None) -> np.ndarray:
    """Radial part of ``R0+(lam^2) V psi`` at ``|x| = rx``; shape ``(lam, rx)``.

    Outside the truncation radius only ``H_nu(lam rx) T(lam)`` survives.
    """
    nu = state.ell + 1
    rx = np.atleast_1d(np.asarray(rx, dtype=float))
    if transform is None:
        transform = source_transform(state, lam, cfg)
    out = np.empty((lam.size, rx.size), dtype=complex)
    for k, r in enumerate(rx):
        if r < cfg.r_v:
            val = _near_factor(state, lam, r, cfg)
        else:
            jx, yx = bessel_jy(nu, lam * r)
            val = (jx + 1j * yx) * transform
        out[:, k] = 0.5j * np.pi * val / r
    return out


def difference_factor(state: SectorState, lam: np.ndarray, ry: np.ndarray, transform: np.ndarray,
                      cfg: PartialWaveConfig) -> np.ndarray:
    """Radial part of ``(R0+ - R0-)(lam^2) V psi`` at ``|y| = ry``."""
    nu = state.ell + 1
    ry = np.atleast_1d(np.asarray(ry, dtype=float))
    return 1j * np.pi * bessel_jn(nu, lam[:, None] * ry[None, :]) / ry[None, :] * transform[:, None]


def _spectral_weight(lam, kind, cutoff):
    phi = smooth_cutoff(lam, cutoff)
    if kind == "ws":
        return phi / lam
    if kind == "log":
        return phi * lam * np.log(lam)
    raise ValueError(f"unknown spectral weight {kind!r}")


def radial_kernel_matrix(state: SectorState, rx, ry, cfg: PartialWaveConfig = PartialWaveConfig(),
                         kind: str = "ws", threads: int = 1, chunk: int = 8) -> np.ndarray:
    """``M[i, k] = int a(lam, rx_i) b(lam, ry_k) w(lam) dlam`` for ``w`` in
    ``{Phi/lam, Phi lam log lam}``.

    The radial transforms are computed on the coarse lambda rule and
    interpolated; the Bessel factors at the sample radii are evaluated on the
    fine rule. Work is split over fixed chunks of ``rx`` so the result does
    not depend on ``threads``.
    """
    if state.resonance_class:
        raise ValueError("resonance-class state (ell = 0) is excluded from kernel assembly")
    rx = np.atleast_1d(np.asarray(rx, dtype=float))
    ry = np.atleast_1d(np.asarray(ry, dtype=float))
    if np.any(rx <= 0) or np.any(ry <= 0):
        raise ValueError("kernel radii must be positive")
    nu = state.ell + 1
    rule = lambda_rule(rx.max(), ry.max(), cfg)
    lam = rule.fine
    wl = rule.weights * _spectral_weight(lam, kind, cfg.cutoff)
    transform = rule.to_fine(source_transform(state, rule.coarse, cfg))
    right = difference_factor(state, lam, ry, transform, cfg)
    pieces = [rx[s:s + chunk] for s in range(0, rx.size, chunk)]

    def work(part):
        left = np.empty((lam.size, part.size), dtype=complex)
        for k, r in enumerate(part):
            if r < cfg.r_v:
                val = rule.to_fine(_near_factor(state, rule.coarse, r, cfg))
            else:
                jx, yx = bessel_jy(nu, lam * r)
                val = (jx + 1j * yx) * transform
            left[:, k] = 0.5j * np.pi * val / r
        return (left * wl[:, None]).T @ right

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(work, pieces))
    else:
        blocks = [work(p) for p in pieces]
    return np.vstack(blocks)


def ws_kernel(state: SectorState, rx: float, ry: float, theta: float,
              cfg: PartialWaveConfig = PartialWaveConfig()) -> complex:
    """Single ``W_s`` kernel value by partial waves."""
    m = radial_kernel_matrix(state, [rx], [ry], cfg)[0, 0]
    return complex(PREFACTOR * addition_factor(state.ell, np.cos(theta)) * m)


def assemble_ws_grid(state: SectorState, spec: KernelGridSpec = KernelGridSpec(),
                     cfg: PartialWaveConfig = PartialWaveConfig(), threads: int = 1,
                     scenario: str = "") -> KernelGrid:
    """``W_s`` kernel on the product grid ``radii x radii x thetas``."""
    r = spec.radii()
    th = spec.thetas()
    m = radial_kernel_matrix(state, r, r, cfg, "ws", threads)
    g = addition_factor(state.ell, np.cos(th))
    vals = PREFACTOR * m[:, :, None] * g[None, None, :]
    RX, RY, TH = np.meshgrid(r, r, th, indexing="ij")
    meta = {"route": "partial-wave", "ell": state.ell, "coupling": state.coupling,
            "grid": asdict(spec), "quadrature": asdict(cfg)}
    return KernelGrid(scenario, RX.ravel(), RY.ravel(), TH.ravel(), vals.ravel(), meta=meta)


def coefficient_form(ell: int, coefficients, x_dir, y_dir) -> np.ndarray:
    """``sum_jk a_jk Y_j(x_hat) Y_k(y_hat)`` over a real orthonormal multiplet basis."""
    a = np.asarray(coefficients, dtype=float)
    d = multiplet_size(ell)
    if a.shape != (d, d):
        raise ValueError(f"coefficient matrix must be {d}x{d} for ell={ell}, got {a.shape}")
    yx = multiplet_basis(ell, x_dir)
    yy = multiplet_basis(ell, y_dir)
    return np.einsum("nj,jk,nk->n", yx, a, yy)


def assemble_wlog_grid(state: SectorState, coefficients=None,
                       spec: KernelGridSpec = KernelGridSpec(n_r=20, n_theta=5),
                       cfg: PartialWaveConfig = PartialWaveConfig(), threads: int = 1,
                       scenario: str = "") -> KernelGrid:
    """``W_log`` kernel in the canonical frame; ``coefficients`` defaults to identity."""
    d = multiplet_size(state.ell)
    a = np.eye(d) if coefficients is None else np.asarray(coefficients, dtype=float)
    r = spec.radii()
    th = spec.thetas()
    m = radial_kernel_matrix(state, r, r, cfg, "log", threads)
    xd = np.tile([1.0, 0.0, 0.0, 0.0], (th.size, 1))
    yd = np.column_stack([np.cos(th), np.sin(th), np.zeros_like(th), np.zeros_like(th)])
    g = coefficient_form(state.ell, a, xd, yd)
    vals = PREFACTOR * m[:, :, None] * g[None, None, :]
    RX, RY, TH = np.meshgrid(r, r, th, indexing="ij")
    meta = {"route": "partial-wave", "ell": state.ell, "kernel": "log",
            "coefficients": a.tolist(), "grid": asdict(spec), "quadrature": asdict(cfg)}
    return KernelGrid(scenario, RX.ravel(), RY.ravel(), TH.ravel(), vals.ravel(), meta=meta)


# ---------------------------------------------------------------------------
# spatial-quadrature route (oracle)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpatialQuadrature:
    """Radial Gauss-Legendre (graded toward 0) times an S^3 rule, per variable."""

    n_radial: int = 48
    r_min: float = 1e-3
    r_v: float = 12.0
    sphere_degree: int = 8
    min_distance: float = 1e-3

    def nodes(self):
        levels = max(1, self.n_radial // 16 - 1)
        breaks = graded_breaks(self.r_min, self.r_v, 0.5, levels)
        per = max(2, self.n_radial // (breaks.size - 1))
        radial = composite_gauss_legendre(breaks, per)
        sph = sphere3_rule(self.sphere_degree)
        # fixed rotation keeps nodes off the coordinate axes used by canonical points
        q, _ = np.linalg.qr(np.array([[1.0, 0.3, 0.2, 0.1], [0.1, 1.0, 0.3, 0.2],
                                      [0.2, 0.1, 1.0, 0.3], [0.3, 0.2, 0.1, 1.0]]))
        dirs = sph.nodes @ q.T
        pts = (radial.nodes[:, None, None] * dirs[None, :, :]).reshape(-1, 4)
        w = (radial.weights[:, None] * radial.nodes[:, None] ** 3 * sph.weights[None, :]).ravel()
        r = np.repeat(radial.nodes, len(sph))
        return pts, r, w


class SeparableStub:
    """Stand-in lambda integral ``I(A, B) = fa(A) * fb(B)`` for assembly tests."""

    def __init__(self, fa, fb):
        self.fa, self.fb = fa, fb

    def lookup_grid(self, A, B):
        return np.outer(self.fa(A), self.fb(B))


def _lookup_grid(table, A, B):
    if hasattr(table, "lookup_grid"):
        return table.lookup_grid(A, B)
    inside = table.covers(A.min(), B.min()) and table.covers(A.max(), B.max())
    if not inside:
        raise TableRangeError(
            f"spatial assembly needs A in [{A.min():.3g}, {A.max():.3g}], B in [{B.min():.3g}, {B.max():.3g}]; "
            f"table covers [{table.a_grid[0]:.3g}, {table.a_grid[-1]:.3g}] x [{table.b_grid[0]:.3g}, {table.b_grid[-1]:.3g}]")
    oa = np.argsort(A, kind="stable")
    ob = np.argsort(B, kind="stable")
    la, lb = np.log(A[oa]), np.log(B[ob])
    sre, sim = table._splines
    scaled = sre(la, lb, grid=True) + 1j * sim(la, lb, grid=True)
    vals = np.empty_like(scaled)
    vals[np.ix_(oa, ob)] = scaled
    return vals * table._env(A[:, None], B[None, :])


def _spatial_assembly(state, table, x, y, angular, quad: SpatialQuadrature, chunk: int = 256):
    pts, r, w = quad.nodes()
    keep = r <= quad.r_v
    pts, r, w = pts[keep], r[keep], w[keep]
    fw = w * state.vpsi_radial(r)
    dirs = pts / r[:, None]
    A = np.maximum(np.linalg.norm(x[None, :] - pts, axis=1), quad.min_distance)
    B = np.maximum(np.linalg.norm(y[None, :] - pts, axis=1), quad.min_distance)
    total = 0.0 + 0.0j
    for s in range(0, r.size, chunk):
        sl = slice(s, s + chunk)
        lam_int = _lookup_grid(table, A[sl], B)
        total += fw[sl] @ ((lam_int * angular(dirs[sl], dirs)) @ fw)
    return PREFACTOR * total


def assemble_ws_kernel_points(state: SectorState, table, x, y,
                              quad: SpatialQuadrature = SpatialQuadrature()) -> complex:
    """``W_s`` kernel at points ``x, y`` in R^4 by eight-dimensional quadrature."""
    if state.resonance_class:
        raise ValueError("resonance-class state (ell = 0) is excluded from kernel assembly")
    ell = state.ell
    ang = lambda zd, wd: addition_factor(ell, np.clip(zd @ wd.T, -1.0, 1.0))  # noqa: E731
    return complex(_spatial_assembly(state, table, np.asarray(x, float), np.asarray(y, float), ang, quad))


def assemble_ws_kernel(state: SectorState, table, rx: float, ry: float, theta: float,
                       quad: SpatialQuadrature = SpatialQuadrature()) -> complex:
    """``W_s`` kernel at ``(|x|, |y|, angle)`` by eight-dimensional quadrature."""
    x, y = canonical_points(rx, ry, theta)
    return assemble_ws_kernel_points(state, table, x, y, quad)


def assemble_wlog_kernel(state: SectorState, coefficients, table_log, rx: float, ry: float,
                         theta: float, quad: SpatialQuadrature = SpatialQuadrature()) -> complex:
    """``W_log`` kernel by eight-dimensional quadrature with coefficient matrix ``a_jk``."""
    if state.resonance_class:
        raise ValueError("resonance-class state (ell = 0) is excluded from kernel assembly")
    a = np.asarray(coefficients, dtype=float)
    d = multiplet_size(state.ell)
    if a.shape != (d, d):
        raise ValueError(f"coefficient matrix must be {d}x{d}, got {a.shape}")
    if hasattr(table_log, "config") and (table_log.config.j, table_log.config.p, table_log.config.lp) != (0, 1, 1):
        raise ValueError("W_log assembly needs a table built with (j, p, lp) = (0, 1, 1)")
    ell = state.ell
    ang = lambda zd, wd: multiplet_basis(ell, zd) @ a @ multiplet_basis(ell, wd).T  # noqa: E731
    x, y = canonical_points(rx, ry, theta)
    return complex(_spatial_assembly(state, table_log, x, y, ang, quad))


# ---------------------------------------------------------------------------
# Taylor cancellation identities
# ---------------------------------------------------------------------------

def _s_rule(n: int = 64):
    return gauss_legendre(n, 0.0, 1.0)


def _check_admissible(y, w):
    if not np.linalg.norm(w) < 0.5 * np.linalg.norm(y):
        raise ValueError("Taylor identities need |w| < |y|/2")


def taylor_identity_check(lam: float, y, w, n: int = 64) -> float:
    """``|F(|y-w|) - F(|y|) - int_0^1 d_r F(|y-sw|) (-w).(y-sw)/|y-sw| ds|``
    with ``F = R0+ - R0-``."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_admissible(y, w)
    lhs = r0_diff(lam, np.linalg.norm(y - w)) - r0_diff(lam, np.linalg.norm(y))
    if not np.any(w):
        return float(abs(lhs))
    rule = _s_rule(n)
    p = y[None, :] - rule.nodes[:, None] * w[None, :]
    rp = np.linalg.norm(p, axis=1)
    integrand = r0_diff_radial_derivative(lam, rp, 1) * (-(p @ w)) / rp
    return float(abs(lhs - rule.integrate(integrand)))


def gamma_factors(s, w, y):
    """``(Gamma_1, Gamma_2)`` of the second-order expansion at ``y - s w``."""
    w = np.asarray(w, dtype=float)
    p = np.asarray(y, dtype=float) - np.multiply.outer(np.asarray(s, dtype=float), w)
    rp = np.linalg.norm(p, axis=-1)
    dot = p @ w
    g1 = (w @ w) / rp - dot ** 2 / rp ** 3
    g2 = dot ** 2 / rp ** 2
    return g1, g2


def second_order_identity_check(lam: float, y, w, n: int = 64) -> float:
    """Residual of the second-order Taylor identity with the Gamma factors."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_admissible(y, w)
    ry = np.linalg.norm(y)
    lhs = (r0_diff(lam, np.linalg.norm(y - w)) - r0_diff(lam, ry)
           + r0_diff_radial_derivative(lam, ry, 1) * (w @ y) / ry)
    if not np.any(w):
        return float(abs(lhs))
    rule = _s_rule(n)
    s = rule.nodes
    rp = np.linalg.norm(y[None, :] - s[:, None] * w[None, :], axis=1)
    g1, g2 = gamma_factors(s, w, y)
    integrand = (1 - s) * (r0_diff_radial_derivative(lam, rp, 2) * g2
                           + r0_diff_radial_derivative(lam, rp, 1) * g1)
    return float(abs(lhs - rule.integrate(integrand)))


def random_admissible(rng: np.random.Generator, lam_max: float = 0.5):
    """Random ``(lam, y, w)`` with ``|w| < |y|/2``."""
    lam = rng.uniform(0.01, lam_max)
    y = rng.normal(size=4)
    y *= rng.uniform(0.5, 30.0) / np.linalg.norm(y)
    w = rng.normal(size=4)
    w *= rng.uniform(0.0, 0.499) * np.linalg.norm(y) / np.linalg.norm(w)
    return lam, y, w
