"""
Zero-energy eigenstates of -Delta + V in a single angular sector.

For ``psi(x) = u(|x|) Y(x_hat)`` with ``Y`` of degree ``ell`` on S^3, the
equation ``Delta psi = V psi`` becomes::

    u'' + (3/r) u' - ell(ell+2)/r^2 u = c * profile(r) * u

Outside the potential the solutions are ``r^ell`` and ``r^-(2+ell)``; the
decaying one is square integrable in R^4 only for ``ell >= 1`` (``ell = 0``
is the resonance case). The coupling ``c`` is tuned by shooting from both
ends and bisecting on the log-derivative mismatch at ``r_match``.

The ODE is integrated in ``t = log r``::

    u_tt + 2 u_t - ell(ell+2) u = exp(2t) c profile(e^t) u

which removes the coordinate singularity at the origin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .harmonics import representative_harmonic
from .potential import RadialPotential
from .specfun import composite_gauss_legendre, sphere3_rule


class ShootingError(RuntimeError):
    """Radial integration failed (blow-up or solver failure)."""


class BracketError(ValueError):
    """Mismatch does not change sign over the requested bracket."""


@dataclass(frozen=True)
class ShootingConfig:
    r0: float = 1e-4
    r_match: float = 8.0
    r_max: float = 60.0
    rtol: float = 1e-12
    atol: float = 1e-300
    max_ell: int = 3


DEFAULT_SHOOTING = ShootingConfig()


def _rhs(p: RadialPotential, ell: int, c: float):
    lam = ell * (ell + 2)

    def f(t, y):
        r = np.exp(t)
        u, du = y[0], y[1]
        return [du, -2.0 * du + lam * u + r * r * c * float(p.profile(r)) * u, u * u * r ** 4]

    return f


def _outward_start(p: RadialPotential, ell: int, c: float, r0: float):
    a = c * float(p.profile(0.0)) / (4.0 * (ell + 2))
    u = r0 ** ell * (1.0 + a * r0 * r0)
    du_dt = r0 ** ell * (ell + (ell + 2) * a * r0 * r0)
    return [u, du_dt, 0.0]


def _inward_start(ell: int, r_max: float):
    u = r_max ** (-(2 + ell))
    return [u, -(2 + ell) * u, 0.0]


def _integrate(p, ell, c, t0, t1, y0, cfg, t_eval=None, max_step=np.inf):
    sol = solve_ivp(_rhs(p, ell, c), (t0, t1), y0, method="DOP853", rtol=cfg.rtol,
                    atol=cfg.atol, t_eval=t_eval, first_step=1e-3, max_step=max_step)
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        bad = sol.t[-1] if sol.t.size else t0
        raise ShootingError(f"radial integration failed near r = {np.exp(bad):.6g}: {sol.message}")
    return sol


def _check_ell(ell: int, cfg: ShootingConfig):
    if not (isinstance(ell, (int, np.integer)) and 0 <= ell <= cfg.max_ell):
        raise ValueError(f"sector ell must be an integer in 0..{cfg.max_ell}, got {ell!r}")


def _shoot(p, ell, c, cfg):
    _check_ell(ell, cfg)
    tm = np.log(cfg.r_match)
    out = _integrate(p, ell, c, np.log(cfg.r0), tm, _outward_start(p, ell, c, cfg.r0), cfg)
    inn = _integrate(p, ell, c, np.log(cfg.r_max), tm, _inward_start(ell, cfg.r_max), cfg)
    return out.y[:2, -1], inn.y[:2, -1]


def _mismatch(vo, vi, r_match):
    if vo[0] == 0.0 or vi[0] == 0.0:
        raise ShootingError(f"node of the shooting solution at r_match = {r_match}")
    return float((vo[1] / vo[0] - vi[1] / vi[0]) / r_match)


def _angle(vo, vi):
    a = vo / np.hypot(*vo)
    b = vi / np.hypot(*vi)
    return float(a[0] * b[1] - a[1] * b[0])


def radial_zero_solve(p: RadialPotential, ell: int, c: float,
                      cfg: ShootingConfig = DEFAULT_SHOOTING) -> float:
    """Log-derivative mismatch ``u_out'/u_out - u_in'/u_in`` at ``r_match``."""
    return _mismatch(*_shoot(p, ell, c, cfg), cfg.r_match)


def matching_angle(p: RadialPotential, ell: int, c: float,
                   cfg: ShootingConfig = DEFAULT_SHOOTING) -> float:
    """Sine of the angle between ``(u, r u')`` of the two shooting solutions.

    Vanishes exactly where the log-derivative mismatch does but, unlike it,
    has no poles (at a node of ``u_out``), so it is the function that gets
    bracketed and bisected.
    """
    return _angle(*_shoot(p, ell, c, cfg))


@dataclass(frozen=True)
class TunedCoupling:
    coupling: float
    mismatch: float
    resonance_class: bool
    iterations: int


def find_bracket(p: RadialPotential, ell: int, c_stop: float = -200.0, step: float = 1.0,
                 cfg: ShootingConfig = DEFAULT_SHOOTING) -> tuple[float, float]:
    """First coupling interval, scanning from 0 toward ``c_stop``, over which
    the matching angle changes sign."""
    direction = np.sign(c_stop)
    prev_c, prev_a = 0.0, matching_angle(p, ell, 0.0, cfg)
    n = int(np.ceil(abs(c_stop) / step))
    for k in range(1, n + 1):
        c = direction * k * step
        a = matching_angle(p, ell, c, cfg)
        if np.sign(a) != np.sign(prev_a):
            return (c, prev_c) if c < prev_c else (prev_c, c)
        prev_c, prev_a = c, a
    raise BracketError(f"no zero-energy crossing for ell={ell} with coupling in [0, {c_stop}]")


def tune_coupling(p: RadialPotential, ell: int, bracket: tuple[float, float],
                  tol: float = 1e-10, cfg: ShootingConfig = DEFAULT_SHOOTING) -> TunedCoupling:
    """Bisection for the coupling with ``|mismatch| < tol``.

    The sign test uses :func:`matching_angle`; the stopping test uses the
    log-derivative mismatch itself.
    """
    _check_ell(ell, cfg)
    lo, hi = float(min(bracket)), float(max(bracket))
    a_lo = matching_angle(p, ell, lo, cfg)
    a_hi = matching_angle(p, ell, hi, cfg)
    if np.sign(a_lo) == np.sign(a_hi):
        raise BracketError(f"no sign change of the matching condition on [{lo}, {hi}]")
    mid, m_mid, it = lo, np.inf, 0
    for it in range(1, 200):
        mid = 0.5 * (lo + hi)
        vo, vi = _shoot(p, ell, mid, cfg)
        a_mid, m_mid = _angle(vo, vi), _mismatch(vo, vi, cfg.r_match)
        if abs(m_mid) < tol or hi - lo < 4e-16 * max(1.0, abs(mid)):
            break
        if np.sign(a_mid) == np.sign(a_lo):
            lo, a_lo = mid, a_mid
        else:
            hi = mid
    if not abs(m_mid) < tol:
        raise ShootingError(f"bisection stalled at c = {mid!r} with mismatch {m_mid:.3e}")
    return TunedCoupling(mid, m_mid, ell == 0, it)


def default_r_grid(cfg: ShootingConfig = DEFAULT_SHOOTING, h: float = 0.01,
                   r_uniform: float = 0.05) -> np.ndarray:
    inner = np.geomspace(cfg.r0, r_uniform, 120, endpoint=False)
    n = int(round((cfg.r_max - r_uniform) / h))
    outer = np.linspace(r_uniform, cfg.r_max, n + 1)
    return np.concatenate([inner, outer])


@dataclass
class SectorState:
    """Normalized zero-energy eigenfunction ``u(|x|) Y_ell(x_hat)``."""

    ell: int
    potential: RadialPotential
    coupling: float
    r_grid: np.ndarray
    u: np.ndarray
    du: np.ndarray
    l2_norm: float
    m0: float
    m1: np.ndarray
    mismatch: float
    resonance_class: bool
    config: ShootingConfig = field(default=DEFAULT_SHOOTING)

    def __post_init__(self):
        self._spline = CubicSpline(self.r_grid, self.u)
        self._tail_amp = self.u[-1] * self.r_grid[-1] ** (2 + self.ell)
        self._head_amp = self.u[0] / self.r_grid[0] ** self.ell

    def u_at(self, r):
        """Radial profile at arbitrary radii (exact power laws off the grid)."""
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        lo = r < self.r_grid[0]
        hi = r > self.r_grid[-1]
        mid = ~(lo | hi)
        out[mid] = self._spline(r[mid])
        out[lo] = self._head_amp * r[lo] ** self.ell
        out[hi] = self._tail_amp * r[hi] ** (-(2.0 + self.ell))
        return out

    def vpsi_radial(self, r):
        """``V(r) u(r)``: the radial factor of ``V psi``."""
        return self.coupling * self.potential.profile(r) * self.u_at(r)

    def psi(self, points) -> np.ndarray:
        """Representative eigenfunction ``u(|x|) Y(x_hat)`` at points in R^4."""
        pts = np.atleast_2d(points)
        r = np.linalg.norm(pts, axis=1)
        return self.u_at(r) * representative_harmonic(self.ell, pts)

    def to_json_dict(self) -> dict:
        return {
            "ell": self.ell,
            "coupling": self.coupling,
            "l2_norm": self.l2_norm,
            "m0": self.m0,
            "m1": [float(v) for v in self.m1],
            "mismatch": self.mismatch,
            "resonance_class": self.resonance_class,
            "potential": self.potential.to_dict(),
            "shooting": {k: getattr(self.config, k) for k in ("r0", "r_match", "r_max", "rtol")},
        }

    def save(self, csv_path, json_path=None, extra: dict | None = None) -> None:
        """CSV with columns ``r,u`` plus a JSON sidecar of scalar metadata.

        ``extra`` entries go into the sidecar and a leading ``#`` line of the CSV.
        """
        csv_path = Path(csv_path)
        json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
        comment = "".join(f"# {k}={v}\n" for k, v in (extra or {}).items())
        np.savetxt(csv_path, np.column_stack([self.r_grid, self.u]), delimiter=",",
                   header=comment + "r,u", comments="", fmt="%.17g")
        json_path.write_text(json.dumps({**self.to_json_dict(), **(extra or {})}, indent=2, sort_keys=True))

    @classmethod
    def load(cls, csv_path, json_path=None) -> "SectorState":
        csv_path = Path(csv_path)
        json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
        meta = json.loads(json_path.read_text())
        lines = [ln for ln in csv_path.read_text().splitlines() if ln and not ln.startswith("#")]
        data = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
        r, u = data[:, 0], data[:, 1]
        spline = CubicSpline(r, u)
        sh = meta["shooting"]
        cfg = ShootingConfig(r0=sh["r0"], r_match=sh["r_match"], r_max=sh["r_max"], rtol=sh["rtol"])
        return cls(ell=meta["ell"], potential=RadialPotential.from_dict(meta["potential"]),
                   coupling=meta["coupling"], r_grid=r, u=u, du=spline(r, 1),
                   l2_norm=meta["l2_norm"], m0=meta["m0"], m1=np.array(meta["m1"]),
                   mismatch=meta["mismatch"], resonance_class=meta["resonance_class"], config=cfg)


def _radial_moment(state_like_f, power: int, r_v: float) -> float:
    rule = composite_gauss_legendre(np.linspace(0.0, r_v, 49), 16)
    return float(rule.integrate(state_like_f(rule.nodes) * rule.nodes ** power))


def build_eigenstate(p: RadialPotential, ell: int, coupling: float,
                     cfg: ShootingConfig = DEFAULT_SHOOTING, r_grid=None,
                     moment_radius: float = 12.0) -> SectorState:
    """Assemble and normalize the eigenfunction at a tuned coupling."""
    _check_ell(ell, cfg)
    r_grid = default_r_grid(cfg) if r_grid is None else np.asarray(r_grid, dtype=float)
    t_grid = np.log(r_grid)
    tm = np.log(cfg.r_match)
    inner_t = t_grid[t_grid <= tm]
    outer_t = t_grid[t_grid > tm]

    t_out = np.concatenate([inner_t, [tm]]) if inner_t[-1] < tm else inner_t
    out = _integrate(p, ell, coupling, t_grid[0], tm, _outward_start(p, ell, coupling, r_grid[0]), cfg,
                     t_eval=t_out, max_step=2e-3)
    t_in = np.concatenate([[tm], outer_t])[::-1]
    inn = _integrate(p, ell, coupling, t_grid[-1], tm, _inward_start(ell, r_grid[-1]), cfg,
                     t_eval=t_in, max_step=2e-3)

    uo_m, duo_m, no_m = out.y[0, -1], out.y[1, -1], out.y[2, -1]
    ui_m, dui_m, ni_m = inn.y[0, -1], inn.y[1, -1], inn.y[2, -1]
    scale = uo_m / ui_m
    mismatch = float((duo_m / uo_m - dui_m / ui_m) / cfg.r_match)

    n_out = len(inner_t)
    u_in = inn.y[0, ::-1][1:] * scale
    du_in = inn.y[1, ::-1][1:] * scale
    u = np.concatenate([out.y[0, :n_out], u_in])
    du_dt = np.concatenate([out.y[1, :n_out], du_in])

    # norm^2 = head (r < r0) + outward part + inward part (integrated backwards) + tail
    head = u[0] ** 2 * r_grid[0] ** 4 / (2 * ell + 4)
    inner_part = no_m
    outer_part = -ni_m * scale ** 2
    tail = (u[-1] ** 2 * r_grid[-1] ** 4 / (2 * ell)) if ell >= 1 else np.inf
    norm2 = head + inner_part + outer_part + tail
    if not np.isfinite(norm2):
        # resonance class: normalize on the computational ball only
        norm2 = head + inner_part + outer_part
    amp = 1.0 / np.sqrt(norm2)
    u = u * amp
    du = du_dt * amp / r_grid

    state = SectorState(ell=ell, potential=p, coupling=float(coupling), r_grid=r_grid, u=u,
                        du=du, l2_norm=1.0, m0=0.0, m1=np.zeros(4), mismatch=mismatch,
                        resonance_class=(ell == 0), config=cfg)
    state.l2_norm = float(np.sqrt(
        _radial_moment(lambda r: state.u_at(r) ** 2, 3, cfg.r_max)
        + (tail * amp ** 2 if ell >= 1 else 0.0)))

    rule = sphere3_rule(8)
    y = representative_harmonic(ell, rule.nodes)
    rad0 = _radial_moment(state.vpsi_radial, 3, moment_radius)
    rad1 = _radial_moment(state.vpsi_radial, 4, moment_radius)
    state.m0 = float(rad0 * rule.integrate(y))
    state.m1 = rad1 * rule.integrate(y[:, None] * rule.nodes)
    return state


def solve_sector(p: RadialPotential, ell: int, bracket=None,
                 cfg: ShootingConfig = DEFAULT_SHOOTING) -> SectorState:
    """Bracket, tune and build in one call."""
    if bracket is None:
        bracket = find_bracket(p, ell, c_stop=-200.0 if p.coupling <= 0 else 200.0, cfg=cfg)
    tuned = tune_coupling(p, ell, bracket, cfg=cfg)
    return build_eigenstate(p, ell, tuned.coupling, cfg)


def ode_residual(state: SectorState, r_lo: float = 0.1, r_hi: float | None = None) -> float:
    """Max ODE residual on the uniform part of the grid, relative to ``max|u|``.

    ``u''`` from a sixth-order central difference of the stored profile.
    """
    r = state.r_grid
    r_hi = state.config.r_max - 0.1 if r_hi is None else r_hi
    h = np.diff(r)
    uniform = np.flatnonzero(np.isclose(h, np.median(h[-100:]), rtol=1e-6))
    i0 = uniform[0]
    rr, uu = r[i0:], state.u[i0:]
    hh = rr[1] - rr[0]
    c = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
    d2 = sum(c[k] * uu[k:len(uu) - 6 + k] for k in range(7)) / hh ** 2
    d1c = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])
    d1 = sum(d1c[k] * uu[k:len(uu) - 6 + k] for k in range(7)) / hh
    rc, uc = rr[3:-3], uu[3:-3]
    lam = state.ell * (state.ell + 2)
    res = d2 + 3.0 * d1 / rc - lam * uc / rc ** 2 - state.coupling * state.potential.profile(rc) * uc
    keep = (rc >= r_lo) & (rc <= r_hi)
    return float(np.max(np.abs(res[keep])) / np.max(np.abs(state.u)))


def decay_fit(state: SectorState, r_lo: float = 20.0, r_hi: float = 40.0) -> float:
    """Least-squares slope of ``log|u|`` against ``log r`` on ``[r_lo, r_hi]``."""
    if state.r_grid[-1] < r_hi:
        raise ValueError(f"r_grid ends at {state.r_grid[-1]:.3g} < {r_hi}; cannot fit decay")
    keep = (state.r_grid >= r_lo) & (state.r_grid <= r_hi)
    slope, _ = np.polyfit(np.log(state.r_grid[keep]), np.log(np.abs(state.u[keep])), 1)
    return float(slope)


def small_r_exponent(state: SectorState, r_lo: float = 1e-4, r_hi: float = 1e-2) -> float:
    keep = (state.r_grid >= r_lo) & (state.r_grid <= r_hi)
    slope, _ = np.polyfit(np.log(state.r_grid[keep]), np.log(np.abs(state.u[keep])), 1)
    return float(slope)
