"""
Scenario pipeline: eigensolve, tables, kernel grids, bound fits, probes and
a gated pass/fail report.

Every stage writes its artifacts into the output directory and merges its
check entries into ``checks.json``, so stages can run separately (one CLI
subcommand each) or in sequence. A check entry carries a stable id, a short
statement of the property it verifies (its anchor), the verdict, the measured
value and the tolerance.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy import special

from . import bounds_lab as bl
from .osc_integrals import (
    OscTable,
    QuadratureError,
    TableConfig,
    TableRangeError,
    build_table,
    certify,
    certify_left_regimes,
    ibp_slope,
)
from .potential import RadialPotential
from .resolvent import green_zero_energy, r0_diff, r0_plus
from .wave_kernel import (
    KernelGrid,
    KernelGridSpec,
    PartialWaveConfig,
    assemble_wlog_grid,
    assemble_ws_grid,
    gamma_factors,
    random_admissible,
    second_order_identity_check,
    taylor_identity_check,
)
from .zero_energy import (
    BracketError,
    SectorState,
    ShootingError,
    decay_fit,
    ode_residual,
    solve_sector,
)


class ConfigError(ValueError):
    """Malformed or unreadable scenario configuration."""


class ArtifactError(RuntimeError):
    """Expected artifacts are missing from an output directory."""


NUMERICAL_ERRORS = (ShootingError, BracketError, QuadratureError, TableRangeError,
                    FloatingPointError, np.linalg.LinAlgError)

EXIT_OK, EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

CHECK_IDS = tuple(range(1, 13))


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario definition. Every field has a default; lengths in the grid
    sections are in units of ``1 / lam0``."""

    name: str = "custom"
    potential: dict = field(default_factory=lambda: {"kind": "gaussian", "coupling": -1.0})
    sectors: tuple = (1, 2)
    lam0: float = 0.5
    density: int = 1
    tables: dict = field(default_factory=lambda: {"per_decade": 48, "extent": 100.0})
    kernel_grid: dict = field(default_factory=lambda: {"rho_min": 0.25, "rho_max": 1000.0,
                                                       "n_r": 73, "n_theta": 7})
    wlog_grid: dict = field(default_factory=lambda: {"rho_min": 0.25, "rho_max": 1000.0,
                                                     "n_r": 20, "n_theta": 5})
    truncation_fractions: tuple = (0.25, 0.5, 1.0)
    coefficients: list | None = None
    checks: tuple = CHECK_IDS
    output: str = "waveop-out"
    threads: int | None = None

    # ---- derived ---------------------------------------------------------
    @property
    def radial_potential(self) -> RadialPotential:
        return RadialPotential.from_dict(self.potential)

    def kernel_spec(self, lam0: float | None = None) -> KernelGridSpec:
        return KernelGridSpec.for_cutoff(lam0 or self.lam0, **self.kernel_grid)

    def wlog_spec(self, lam0: float | None = None) -> KernelGridSpec:
        return KernelGridSpec.for_cutoff(lam0 or self.lam0, **self.wlog_grid)

    def pw_config(self, lam0: float | None = None, density: int | None = None) -> PartialWaveConfig:
        d = density or self.density
        return PartialWaveConfig(radial_panel=0.5 / d, lam0=lam0 or self.lam0, density=d)

    def table_config(self, j, p, lp, kind="right", lam0=None, density=None) -> TableConfig:
        lam = lam0 or self.lam0
        ext = self.tables["extent"] / lam
        return TableConfig(j=j, p=p, lp=lp, kind=kind, a_max=ext, b_max=ext, lam0=lam,
                           per_decade=self.tables["per_decade"], density=density or self.density)

    def truncations(self, spec: KernelGridSpec) -> tuple:
        return tuple(spec.r_max * f for f in self.truncation_fractions)

    def hashed_dict(self) -> dict:
        """Fields that determine the numbers (output location and threads excluded)."""
        d = asdict(self)
        d.pop("output")
        d.pop("threads")
        return json.loads(json.dumps(d))

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.hashed_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _fail(msg):
    raise ConfigError(msg)


def validate_config(d: dict) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from a JSON mapping, rejecting anything malformed."""
    if not isinstance(d, dict):
        _fail("config must be a JSON object")
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(d) - known
    if unknown:
        _fail(f"unknown config fields: {sorted(unknown)}")
    base = ScenarioConfig()
    merged = {}
    for f in fields(ScenarioConfig):
        if f.name not in d:
            continue
        v = d[f.name]
        default = getattr(base, f.name)
        if isinstance(default, dict):
            if not isinstance(v, dict):
                _fail(f"{f.name} must be an object")
            extra = set(v) - set(default) if f.name != "potential" else set()
            if extra:
                _fail(f"unknown keys in {f.name}: {sorted(extra)}")
            v = {**default, **v} if f.name != "potential" else dict(v)
        elif isinstance(default, tuple):
            if not isinstance(v, list):
                _fail(f"{f.name} must be a list")
            v = tuple(v)
        merged[f.name] = v
    try:
        cfg = replace(base, **merged)
        cfg.radial_potential  # noqa: B018
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid potential: {exc}") from None
    if not (isinstance(cfg.lam0, (int, float)) and cfg.lam0 > 0):
        _fail("lam0 must be a positive number")
    if not (isinstance(cfg.density, int) and cfg.density >= 1):
        _fail("density must be a positive integer")
    if not cfg.sectors or any(not isinstance(e, int) or not 1 <= e <= 3 for e in cfg.sectors):
        _fail("sectors must be a nonempty list of integers in 1..3 (ell = 0 is the resonance case)")
    if len(set(cfg.sectors)) != len(cfg.sectors):
        _fail("sectors must not repeat")
    if any(c not in CHECK_IDS for c in cfg.checks):
        _fail(f"checks must be drawn from {list(CHECK_IDS)}")
    for key in ("kernel_grid", "wlog_grid"):
        g = getattr(cfg, key)
        if not (0 < g["rho_min"] < g["rho_max"] and int(g["n_r"]) >= 2 and int(g["n_theta"]) >= 1):
            _fail(f"bad {key}: {g}")
    if not (cfg.tables["extent"] > 0 and int(cfg.tables["per_decade"]) >= 2):
        _fail(f"bad tables: {cfg.tables}")
    tf = cfg.truncation_fractions
    if len(tf) < 3 or any(not 0 < t <= 1 for t in tf) or list(tf) != sorted(tf):
        _fail("truncation_fractions needs >= 3 increasing values in (0, 1]")
    if cfg.coefficients is not None:
        for ell in cfg.sectors:
            a = np.asarray(cfg.coefficients, dtype=float)
            if a.shape != ((ell + 1) ** 2,) * 2:
                _fail(f"coefficients must be {(ell + 1) ** 2}x{(ell + 1) ** 2} for ell={ell}")
    if cfg.threads is not None and not (isinstance(cfg.threads, int) and cfg.threads >= 1):
        _fail("threads must be a positive integer")
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return validate_config(data)


BUILTIN_SCENARIOS = {
    "l1-dichotomy": {"name": "l1-dichotomy", "sectors": [1, 2]},
    "l2-cancellation": {"name": "l2-cancellation", "sectors": [2], "checks": [1, 2, 3, 4, 8, 10]},
    "lemma-suite": {"name": "lemma-suite", "sectors": [1], "checks": [1, 2, 5, 6, 7, 9, 11]},
    "wlog": {"name": "wlog", "sectors": [1, 2], "checks": [3, 10]},
}


def builtin_config(name: str) -> ScenarioConfig:
    if name not in BUILTIN_SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; built-ins: {sorted(BUILTIN_SCENARIOS)}")
    return validate_config(BUILTIN_SCENARIOS[name])


def resolve_threads(cli_value: int | None, cfg: ScenarioConfig) -> int:
    if cli_value is not None:
        return max(1, int(cli_value))
    if cfg.threads is not None:
        return cfg.threads
    env = os.environ.get("WAVEOP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"WAVEOP_THREADS must be an integer, got {env!r}") from None
    return 1


# ---------------------------------------------------------------------------
# check entries
# ---------------------------------------------------------------------------

ANCHORS = {
    1: ("green-limit", "R0+(lam^2, r) -> 1/(4 pi^2 r^2) as lam -> 0"),
    2: ("difference-kernel", "(R0+ - R0-)(lam^2, r) = i lam J1(lam r) / (4 pi r)"),
    3: ("eigenstate", "L2 zero-energy eigenstate with int V psi = 0 (and int x V psi = 0 when ell >= 2)"),
    4: ("eigenstate-decay", "|psi(x)| <~ <x>^-3, and <x>^-(2+ell) in sector ell"),
    5: ("lambda-integral-bounds", "|I_j(A,B)| <~ A^-2 <A+B>^-1 <A-B>^-(1+j); log and left-derivative variants"),
    6: ("ibp-decay", "|int e^{i rho lam} lam^beta Phi dlam| <~ <rho>^-(beta+1)"),
    7: ("taylor-identities", "first and second order Taylor expansions of R0+ - R0- with Gamma-factor bounds"),
    8: ("ws-regime-shapes", "W_s kernel: <x>^-5 for |x|>2|y|, <x>^-3<|x|-|y|>^-2 on the ring, "
                            "<x>^-2<y>^-3 (<y>^-4 when int x V psi = 0) for |y|>2|x|"),
    9: ("lp-dichotomy-probes", "Y-large kernels bounded on L^p only for p < 4/(4-beta); ring and Schur failures"),
    10: ("wlog-envelope", "|W_log| <~ <x>^-2 <|x|+|y|>^-1 <|x|-|y|>^-(3-eps) <log<|x|-|y|>>"),
    11: ("convolution-lemmas", "weighted convolution bounds (A1, B1, LARGEW families)"),
    12: ("robustness", "fitted constants within 2x and verdicts unchanged under lam0/2 and doubled density"),
}


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def make_entry(cid, items, value=None, tolerance=None, gating=True, note=None) -> dict:
    """Entry whose verdict is the conjunction of its sub-items ``(label, ok, value, tolerance)``."""
    name, anchor = ANCHORS[cid] if isinstance(cid, int) else cid
    sub = [{"label": lab, "verdict": "pass" if ok else "fail", "value": val, "tolerance": tol}
           for lab, ok, val, tol in items]
    ok = all(s["verdict"] == "pass" for s in sub)
    failing = [s["label"] for s in sub if s["verdict"] == "fail"]
    entry = {"id": cid if isinstance(cid, int) else name, "name": name, "anchor": anchor,
             "verdict": "pass" if ok else "fail", "gating": gating,
             "value": value if value is not None else (sub[0]["value"] if len(sub) == 1 else None),
             "tolerance": tolerance if tolerance is not None else (sub[0]["tolerance"] if len(sub) == 1 else None),
             "failing": failing, "items": sub}
    if note:
        entry["note"] = note
    return _clean(entry)


# ---------------------------------------------------------------------------
# run context and artifact helpers
# ---------------------------------------------------------------------------

@dataclass
class RunContext:
    config: ScenarioConfig
    out: Path
    threads: int = 1
    states: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    ws_grids: dict = field(default_factory=dict)
    wlog_grids: dict = field(default_factory=dict)
    log: object = None

    def say(self, msg: str) -> None:
        if self.log:
            print(msg, file=self.log, flush=True)

    @property
    def hash(self) -> str:
        return self.config.config_hash

    def path(self, name: str) -> Path:
        return self.out / name

    def write_csv(self, name: str, header, rows) -> None:
        with open(self.path(name), "w", newline="") as fh:
            fh.write(f"# config_hash={self.hash}\n")
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])

    def write_json(self, name: str, obj) -> None:
        self.path(name).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")

    def record(self, entries) -> None:
        path = self.path("checks.json")
        current = json.loads(path.read_text()) if path.exists() else {}
        for e in entries:
            current[str(e["id"])] = e
        path.write_text(json.dumps(current, indent=2, sort_keys=True) + "\n")


def open_context(cfg: ScenarioConfig, out=None, threads: int = 1, log=None) -> RunContext:
    out = Path(out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(cfg, out, threads, log=log)
    cfg_path = ctx.path("config.json")
    if cfg_path.exists():
        prev = json.loads(cfg_path.read_text())
        if prev.get("config_hash") != ctx.hash:
            # a different scenario in the same directory invalidates earlier checks
            ctx.path("checks.json").unlink(missing_ok=True)
    ctx.write_json("config.json", {**cfg.hashed_dict(), "config_hash": ctx.hash})
    return ctx


def _wants(ctx, *ids) -> bool:
    return any(i in ctx.config.checks for i in ids)


# ---------------------------------------------------------------------------
# stage: eigensolve
# ---------------------------------------------------------------------------

def eigenstate_checks(states: dict) -> list:
    items3, items4 = [], []
    for ell, st in sorted(states.items()):
        res = ode_residual(st)
        items3 += [
            (f"ell={ell} |mismatch|", abs(st.mismatch) < 1e-8, abs(st.mismatch), 1e-8),
            (f"ell={ell} |norm - 1|", abs(st.l2_norm - 1) <= 1e-8, abs(st.l2_norm - 1), 1e-8),
            (f"ell={ell} ODE residual", res <= 1e-6, res, 1e-6),
            (f"ell={ell} |m0|", abs(st.m0) <= 1e-10, abs(st.m0), 1e-10),
        ]
        m1 = float(np.max(np.abs(st.m1)))
        if ell >= 2:
            items3.append((f"ell={ell} max|m1|", m1 <= 1e-10, m1, 1e-10))
        else:
            items3.append((f"ell={ell} m1 != 0", m1 > 1e-6, m1, "> 1e-6"))
        slope = decay_fit(st)
        target = -(2 + ell)
        items4.append((f"ell={ell} tail slope", abs(slope - target) <= 0.1, slope, f"{target} +- 0.1"))
    return [make_entry(3, items3), make_entry(4, items4)]


def stage_eigensolve(ctx: RunContext) -> list:
    p = ctx.config.radial_potential
    for ell in ctx.config.sectors:
        ctx.say(f"[eigensolve] ell={ell}")
        st = solve_sector(p, ell)
        ctx.states[ell] = st
        st.save(ctx.path(f"eigenstate_l{ell}.csv"), extra={"config_hash": ctx.hash})
    entries = eigenstate_checks(ctx.states) if _wants(ctx, 3, 4) else []
    ctx.record(entries)
    return entries


def _states(ctx: RunContext) -> dict:
    for ell in ctx.config.sectors:
        if ell not in ctx.states:
            path = ctx.path(f"eigenstate_l{ell}.csv")
            if not path.exists():
                raise ArtifactError(f"missing artifact {path.name}; run eigensolve first")
            ctx.states[ell] = SectorState.load(path)
    return ctx.states


# ---------------------------------------------------------------------------
# stage: tables
# ---------------------------------------------------------------------------

TABLE_SPECS = {"j0": (0, -1, 0, "right"), "j1": (1, -1, 0, "right"), "j2": (2, -1, 0, "right"),
               "log": (0, 1, 1, "right"), "left": (0, -1, 0, "left")}


def build_certificates(cfg: ScenarioConfig, lam0=None, density=None, tables_out=None) -> dict:
    certs = {}
    for key, (j, p, lp, kind) in TABLE_SPECS.items():
        table = build_table(cfg.table_config(j, p, lp, kind, lam0, density))
        if tables_out is not None:
            tables_out[key] = table
        if kind == "left":
            for name, c in certify_left_regimes(table).items():
                certs[f"left {name}"] = c
        else:
            certs[key] = certify(table)
    return certs


def certificate_entry(certs: dict) -> dict:
    items = []
    for label, c in certs.items():
        ok = c.stable
        items.append((f"{label} sup finite, extension ratio", ok,
                      {"sup": c.sup, "extension_ratio": c.extension_ratio}, "< 2"))
    return make_entry(5, items)


def stage_tables(ctx: RunContext) -> list:
    ctx.say("[build-table] lambda-integral tables")
    certs = build_certificates(ctx.config, tables_out=ctx.tables)
    for key, table in ctx.tables.items():
        table.save(ctx.path(f"table_{key}.npz"), extra={"config_hash": ctx.hash})
    ctx.write_csv("certificates.csv", ["label", "sup", "sup_A", "sup_B", "sup_inner", "extension_ratio"],
                  [(c.label, c.sup, c.sup_location[0], c.sup_location[1], c.sup_inner, c.extension_ratio)
                   for c in certs.values()])
    entries = [certificate_entry(certs)] if _wants(ctx, 5) else []
    ctx.record(entries)
    return entries


# ---------------------------------------------------------------------------
# stage: probes (resolvent identities, IBP, Taylor, L^p, lemmas)
# ---------------------------------------------------------------------------

LP_RADII = (1e3, 1e4, 1e5)
ANNULUS_RADII = (8.0, 32.0, 128.0)
SCHUR_RADII = (10.0, 20.0, 40.0)


def green_limit_check() -> dict:
    r = np.geomspace(0.1, 50.0, 1000)
    err = float(np.max(np.abs(4 * np.pi ** 2 * r ** 2 * r0_plus(1e-8, r) - 1.0)))
    return make_entry(1, [("sup |4 pi^2 r^2 R0+(1e-8, r) - 1|", err <= 1e-3, err, 1e-3)])


def difference_kernel_check(lam0: float = 0.5) -> dict:
    lam = np.geomspace(1e-3, lam0, 25)
    r = np.geomspace(1e-2, 200.0, 40)
    L, R = np.meshgrid(lam, r, indexing="ij")
    ref = 1j * L * special.j1(L * R) / (4 * np.pi * R)
    err = float(np.max(np.abs(r0_diff(L, R) - ref) / np.abs(ref)))
    return make_entry(2, [("max relative error on 25x40 grid", err <= 1e-12, err, 1e-12)])


def ibp_check() -> tuple:
    rows, items = [], []
    for beta in (0.0, 0.5, 1.0):
        s = ibp_slope(beta)
        rows.append((beta, s))
        items.append((f"beta={beta}", abs(s + beta + 1) <= 0.05, s, f"{-(beta + 1)} +- 0.05"))
    return make_entry(6, items), rows


def taylor_check(n: int = 100, seed: int = 20240611) -> tuple:
    rng = np.random.default_rng(seed)
    worst1 = worst2 = 0.0
    gamma_ok = True
    rows = []
    s = np.linspace(0.0, 1.0, 21)
    for _ in range(n):
        lam, y, w = random_admissible(rng)
        r1 = taylor_identity_check(lam, y, w)
        r2 = second_order_identity_check(lam, y, w)
        g1, g2 = gamma_factors(s, w, y)
        rp = np.linalg.norm(y[None, :] - s[:, None] * w[None, :], axis=1)
        ww = float(w @ w)
        gamma_ok &= bool(np.all(np.abs(g1) <= ww / rp * (1 + 1e-12)) and np.all(np.abs(g2) <= ww * (1 + 1e-12)))
        worst1, worst2 = max(worst1, r1), max(worst2, r2)
        rows.append((lam, np.linalg.norm(y), np.linalg.norm(w), r1, r2))
    entry = make_entry(7, [
        ("first-order residual", worst1 < 1e-8, worst1, 1e-8),
        ("second-order residual", worst2 < 1e-8, worst2, 1e-8),
        ("Gamma bounds pointwise", gamma_ok, gamma_ok, "|G1| <= |w|^2/|y-sw|, |G2| <= |w|^2"),
    ])
    return entry, rows


def _log_rate(radii, sups):
    """Growth per unit ``log R`` over the last extension."""
    return (sups[-1] - sups[-2]) / math.log(radii[-1] / radii[-2])


def _loglog_rate(radii, sups):
    return math.log(sups[-1] / sups[-2]) / math.log(radii[-1] / radii[-2])


def lp_checks() -> tuple:
    rows, items = [], []
    cases = [((2, 3, 2), -1.0, "eq"), ((2, 3, 8), 0.5, "eq"), ((2, 4, 8), 0.05, "le")]
    for (a, b, p), target, mode in cases:
        ratios = bl.lp_growth_probe(a, b, p, LP_RADII)
        slope = bl.fit_loglog_slope(LP_RADII, ratios)
        rows += [("lp", f"a={a},b={b},p={p}", R, v) for R, v in zip(LP_RADII, ratios)]
        ok = abs(slope - target) <= 0.1 if mode == "eq" else slope <= target
        items.append((f"model ({a},{b}) p={p} slope", ok, slope,
                      f"{target} +- 0.1" if mode == "eq" else f"<= {target}"))
    ann = bl.annulus_log_probe(ANNULUS_RADII)
    norm = np.array(ann) / np.log(bl.jap(np.array(ANNULUS_RADII)))
    spread = float(norm.max() / norm.min())
    items.append(("annulus value/log<R> spread", spread <= 2.0, spread, "<= 2"))
    rows += [("annulus", "beta=0", R, v) for R, v in zip(ANNULUS_RADII, ann)]
    ann1 = bl.annulus_log_probe(ANNULUS_RADII, beta=1.0)
    rate1 = _loglog_rate(ANNULUS_RADII, ann1)
    items.append(("annulus with <|x|-|y|>^-2 bounded", rate1 <= 0.1, rate1, "log-log rate <= 0.1"))
    rows += [("annulus", "beta=1", R, v) for R, v in zip(ANNULUS_RADII, ann1)]
    # Schur sums for the synthetic regime models
    models = {"X-LARGE <x>^-5": bl.SyntheticKernel(5, 0, 0, "X-LARGE"),
              "RING <x>^-3<|x|-|y|>^-2": bl.SyntheticKernel(3, 0, 2, "RING"),
              "X-LARGE <x>^-4": bl.SyntheticKernel(4, 0, 0, "X-LARGE")}
    for label, model in models.items():
        s = bl.schur_sums(model, radii=SCHUR_RADII)
        rows += [("schur-row", label, R, v) for R, v in zip(SCHUR_RADII, s.row_sup)]
        rows += [("schur-col", label, R, v) for R, v in zip(SCHUR_RADII, s.col_sup)]
        if label.endswith("^-4"):
            rate = _log_rate(SCHUR_RADII, s.col_sup) / bl.SPHERE_AREA
            items.append((f"{label}: column sum grows like 2 pi^2 log R", abs(rate - 1) <= 0.15, rate, "1 +- 0.15"))
        elif label.startswith("X-LARGE"):
            ch = s.relative_change()
            items.append((f"{label}: Schur sums converge", ch < 0.05, ch, "< 5% from R=20 to 40"))
        else:
            rate = max(_loglog_rate(SCHUR_RADII, s.row_sup), _loglog_rate(SCHUR_RADII, s.col_sup))
            items.append((f"{label}: Schur sums bounded", rate <= 0.1, rate, "log-log rate <= 0.1"))
    return make_entry(9, items), rows


def lemma_checks() -> tuple:
    rows, items = [], []
    for lemma, plist in bl.DEFAULT_LEMMA_PARAMS.items():
        for params in plist:
            c = bl.weighted_convolution_check(lemma, params)
            label = f"{lemma} " + ",".join(f"{k}={v:g}" for k, v in params.items())
            rows.append((lemma, json.dumps(params, sort_keys=True), c.sup_ratio, c.location[0], c.location[1],
                         c.extension_ratio))
            items.append((label, c.stable, {"sup_ratio": c.sup_ratio, "extension_ratio": c.extension_ratio}, "< 2"))
    return make_entry(11, items), rows


def stage_probes(ctx: RunContext) -> list:
    entries = []
    if _wants(ctx, 1):
        entries.append(green_limit_check())
    if _wants(ctx, 2):
        entries.append(difference_kernel_check(ctx.config.lam0))
    if _wants(ctx, 6):
        ctx.say("[probes] integration by parts")
        e, rows = ibp_check()
        ctx.write_csv("probe_ibp.csv", ["beta", "slope"], rows)
        entries.append(e)
    if _wants(ctx, 7):
        ctx.say("[probes] Taylor identities")
        e, rows = taylor_check()
        ctx.write_csv("probe_taylor.csv", ["lam", "norm_y", "norm_w", "first_order", "second_order"], rows)
        entries.append(e)
    if _wants(ctx, 9):
        ctx.say("[probes] L^p growth, annulus, Schur sums")
        e, rows = lp_checks()
        ctx.write_csv("probe_lp.csv", ["probe", "model", "R", "value"], rows)
        entries.append(e)
    if _wants(ctx, 11):
        ctx.say("[probes] weighted convolution lemmas")
        e, rows = lemma_checks()
        ctx.write_csv("probe_lemmas.csv", ["lemma", "params", "sup_ratio", "r", "R", "extension_ratio"], rows)
        entries.append(e)
    ctx.record(entries)
    return entries


# ---------------------------------------------------------------------------
# stage: kernel grids
# ---------------------------------------------------------------------------

def _coefficients(cfg: ScenarioConfig, ell: int):
    return None if cfg.coefficients is None else np.asarray(cfg.coefficients, dtype=float)


def stage_kernel_grid(ctx: RunContext) -> list:
    cfg = ctx.config
    for ell, st in sorted(_states(ctx).items()):
        ctx.say(f"[kernel-grid] W_s ell={ell}")
        g = assemble_ws_grid(st, cfg.kernel_spec(), cfg.pw_config(), ctx.threads, cfg.name)
        ctx.ws_grids[ell] = g
        g.to_csv(ctx.path(f"kernel_ws_l{ell}.csv"), comment=f"config_hash={ctx.hash}")
        write_heatmaps(ctx, g, f"heatmap_ws_l{ell}")
        if _wants(ctx, 10):
            ctx.say(f"[kernel-grid] W_log ell={ell}")
            gl = assemble_wlog_grid(st, _coefficients(cfg, ell), cfg.wlog_spec(), cfg.pw_config(),
                                    ctx.threads, cfg.name)
            ctx.wlog_grids[ell] = gl
            gl.to_csv(ctx.path(f"kernel_wlog_l{ell}.csv"), comment=f"config_hash={ctx.hash}")
    return []


# ---------------------------------------------------------------------------
# stage: bound fits
# ---------------------------------------------------------------------------

REGIME_FITS = (("X-LARGE", (5, 0, 0)), ("RING", (3, 0, 2)), ("Y-LARGE", (2, 3, 0)), ("Y-LARGE", (2, 4, 0)))
WLOG_EPS = 0.1


@dataclass
class SectorFits:
    fits: dict
    x_exponent: float
    y_exponent: float
    wlog: bl.BoundFit | None = None


def fit_sector(grid: KernelGrid, radii, wlog_grid: KernelGrid | None = None, wlog_radii=None) -> SectorFits:
    fits = {(reg, w): bl.fit_regime_bound(grid, reg, w, radii) for reg, w in REGIME_FITS}
    xe = bl.fit_decay_exponent(grid, "X-LARGE", "x")
    ye = bl.fit_decay_exponent(grid, "Y-LARGE", "y")
    wl = None
    if wlog_grid is not None:
        wl = bl.fit_regime_bound(wlog_grid, "ALL", (2, 0, 3 - WLOG_EPS), wlog_radii, plus=1, log_power=1)
    return SectorFits(fits, xe, ye, wl)


def regime_shape_entries(fits: dict) -> list:
    items, info = [], []
    if 1 in fits:
        f = fits[1]
        items += [
            ("ell=1 X-LARGE x-exponent", abs(f.x_exponent - 5) <= 0.3, f.x_exponent, "5 +- 0.3"),
            ("ell=1 RING (3,0,2) weighted sup stable", f.fits[("RING", (3, 0, 2))].holds(),
             {"sup": f.fits[("RING", (3, 0, 2))].sup, "trend": f.fits[("RING", (3, 0, 2))].trend_slope},
             "trend <= 0.1"),
            ("ell=1 Y-LARGE y-exponent", abs(f.y_exponent - 3) <= 0.3, f.y_exponent, "3 +- 0.3"),
        ]
    if 2 in fits:
        items.append(("ell=2 Y-LARGE y-exponent", abs(fits[2].y_exponent - 4) <= 0.3, fits[2].y_exponent, "4 +- 0.3"))
    if 1 in fits and 2 in fits:
        d = fits[2].y_exponent - fits[1].y_exponent
        items.append(("dichotomy: exponent(ell=2) - exponent(ell=1)", abs(d - 1) <= 0.4, d, "1 +- 0.4"))
    entries = [make_entry(8, items)] if items else []
    for ell, f in sorted(fits.items()):
        xf = f.fits[("X-LARGE", (5, 0, 0))]
        y3 = f.fits[("Y-LARGE", (2, 3, 0))]
        y4 = f.fits[("Y-LARGE", (2, 4, 0))]
        info += [
            (f"ell={ell} X-LARGE <x>^5 |K| bounded", xf.holds(), {"sup": xf.sup, "trend": xf.trend_slope}, "trend <= 0.1"),
            (f"ell={ell} Y-LARGE <x>^2<y>^3 |K| bounded", y3.holds(), {"sup": y3.sup, "trend": y3.trend_slope}, "trend <= 0.1"),
        ]
        if ell == 1:
            info.append(("ell=1 Y-LARGE <x>^2<y>^4 |K| grows (m1 != 0)", y4.trend_slope >= 0.5, y4.trend_slope, ">= 0.5"))
        else:
            info.append((f"ell={ell} Y-LARGE <x>^2<y>^4 |K| bounded", y4.holds(), y4.trend_slope, "<= 0.1"))
    if info:
        entries.append(make_entry(("ws-weighted-bounds",
                                   "weighted sups of the three regime envelopes under domain extension"),
                                  info, gating=False))
    return entries


def wlog_entry(fits: dict) -> dict:
    items = []
    for ell, f in sorted(fits.items()):
        if f.wlog is not None:
            items.append((f"ell={ell} weighted sup finite and grid-stable", f.wlog.holds(),
                          {"sup": f.wlog.sup, "trend": f.wlog.trend_slope}, "trend <= 0.1"))
    return make_entry(10, items)


def _grids(ctx: RunContext):
    for ell in ctx.config.sectors:
        if ell not in ctx.ws_grids:
            path = ctx.path(f"kernel_ws_l{ell}.csv")
            if not path.exists():
                raise ArtifactError(f"missing artifact {path.name}; run kernel-grid first")
            ctx.ws_grids[ell] = KernelGrid.from_csv(path, ctx.config.name)
        if _wants(ctx, 10) and ell not in ctx.wlog_grids:
            path = ctx.path(f"kernel_wlog_l{ell}.csv")
            if not path.exists():
                raise ArtifactError(f"missing artifact {path.name}; run kernel-grid first")
            ctx.wlog_grids[ell] = KernelGrid.from_csv(path, ctx.config.name)


def stage_fit_bounds(ctx: RunContext) -> list:
    cfg = ctx.config
    _grids(ctx)
    fits = {}
    for ell in cfg.sectors:
        ctx.say(f"[fit-bounds] ell={ell}")
        f = fit_sector(ctx.ws_grids[ell], cfg.truncations(cfg.kernel_spec()), ctx.wlog_grids.get(ell),
                       cfg.truncations(cfg.wlog_spec()))
        fits[ell] = f
        rows = [f.fits[k].as_row() for k in f.fits]
        ctx.write_csv(f"bound_fit_l{ell}.csv", ["regime", "a", "b", "c", "sup", "sup_location", "trend_slope"],
                      [tuple(r.values()) for r in rows])
        ctx.write_csv(f"exponents_l{ell}.csv", ["regime", "direction", "exponent"],
                      [("X-LARGE", "x", f.x_exponent), ("Y-LARGE", "y", f.y_exponent)])
        if f.wlog is not None:
            w = f.wlog
            ctx.write_csv(f"wlog_fit_l{ell}.csv", ["R", "sup"], list(zip(w.radii, w.sups)))
    entries = []
    if _wants(ctx, 8):
        entries += regime_shape_entries(fits)
    if _wants(ctx, 10):
        entries.append(wlog_entry(fits))
    if _wants(ctx, 12):
        entries.append(stage_robustness(ctx, fits, _baseline_certificates(ctx)))
    ctx.record(entries)
    return entries


# ---------------------------------------------------------------------------
# robustness: lam0 / 2 and doubled density
# ---------------------------------------------------------------------------

def _constants_and_verdicts(ctx: RunContext, lam0: float, density: int, certs=None, fits=None):
    cfg = ctx.config
    consts, verdicts = {}, {}
    if _wants(ctx, 5):
        certs = certs if certs is not None else build_certificates(cfg, lam0, density)
        for label, c in certs.items():
            consts[f"certificate {label}"] = c.sup
            verdicts[f"certificate {label}"] = c.stable
    if fits is None:
        fits = {}
        for ell, st in sorted(_states(ctx).items()):
            pw = cfg.pw_config(lam0, density)
            g = assemble_ws_grid(st, cfg.kernel_spec(lam0), pw, ctx.threads)
            gl = (assemble_wlog_grid(st, _coefficients(cfg, ell), cfg.wlog_spec(lam0), pw, ctx.threads)
                  if _wants(ctx, 10) else None)
            fits[ell] = fit_sector(g, cfg.truncations(cfg.kernel_spec(lam0)), gl,
                                   cfg.truncations(cfg.wlog_spec(lam0)))
    for ell, f in sorted(fits.items()):
        for (reg, w), bf in f.fits.items():
            key = f"ell={ell} {reg} " + "/".join(f"{v:g}" for v in w)
            consts[key] = bf.sup
            verdicts[key] = bf.holds()
        verdicts[f"ell={ell} X exponent 5 +- 0.3"] = abs(f.x_exponent - 5) <= 0.3
        verdicts[f"ell={ell} Y exponent {2 + ell} +- 0.3"] = abs(f.y_exponent - (2 + ell)) <= 0.3
        consts[f"ell={ell} Y exponent"] = f.y_exponent
        if f.wlog is not None:
            consts[f"ell={ell} W_log"] = f.wlog.sup
            verdicts[f"ell={ell} W_log"] = f.wlog.holds()
    return consts, verdicts


def _baseline_certificates(ctx: RunContext) -> dict | None:
    if not _wants(ctx, 5):
        return None
    for key in TABLE_SPECS:
        if key not in ctx.tables:
            path = ctx.path(f"table_{key}.npz")
            if not path.exists():
                return None
            ctx.tables[key] = OscTable.load(path)
    certs = {}
    for key, table in ctx.tables.items():
        if table.config.kind == "left":
            certs.update({f"left {n}": c for n, c in certify_left_regimes(table).items()})
        else:
            certs[key] = certify(table)
    return certs


def stage_robustness(ctx: RunContext, fits: dict, certs: dict | None = None) -> dict:
    cfg = ctx.config
    ctx.say("[robustness] baseline")
    base_c, base_v = _constants_and_verdicts(ctx, cfg.lam0, cfg.density, certs, fits)
    items, rows = [], []
    for label, lam0, dens in (("lam0/2", cfg.lam0 / 2, cfg.density), ("density x2", cfg.lam0, 2 * cfg.density)):
        ctx.say(f"[robustness] {label}")
        c, v = _constants_and_verdicts(ctx, lam0, dens)
        ratios = {k: c[k] / base_c[k] for k in base_c}
        worst = max(ratios, key=lambda k: abs(math.log(abs(ratios[k]))))
        flips = sorted(k for k in base_v if v[k] != base_v[k])
        off = sorted(k for k, r in ratios.items() if not 0.5 < r < 2.0)
        rows += [(label, k, base_c[k], c[k], ratios[k]) for k in base_c]
        items.append((f"{label}: every fitted constant within 2x", not off,
                      {"worst": worst, "ratio": ratios[worst], "outside": off}, "ratio in (0.5, 2)"))
        items.append((f"{label}: no verdict flips", not flips, {"flipped": flips}, "none"))
    ctx.write_csv("robustness.csv", ["variant", "constant", "baseline", "value", "ratio"], rows)
    return make_entry(12, items)


# ---------------------------------------------------------------------------
# SVG heatmaps
# ---------------------------------------------------------------------------

_VIRIDIS = np.array([[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]], float)


def _color(t: float) -> str:
    t = min(max(t, 0.0), 1.0) * (len(_VIRIDIS) - 1)
    i = min(int(t), len(_VIRIDIS) - 2)
    c = _VIRIDIS[i] + (t - i) * (_VIRIDIS[i + 1] - _VIRIDIS[i])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def heatmap_svg(r: np.ndarray, values: np.ndarray, title: str, comment: str = "", cell: int = 6) -> str:
    """``log10|K|`` over ``(rx, ry)``; ``values`` has shape ``(len(r), len(r))``."""
    n = r.size
    with np.errstate(divide="ignore"):
        lv = np.log10(np.abs(values))
    finite = lv[np.isfinite(lv)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo or 1.0
    pad, size = 60, n * cell
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + pad + 90}" height="{size + pad + 40}">',
           f"<!-- {comment} -->" if comment else "",
           f'<text x="{pad}" y="20" font-family="sans-serif" font-size="13">{title}</text>']
    for i in range(n):
        for k in range(n):
            v = lv[i, k]
            col = _color((v - lo) / span) if np.isfinite(v) else "#000000"
            out.append(f'<rect x="{pad + i * cell}" y="{30 + (n - 1 - k) * cell}" width="{cell}" '
                       f'height="{cell}" fill="{col}"/>')
    out.append(f'<text x="{pad}" y="{size + 48}" font-family="sans-serif" font-size="11">|x| from {r[0]:.3g} to '
               f'{r[-1]:.3g} (log scale)</text>')
    out.append(f'<text x="12" y="{30 + size // 2}" font-family="sans-serif" font-size="11" '
               f'transform="rotate(-90 12 {30 + size // 2})">|y| (log scale)</text>')
    for q in range(11):
        y = 30 + int(size * (1 - q / 10))
        out.append(f'<rect x="{pad + size + 20}" y="{y - size // 10}" width="14" height="{size // 10 + 1}" '
                   f'fill="{_color(q / 10)}"/>')
    out.append(f'<text x="{pad + size + 38}" y="40" font-family="sans-serif" font-size="10">{hi:.1f}</text>')
    out.append(f'<text x="{pad + size + 38}" y="{30 + size}" font-family="sans-serif" font-size="10">{lo:.1f}</text>')
    out.append("</svg>")
    return "\n".join(x for x in out if x) + "\n"


def write_heatmaps(ctx: RunContext, grid: KernelGrid, stem: str) -> None:
    r = np.unique(grid.rx)
    th = np.unique(grid.theta)
    vals = grid.values.reshape(r.size, r.size, th.size)
    for k, t in enumerate(th):
        svg = heatmap_svg(r, vals[:, :, k], f"log10 |K| at theta = {t:.4f}", f"config_hash={ctx.hash}")
        ctx.path(f"{stem}_theta{k}.svg").write_text(svg)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def expected_artifacts(cfg: ScenarioConfig) -> list:
    names = ["config.json", "checks.json"]
    if any(c in cfg.checks for c in (3, 4, 8, 10, 12)):
        names += [f"eigenstate_l{ell}.csv" for ell in cfg.sectors]
    if 5 in cfg.checks:
        names += ["certificates.csv"] + [f"table_{k}.npz" for k in TABLE_SPECS]
    if any(c in cfg.checks for c in (8, 12)):
        names += [f"kernel_ws_l{ell}.csv" for ell in cfg.sectors]
        names += [f"bound_fit_l{ell}.csv" for ell in cfg.sectors]
    if 10 in cfg.checks:
        names += [f"kernel_wlog_l{ell}.csv" for ell in cfg.sectors]
    for cid, name in ((6, "probe_ibp.csv"), (7, "probe_taylor.csv"), (9, "probe_lp.csv"),
                      (11, "probe_lemmas.csv"), (12, "robustness.csv")):
        if cid in cfg.checks:
            names.append(name)
    return names


def emit_report(out) -> dict:
    """Aggregate ``checks.json`` into ``report.json`` and ``report.md``."""
    out = Path(out)
    cfg_path = out / "config.json"
    if cfg_path.exists():
        raw = json.loads(cfg_path.read_text())
        raw.pop("config_hash", None)
        cfg = validate_config(raw)
    else:
        cfg = ScenarioConfig()
    missing = [n for n in expected_artifacts(cfg) if not (out / n).exists()]
    checks = json.loads((out / "checks.json").read_text()) if (out / "checks.json").exists() else {}
    missing += [f"check {cid} ({ANCHORS[cid][0]})" for cid in cfg.checks if str(cid) not in checks
                and "checks.json" not in missing]
    if missing:
        raise ArtifactError("missing artifacts: " + ", ".join(missing))
    ordered = [checks[str(c)] for c in cfg.checks] + [v for k, v in sorted(checks.items()) if not k.isdigit()]
    gating = [c for c in ordered if c["gating"]]
    status = "pass" if all(c["verdict"] == "pass" for c in gating) else "fail"
    report = {"status": status, "scenario": cfg.name, "config_hash": cfg.config_hash,
              "failing": [c["anchor"] for c in gating if c["verdict"] != "pass"], "checks": ordered}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    (out / "report.md").write_text(report_markdown(report))
    return report


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, dict):
        return ", ".join(f"{k}={_fmt(x)}" for k, x in v.items())
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def report_markdown(report: dict) -> str:
    lines = [f"# Scenario `{report['scenario']}`: {report['status'].upper()}", "",
             f"config hash `{report['config_hash']}`", ""]
    for c in report["checks"]:
        tag = "" if c["gating"] else " (informational)"
        lines.append(f"## [{c['verdict'].upper()}] {c['id']} {c['name']}{tag}")
        lines.append("")
        lines.append(f"Property: {c['anchor']}")
        lines.append("")
        lines.append("| item | verdict | value | tolerance |")
        lines.append("|---|---|---|---|")
        for it in c["items"]:
            lines.append(f"| {it['label']} | {it['verdict']} | {_fmt(it['value'])} | {_fmt(it['tolerance'])} |")
        if c.get("note"):
            lines += ["", c["note"]]
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

STAGES = {
    "eigensolve": stage_eigensolve,
    "build-table": stage_tables,
    "probes": stage_probes,
    "kernel-grid": stage_kernel_grid,
    "fit-bounds": stage_fit_bounds,
}


def stages_for(cfg: ScenarioConfig) -> list:
    ch = set(cfg.checks)
    names = []
    if ch & {3, 4, 8, 10, 12}:
        names.append("eigensolve")
    if ch & {5}:
        names.append("build-table")
    if ch & {1, 2, 6, 7, 9, 11}:
        names.append("probes")
    if ch & {8, 10, 12}:
        names += ["kernel-grid", "fit-bounds"]
    return names


def run_stage(ctx: RunContext, name: str) -> list:
    t0 = time.perf_counter()
    entries = STAGES[name](ctx)
    ctx.say(f"[{name}] done in {time.perf_counter() - t0:.1f} s")
    return entries


def run_scenario(cfg: ScenarioConfig, out=None, threads: int = 1, log=sys.stderr) -> tuple[int, dict]:
    """Run every stage the scenario needs, then write the report.

    Returns ``(exit status, report)``.
    """
    ctx = open_context(cfg, out, threads, log)
    ctx.path("checks.json").unlink(missing_ok=True)
    for name in stages_for(cfg):
        run_stage(ctx, name)
    report = emit_report(ctx.out)
    return (EXIT_OK if report["status"] == "pass" else EXIT_ACCEPTANCE), report
