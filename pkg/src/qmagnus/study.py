"""Convergence, uniformity, quadrature and bound-check sweeps.

Every study is a list of independent cells. A cell builds (or reuses) the
dense evaluator for its grid, computes its rows, and returns them. Rows are
sorted ascending by ``(study_kind, N, dt, M)`` before they reach a report,
so output does not depend on execution order or worker count.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats

from .diagnostics import DEFAULT_SAMPLES, in_theorem_regime, scan_alpha, scan_commutators, superconvergence_constant
from .discretization import PotentialSpec, SpatialGrid
from .errors import AllPointsFloored, BoundViolation, InsufficientPoints, NotUnitary, QuadratureContamination, RegimeViolation
from .linalg import POWER_ITERATION_SEED, UNITARY_TOL, opnorm, unitarity_defect
from .magnus import DEFAULT_M_REF, MagnusStepConfig, evolve_fourier, recommended_quadrature_points, step_fourier
from .propagators import cached_evaluator

STUDY_KINDS = ("order", "uniformity", "quadrature", "theorem1_check", "theorem3_scan")
ERROR_FLOOR = 1e-14
DEGENERATE_ERROR = 1e-10
M_CAP = 65536

BASE_COLUMNS = (
    "study_kind", "N", "d", "dt", "M", "T", "error", "alpha_sup", "beta_sup",
    "bound_rhs", "slack", "wall_time_s",
)
EXTRA_COLUMNS = {"theorem3_scan": ("C_hat",)}


def columns_for(kind: str) -> tuple[str, ...]:
    return BASE_COLUMNS + EXTRA_COLUMNS.get(kind, ()) + ("flags",)


@dataclass(frozen=True)
class MPolicy:
    kind: str = "reference"
    m: int = DEFAULT_M_REF

    def __post_init__(self):
        if self.kind not in ("fixed", "reference", "paper_formula"):
            raise ValueError(f"unknown M policy {self.kind!r}")
        if self.m < 1:
            raise ValueError("M must be >= 1")

    @classmethod
    def fixed(cls, m: int) -> "MPolicy":
        return cls("fixed", m)

    @classmethod
    def reference(cls, m: int = DEFAULT_M_REF) -> "MPolicy":
        return cls("reference", m)

    @classmethod
    def paper_formula(cls) -> "MPolicy":
        return cls("paper_formula", 1)

    def describe(self) -> str:
        return self.kind if self.kind == "paper_formula" else f"{self.kind}({self.m})"


@dataclass(frozen=True)
class Tolerances:
    fit_floor: float = ERROR_FLOOR
    uniformity_ratio: float = 2.0
    contamination_fraction: float = 0.01
    bound_slack: float = 1e-12
    unitarity: float = UNITARY_TOL


@dataclass(frozen=True)
class StudyGrid:
    """One sweep. ``m_list`` is only used by quadrature studies."""

    potential: PotentialSpec
    study_kind: str
    n_list: tuple[int, ...]
    dt_list: tuple[float, ...]
    T: float = 1.0
    d: int = 1
    a: float = 0.0
    b: float = 1.0
    m_policy: MPolicy = field(default_factory=MPolicy)
    m_list: tuple[int, ...] = (16, 32, 64, 128, 256)
    samples_per_axis: int = DEFAULT_SAMPLES
    refine: bool = True
    bounds: bool = True
    contrast: bool = False
    wall_time: bool = False
    seed: int = POWER_ITERATION_SEED
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.study_kind not in STUDY_KINDS:
            raise ValueError(f"unknown study kind {self.study_kind!r}")
        if not self.n_list or not self.dt_list:
            raise ValueError("n_list and dt_list must be nonempty")
        if any(dt <= 0 for dt in self.dt_list):
            raise ValueError("every dt must be positive")
        if list(self.dt_list) != sorted(set(self.dt_list), reverse=True):
            raise ValueError("dt_list must be strictly decreasing")
        if not self.T > 0:
            raise ValueError("T must be positive")
        for n in self.n_list:
            g = self.grid(n)
            if not g.dense_ok:
                raise ValueError(f"N^d = {g.size} exceeds the dense cap for norm-based studies")

    def grid(self, n: int) -> SpatialGrid:
        return SpatialGrid(n=n, d=self.d, a=self.a, b=self.b)


@dataclass(frozen=True)
class StudyRow:
    study_kind: str
    N: int
    d: int
    dt: float
    M: int
    T: float
    error: float
    alpha_sup: float | None = None
    beta_sup: float | None = None
    bound_rhs: float | None = None
    slack: float | None = None
    wall_time_s: float | None = None
    C_hat: float | None = None
    flags: tuple[str, ...] = ()

    def sort_key(self):
        return (self.study_kind, self.N, self.dt, self.M, self.flags)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["flags"] = list(self.flags)
        return out


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    max_residual: float
    ci95: float
    n_points: int
    excluded: tuple[float, ...] = ()


@dataclass
class ConvergenceReport:
    study_kind: str
    rows: list[StudyRow]
    fits: dict[str, FitResult | None] = field(default_factory=dict)
    uniformity_ratios: dict[str, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def columns(self) -> tuple[str, ...]:
        return columns_for(self.study_kind)

    @property
    def violations(self) -> list[StudyRow]:
        return [r for r in self.rows if "bound_violation" in r.flags]


# Fitting ------------------------------------------------------------------


def fit_order(points, floor: float = ERROR_FLOOR) -> FitResult:
    """Least-squares slope of ``log(error)`` against ``log(dt)``.

    Points with ``error <= floor`` are excluded (their ``dt`` is listed in
    ``excluded``). ``ci95`` is the half-width of the 95% interval on the
    slope, NaN with only two points.

    Raises
    ------
    InsufficientPoints
        Fewer than two points supplied, or fewer than two distinct ``dt``.
    AllPointsFloored
        Fewer than two points left above the floor.
    """
    pts = [(float(x), float(e)) for x, e in points]
    if len(pts) < 2:
        raise InsufficientPoints(f"need at least 2 points, got {len(pts)}")
    kept = [(x, e) for x, e in pts if e > floor and np.isfinite(e)]
    excluded = tuple(x for x, e in pts if not (e > floor and np.isfinite(e)))
    if len(kept) < 2:
        raise AllPointsFloored(f"only {len(kept)} of {len(pts)} points lie above the floor {floor:g}")
    x = np.log([p[0] for p in kept])
    y = np.log([p[1] for p in kept])
    if np.ptp(x) == 0:
        raise InsufficientPoints("all dt values coincide")
    res = stats.linregress(x, y)
    resid = y - (res.intercept + res.slope * x)
    n = len(kept)
    ci = float(stats.t.ppf(0.975, n - 2) * res.stderr) if n > 2 else float("nan")
    return FitResult(
        slope=float(res.slope),
        intercept=float(res.intercept),
        max_residual=float(np.max(np.abs(resid))),
        ci95=ci,
        n_points=n,
        excluded=excluded,
    )


def _try_fit(points, floor):
    try:
        return fit_order(points, floor)
    except InsufficientPoints:
        return None


# Cells --------------------------------------------------------------------


def _steps(T: float, dt: float) -> int:
    L = round(T / dt)
    if L < 1 or not math.isclose(L * dt, T, rel_tol=1e-9):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return L


def _checked(u: np.ndarray, tol: float) -> np.ndarray:
    defect = unitarity_defect(u)
    if not defect <= tol:
        raise NotUnitary(f"propagator unitarity defect {defect:.3e} exceeds {tol:.1e}")
    return u


def _regime_flags(n: int, dt: float) -> tuple[str, ...]:
    if in_theorem_regime(n, dt):
        return ()
    warnings.warn(f"dt={dt} outside [1/N, 1] for N={n}", RegimeViolation)
    return ("out_of_regime",)


def _local_bound(dt: float, alpha: float, beta: float) -> float:
    return 13.0 / 24.0 * dt**3 * alpha + 5.0 / 48.0 * dt**4 * beta


def _quadrature_bound(dt: float, m: int, b_norm: float, dh_norm: float) -> float:
    return dt * dt / m * dh_norm + 3.0 * dt**3 / m * b_norm * dh_norm


def _resolve_config(g: StudyGrid, ev, T, dt, L, alpha):
    """Step config and flags for the grid's M policy."""
    pol = g.m_policy
    if pol.kind == "reference":
        return MagnusStepConfig(T / L, pol.m, "midpoint_reference"), ()
    if pol.kind == "fixed":
        return MagnusStepConfig(T / L, pol.m, "left_riemann"), ()
    if alpha is None:
        alpha = scan_alpha(ev, 0.0, dt, g.samples_per_axis, refine=g.refine, seed=g.seed).alpha_sup
    est = recommended_quadrature_points(T, dt, ev.b_norm(), L * alpha, ev.commutator_ab_norm())
    flags = ("m_capped",) if est.points > M_CAP else ()
    return MagnusStepConfig(T / L, min(est.points, M_CAP), "left_riemann"), flags


def _contamination(ev, cfg: MagnusStepConfig, T: float, L: int, u: np.ndarray, limit: float) -> float:
    """Richardson estimate of the reference quadrature error in ``u`` over ``L`` steps.

    ``L`` times the first-step estimate is cheap but assumes step errors add
    coherently, which overstates them; only when it exceeds ``limit`` is the
    whole product recomputed with ``M / 2`` points.
    """
    if cfg.quadrature_rule != "midpoint_reference" or cfg.quadrature_points < 2:
        return 0.0
    half = replace(cfg, quadrature_points=cfg.quadrature_points // 2)
    first = u if L == 1 else step_fourier(ev, 0.0, cfg)
    q = L * opnorm(first - step_fourier(ev, 0.0, half)) / 3.0
    if q <= limit or L == 1:
        return q
    return opnorm(u - evolve_fourier(ev, T, L, half)) / 3.0


def _long_time_cell(g: StudyGrid, n: int, dt: float, extra_flags: tuple[str, ...] = ()) -> list[StudyRow]:
    t_start = time.perf_counter()
    ev = cached_evaluator(g.grid(n), g.potential)
    tol = g.tolerances
    T = g.T
    L = _steps(T, dt)
    flags = list(extra_flags) + list(_regime_flags(n, dt))
    alpha = beta = bound = None
    if g.bounds:
        scan = scan_commutators(ev, 0.0, dt, g.samples_per_axis, refine=g.refine, seed=g.seed)
        alpha, beta = scan.alpha_sup, scan.beta_sup
        # conjugation makes the suprema identical on every step interval
        bound = L * _local_bound(T / L, alpha, beta)
    cfg, mflags = _resolve_config(g, ev, T, dt, L, alpha)
    flags += mflags
    u = _checked(evolve_fourier(ev, T, L, cfg), tol.unitarity)
    exact = _checked(ev.exact_fourier(T, 0.0), tol.unitarity)
    err = opnorm(u - exact)
    if bound is not None and cfg.quadrature_rule == "left_riemann":
        bound += L * _quadrature_bound(T / L, cfg.quadrature_points, ev.b_norm(), ev.commutator_ab_norm())
    limit = tol.contamination_fraction * err
    q = _contamination(ev, cfg, T, L, u, limit) if err > DEGENERATE_ERROR else 0.0
    if q > limit:
        warnings.warn(
            f"N={n} dt={dt}: reference quadrature error {q:.2e} exceeds "
            f"{tol.contamination_fraction:.0%} of measured error {err:.2e}",
            QuadratureContamination,
        )
        flags.append("quadrature_contaminated")
    if bound is not None and err > bound + tol.bound_slack:
        flags.append("bound_violation")
    return [
        StudyRow(
            study_kind=g.study_kind,
            N=n,
            d=g.d,
            dt=float(dt),
            M=cfg.quadrature_points,
            T=float(T),
            error=float(err),
            alpha_sup=alpha,
            beta_sup=beta,
            bound_rhs=bound,
            slack=None if bound is None else bound - err,
            wall_time_s=(time.perf_counter() - t_start) if g.wall_time else None,
            flags=tuple(flags),
        )
    ]


def _quadrature_cell(g: StudyGrid, n: int, dt: float) -> list[StudyRow]:
    ev = cached_evaluator(g.grid(n), g.potential)
    tol = g.tolerances
    T = g.T
    L = _steps(T, dt)
    base = _regime_flags(n, dt)
    m_ref = g.m_policy.m if g.m_policy.kind == "reference" else DEFAULT_M_REF
    t0 = time.perf_counter()
    ref = _checked(evolve_fourier(ev, T, L, MagnusStepConfig(T / L, m_ref, "midpoint_reference")), tol.unitarity)
    ref_time = time.perf_counter() - t0
    b_norm, dh = ev.b_norm(), ev.commutator_ab_norm()
    rows = []
    for m in g.m_list:
        t0 = time.perf_counter()
        u = _checked(evolve_fourier(ev, T, L, MagnusStepConfig(T / L, m, "left_riemann")), tol.unitarity)
        err = opnorm(u - ref)
        bound = L * _quadrature_bound(T / L, m, b_norm, dh)
        flags = list(base)
        if err > bound + tol.bound_slack:
            flags.append("bound_violation")
        rows.append(
            StudyRow(
                study_kind="quadrature",
                N=n,
                d=g.d,
                dt=float(dt),
                M=int(m),
                T=float(T),
                error=float(err),
                bound_rhs=bound,
                slack=bound - err,
                wall_time_s=(time.perf_counter() - t0 + ref_time) if g.wall_time else None,
                flags=tuple(flags),
            )
        )
    return rows


def _theorem1_cell(g: StudyGrid, n: int, dt: float) -> list[StudyRow]:
    t_start = time.perf_counter()
    ev = cached_evaluator(g.grid(n), g.potential)
    tol = g.tolerances
    flags = list(_regime_flags(n, dt))
    m_ref = g.m_policy.m
    cfg = MagnusStepConfig(dt, m_ref, "midpoint_reference")
    u = _checked(step_fourier(ev, 0.0, cfg), tol.unitarity)
    exact = _checked(ev.exact_fourier(dt, 0.0), tol.unitarity)
    err = opnorm(u - exact)
    scan = scan_commutators(ev, 0.0, dt, g.samples_per_axis, refine=g.refine, seed=g.seed)
    bound = _local_bound(dt, scan.alpha_sup, scan.beta_sup)
    limit = tol.contamination_fraction * err
    q = _contamination(ev, cfg, dt, 1, u, limit) if err > DEGENERATE_ERROR else 0.0
    if q > limit:
        warnings.warn(f"N={n} dt={dt}: reference quadrature error {q:.2e} vs error {err:.2e}", QuadratureContamination)
        flags.append("quadrature_contaminated")
    if err > bound + tol.bound_slack:
        flags.append("bound_violation")
    return [
        StudyRow(
            study_kind="theorem1_check",
            N=n,
            d=g.d,
            dt=float(dt),
            M=m_ref,
            T=float(dt),
            error=float(err),
            alpha_sup=scan.alpha_sup,
            beta_sup=scan.beta_sup,
            bound_rhs=bound,
            slack=bound - err,
            wall_time_s=(time.perf_counter() - t_start) if g.wall_time else None,
            flags=tuple(flags),
        )
    ]


def _theorem3_cell(g: StudyGrid, n: int) -> list[StudyRow]:
    ev = cached_evaluator(g.grid(n), g.potential)
    rows = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RegimeViolation)
        t0 = time.perf_counter()
        table = superconvergence_constant(ev, g.dt_list, g.samples_per_axis, refine=g.refine, seed=g.seed)
        elapsed = time.perf_counter() - t0
    for w in caught:
        warnings.warn(w.message, w.category)
    for r in table:
        rows.append(
            StudyRow(
                study_kind="theorem3_scan",
                N=n,
                d=g.d,
                dt=r.dt,
                M=0,
                T=r.dt,
                error=r.sup_norm,
                alpha_sup=r.sup_norm,
                wall_time_s=elapsed / len(table) if g.wall_time else None,
                C_hat=r.ratio,
                flags=() if r.in_regime else ("out_of_regime",),
            )
        )
    return rows


# Orchestration --------------------------------------------------------------


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: ``QMAGNUS_WORKERS`` overrides the argument; default 1."""
    env = os.environ.get("QMAGNUS_WORKERS")
    if env:
        try:
            workers = int(env)
        except ValueError as exc:
            raise ValueError(f"QMAGNUS_WORKERS must be an integer, got {env!r}") from exc
    workers = 1 if workers is None else workers
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    return workers


def _run_cells(fn, cells, workers):
    if workers <= 1 or len(cells) <= 1:
        return [fn(*c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*cells)))


def _collect(results) -> list[StudyRow]:
    rows = [r for chunk in results for r in chunk]
    return sorted(rows, key=StudyRow.sort_key)


def _metadata(g: StudyGrid, workers: int) -> dict:
    from . import __version__

    return {
        "version": __version__,
        "seed": g.seed,
        "potential": g.potential.describe(),
        "smooth_potential": g.potential.smooth,
        "interval": [g.a, g.b],
        "d": g.d,
        "m_policy": g.m_policy.describe(),
        "samples_per_axis": g.samples_per_axis,
        "refine": g.refine,
        "tolerances": asdict(g.tolerances),
        "thresholds_are_harness_choices": True,
        "workers": workers,
    }


def _require(g: StudyGrid, kind: str):
    if g.study_kind != kind:
        raise ValueError(f"expected a {kind!r} study grid, got {g.study_kind!r}")


def _fits_by_n(rows, floor, column="error"):
    fits, degenerate = {}, []
    for n in sorted({r.N for r in rows}):
        sub = [r for r in rows if r.N == n and "contrast" not in r.flags]
        pts = [(r.dt, getattr(r, column)) for r in sub if getattr(r, column) is not None]
        if column == "error" and all(e <= DEGENERATE_ERROR for _, e in pts):
            fits[f"N={n}"] = None
            degenerate.append(n)
            continue
        fits[f"N={n}" if column == "error" else f"N={n}:{column}"] = _try_fit(pts, floor)
    return fits, degenerate


def run_order_study(g: StudyGrid, workers: int | None = None) -> ConvergenceReport:
    """Long-time error against the exact propagator for each ``(N, dt)``; slope per N."""
    _require(g, "order")
    w = resolve_workers(workers)
    cells = [(g, n, dt, ()) for n in g.n_list for dt in g.dt_list]
    rows = _collect(_run_cells(_long_time_cell, cells, w))
    fits, degenerate = _fits_by_n(rows, g.tolerances.fit_floor)
    rep = ConvergenceReport("order", rows, fits=fits, metadata=_metadata(g, w))
    if degenerate:
        rep.flags.append("degenerate:" + ",".join(f"N={n}" for n in degenerate))
    return rep


def _ratio(errors) -> float:
    errors = list(errors)
    if max(errors) <= DEGENERATE_ERROR:
        return 1.0
    lo = min(errors)
    return float("inf") if lo == 0 else max(errors) / lo


def run_uniformity_study(g: StudyGrid, workers: int | None = None) -> ConvergenceReport:
    """Long-time errors across ``N`` at fixed ``dt``; ratio max/min per ``dt``.

    With ``contrast`` set, extra rows at ``dt = 1/N`` (the regime edge) are
    added and tagged ``contrast``; they do not enter the ratios.
    """
    _require(g, "uniformity")
    w = resolve_workers(workers)
    cells = [(g, n, dt, ()) for dt in g.dt_list for n in g.n_list]
    if g.contrast:
        cells += [(g, n, g.T / _steps(g.T, 1.0 / n), ("contrast",)) for n in g.n_list]
    rows = _collect(_run_cells(_long_time_cell, cells, w))
    ratios = {}
    for dt in g.dt_list:
        errs = [r.error for r in rows if r.dt == dt and "contrast" not in r.flags]
        ratios[f"dt={dt!r}"] = _ratio(errs)
    rep = ConvergenceReport("uniformity", rows, uniformity_ratios=ratios, metadata=_metadata(g, w))
    bad = [k for k, v in ratios.items() if v > g.tolerances.uniformity_ratio]
    if bad:
        rep.flags.append("uniformity_exceeded:" + ",".join(bad))
    return rep


def run_quadrature_study(g: StudyGrid, workers: int | None = None) -> ConvergenceReport:
    """Left-Riemann product against the midpoint reference, per ``M``; slope target -1."""
    _require(g, "quadrature")
    w = resolve_workers(workers)
    cells = [(g, n, dt) for n in g.n_list for dt in g.dt_list]
    rows = _collect(_run_cells(_quadrature_cell, cells, w))
    fits = {}
    for n in g.n_list:
        for dt in g.dt_list:
            pts = [(r.M, r.error) for r in rows if r.N == n and r.dt == dt]
            fits[f"N={n},dt={dt!r}"] = _try_fit(pts, g.tolerances.fit_floor)
    return ConvergenceReport("quadrature", rows, fits=fits, metadata=_metadata(g, w))


def run_theorem1_check(g: StudyGrid, workers: int | None = None) -> ConvergenceReport:
    """Single-step error against the local commutator bound; raises on any violation."""
    _require(g, "theorem1_check")
    w = resolve_workers(workers)
    cells = [(g, n, dt) for n in g.n_list for dt in g.dt_list]
    rows = _collect(_run_cells(_theorem1_cell, cells, w))
    fits, degenerate = _fits_by_n(rows, g.tolerances.fit_floor)
    if len(g.dt_list) >= 2:
        rhs_fits, _ = _fits_by_n(rows, g.tolerances.fit_floor, column="bound_rhs")
        fits.update(rhs_fits)
    rep = ConvergenceReport("theorem1_check", rows, fits=fits, metadata=_metadata(g, w))
    if degenerate:
        rep.flags.append("degenerate:" + ",".join(f"N={n}" for n in degenerate))
    if rep.violations:
        cells_txt = ", ".join(f"(N={r.N}, dt={r.dt:g})" for r in rep.violations)
        raise BoundViolation(f"local error bound violated at {cells_txt}", report=rep)
    return rep


def run_theorem3_scan(g: StudyGrid, workers: int | None = None) -> ConvergenceReport:
    """Implied constants ``C(N, dt)``; slope of the supremum per N and spread of ``C`` across N."""
    _require(g, "theorem3_scan")
    w = resolve_workers(workers)
    rows = _collect(_run_cells(_theorem3_cell, [(g, n) for n in g.n_list], w))
    fits, _ = _fits_by_n(rows, g.tolerances.fit_floor)
    spreads = {}
    for dt in g.dt_list:
        c = [r.C_hat for r in rows if r.dt == dt]
        spreads[f"dt={dt!r}"] = _ratio(c) if max(c) > 0 else 1.0
    return ConvergenceReport("theorem3_scan", rows, fits=fits, uniformity_ratios=spreads, metadata=_metadata(g, w))


_RUNNERS = {
    "order": run_order_study,
    "uniformity": run_uniformity_study,
    "quadrature": run_quadrature_study,
    "theorem1_check": run_theorem1_check,
    "theorem3_scan": run_theorem3_scan,
}


def run_study(g: StudyGrid, workers: int | None = None) -> ConvergenceReport:
    return _RUNNERS[g.study_kind](g, workers)
