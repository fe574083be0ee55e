"""Nested-commutator suprema of the interaction-picture Hamiltonian.

Conjugating by ``exp(-iA t)`` removes one time variable: with ``D = t_hi -
t_lo``,

    [[H(sigma), H(s)], H(t)]            ~  [[B, H(s - sigma)], H(t - sigma)]
    [[H(sigma), H(s)], [H(tau), H(t)]]  ~  [[H(a), H(b)], [H(c), B]]

(``~`` meaning unitarily equivalent, so equal spectral norms). Scans work in
the position basis where ``B`` is diagonal and ``[B, X]`` is an elementwise
product. Two sample domains are offered:

``"square"``
    every shifted time in ``[-D, D]``; this is the form in which the uniform
    bound is stated and contains the exact image of the original domain.
``"interval"``
    additionally every pairwise difference in ``[-D, D]``; this is exactly
    the image of ``[t_lo, t_hi]^n`` under the conjugation.

Grids are ``k`` equispaced points per axis (nested under ``k -> 2k - 1``),
followed by an optional local pass of ``k`` points per axis spanning one
coarse spacing either side of the argmax. Maxima are reduced in ascending
lexicographic order of the sample tuple and only a strictly larger value
replaces the incumbent, so ties resolve to the smallest tuple.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import RegimeViolation
from .linalg import POWER_ITERATION_SEED, spectral_norm
from .propagators import InteractionHamiltonianEvaluator, _evaluator

DEFAULT_SAMPLES = 17
_DOMAINS = ("square", "interval")
_EPS = 1e-12


@dataclass(frozen=True)
class CommutatorScan:
    """Grid suprema of the nested commutators over one step interval.

    ``alpha_sup`` / ``beta_sup`` are None when that family was not scanned.
    ``argmax_times`` maps ``"alpha"`` to ``(tau', s')`` and ``"beta"`` to
    ``(a, b, c)`` in shifted coordinates.
    """

    interval: tuple[float, float]
    samples_per_axis: int
    alpha_sup: float | None
    beta_sup: float | None
    argmax_times: dict = field(default_factory=dict)
    n_evals: int = 0
    refined: bool = True
    domain: dict = field(default_factory=dict)
    norm_method: str = "auto"

    def merge(self, other: "CommutatorScan") -> "CommutatorScan":
        if self.interval != other.interval or self.samples_per_axis != other.samples_per_axis:
            raise ValueError("can only merge scans of the same interval and grid")
        return CommutatorScan(
            interval=self.interval,
            samples_per_axis=self.samples_per_axis,
            alpha_sup=self.alpha_sup if self.alpha_sup is not None else other.alpha_sup,
            beta_sup=self.beta_sup if self.beta_sup is not None else other.beta_sup,
            argmax_times={**other.argmax_times, **self.argmax_times},
            n_evals=self.n_evals + other.n_evals,
            refined=self.refined and other.refined,
            domain={**other.domain, **self.domain},
            norm_method=self.norm_method,
        )


class _PositionCache:
    """Position-basis ``H(t)`` keyed by the float time."""

    def __init__(self, ev: InteractionHamiltonianEvaluator):
        self.ev = ev
        self.b = np.asarray(ev.hamiltonian.b_diag, dtype=complex)
        self._h: dict[float, np.ndarray] = {}

    def h(self, t: float) -> np.ndarray:
        t = float(t)
        if t not in self._h:
            self._h[t] = self.ev.position_h(t)
        return self._h[t]

    def comm_b(self, x: np.ndarray) -> np.ndarray:
        """``[B, x]`` for diagonal ``B``."""
        return self.b[:, None] * x - x * self.b[None, :]


def _norm(m: np.ndarray, method: str, seed: int) -> float:
    """Norm of a Hermitian integrand.

    ``auto`` caps power iteration early: the top singular values of these
    integrands come in near-degenerate pairs, where the dense fallback is
    cheaper than waiting out the slow convergence.
    """
    max_iter = 500 if method == "auto" else 100_000
    return spectral_norm(m, method, max_iter=max_iter, seed=seed, hermitian=True).value


def _in_domain(point: tuple[float, ...], d: float, domain: str) -> bool:
    if any(abs(x) > d * (1 + _EPS) for x in point):
        return False
    if domain == "interval":
        for x, y in itertools.combinations(point, 2):
            if abs(x - y) > d * (1 + _EPS):
                return False
    return True


def _axis(d: float, k: int) -> np.ndarray:
    return np.linspace(-d, d, k)


def _local_axis(center: float, spacing: float, d: float, k: int) -> np.ndarray:
    lo = max(-d, center - spacing)
    hi = min(d, center + spacing)
    return np.linspace(lo, hi, k)


def _check_args(ev, t_lo, t_hi, k, domain):
    ev._require_dense()
    if not t_hi > t_lo:
        raise ValueError(f"need t_hi > t_lo, got ({t_lo}, {t_hi})")
    if k < 2:
        raise ValueError(f"need at least 2 samples per axis, got {k}")
    if domain not in _DOMAINS:
        raise ValueError(f"unknown domain {domain!r}; expected one of {_DOMAINS}")


def _argmax_scan(points, value):
    best, arg, n = -1.0, None, 0
    for p in sorted(points):
        v = value(p)
        n += 1
        if v > best:
            best, arg = v, p
    return best, arg, n


def scan_alpha(
    ev: InteractionHamiltonianEvaluator,
    t_lo: float,
    t_hi: float,
    k: int = DEFAULT_SAMPLES,
    *,
    domain: str = "square",
    refine: bool = True,
    norm: str = "auto",
    seed: int = POWER_ITERATION_SEED,
) -> CommutatorScan:
    """Supremum of ``||[[B, H(tau')], H(s')]||`` over shifted times in ``[-D, D]``."""
    _check_args(ev, t_lo, t_hi, k, domain)
    d = t_hi - t_lo
    cache = _PositionCache(ev)
    inner: dict[float, np.ndarray] = {}

    def value(p):
        tau, s = p
        if tau not in inner:
            inner[tau] = cache.comm_b(cache.h(tau))
        c = inner[tau] @ cache.h(s)
        # [C, H] = C H + (C H)^dagger for anti-Hermitian C, Hermitian H
        return _norm(c + c.conj().T, norm, seed)

    ax = _axis(d, k)
    pts = [p for p in itertools.product(ax, ax) if _in_domain(p, d, domain)]
    best, arg, n = _argmax_scan(pts, value)
    if refine and best > 0:
        sp = ax[1] - ax[0]
        loc = [_local_axis(c, sp, d, k) for c in arg]
        pts = [p for p in itertools.product(*loc) if _in_domain(p, d, domain)]
        b2, a2, n2 = _argmax_scan(pts, value)
        n += n2
        if b2 > best:
            best, arg = b2, a2
    return CommutatorScan(
        interval=(float(t_lo), float(t_hi)),
        samples_per_axis=k,
        alpha_sup=max(best, 0.0),
        beta_sup=None,
        argmax_times={"alpha": tuple(float(x) for x in arg)},
        n_evals=n,
        refined=refine,
        domain={"alpha": domain},
        norm_method=norm,
    )


def scan_beta(
    ev: InteractionHamiltonianEvaluator,
    t_lo: float,
    t_hi: float,
    k: int = DEFAULT_SAMPLES,
    *,
    domain: str = "interval",
    refine: bool = True,
    norm: str = "auto",
    seed: int = POWER_ITERATION_SEED,
) -> CommutatorScan:
    """Supremum of ``||[[H(a), H(b)], [H(c), B]]||`` over shifted times.

    Swapping ``a`` and ``b`` only flips the sign and ``a = b`` gives zero, so
    only ``a < b`` is evaluated. The default ``"interval"`` domain keeps
    every difference of sample times inside the alpha square, which makes
    ``beta_sup <= 4 ||B|| alpha_sup`` hold sample by sample.
    """
    _check_args(ev, t_lo, t_hi, k, domain)
    d = t_hi - t_lo
    cache = _PositionCache(ev)
    outer: dict[tuple[float, float], np.ndarray] = {}
    right: dict[float, np.ndarray] = {}

    def value(p):
        a, b, c = p
        if b <= a:
            return 0.0
        if (a, b) not in outer:
            x = cache.h(a) @ cache.h(b)
            outer[(a, b)] = x - x.conj().T
        if c not in right:
            right[c] = -cache.comm_b(cache.h(c))
        xy = outer[(a, b)] @ right[c]
        # [X, Y] = X Y - (X Y)^dagger for anti-Hermitian X, Y
        return _norm(1j * (xy - xy.conj().T), norm, seed)

    def grid_points(axes):
        return [p for p in itertools.product(*axes) if p[0] < p[1] and _in_domain(p, d, domain)]

    ax = _axis(d, k)
    best, arg, n = _argmax_scan(grid_points([ax, ax, ax]), value)
    if arg is None:
        best, arg = 0.0, (float(ax[0]),) * 3
    if refine and best > 0:
        sp = ax[1] - ax[0]
        loc = [_local_axis(c, sp, d, k) for c in arg]
        b2, a2, n2 = _argmax_scan(grid_points(loc), value)
        n += n2
        if b2 > best:
            best, arg = b2, a2
    return CommutatorScan(
        interval=(float(t_lo), float(t_hi)),
        samples_per_axis=k,
        alpha_sup=None,
        beta_sup=max(best, 0.0),
        argmax_times={"beta": tuple(float(x) for x in arg)},
        n_evals=n,
        refined=refine,
        domain={"beta": domain},
        norm_method=norm,
    )


def scan_commutators(
    ev, t_lo, t_hi, k=DEFAULT_SAMPLES, *, refine=True, norm="auto", seed=POWER_ITERATION_SEED
) -> CommutatorScan:
    """Both suprema with their default domains."""
    return scan_alpha(ev, t_lo, t_hi, k, refine=refine, norm=norm, seed=seed).merge(
        scan_beta(ev, t_lo, t_hi, k, refine=refine, norm=norm, seed=seed)
    )


@dataclass(frozen=True)
class SuperconvergenceRow:
    dt: float
    sup_norm: float
    ratio: float
    in_regime: bool
    argmax: tuple[float, float]


def in_theorem_regime(n: int, dt: float) -> bool:
    return 1.0 / n <= dt * (1 + _EPS) and dt <= 1.0


def superconvergence_constant(
    h,
    dt_list,
    k: int = DEFAULT_SAMPLES,
    *,
    refine: bool = True,
    norm: str = "auto",
    seed: int = POWER_ITERATION_SEED,
) -> list[SuperconvergenceRow]:
    """Implied constant ``C(N, dt) = sup ||[[B, H(tau)], H(s)]|| / dt^2`` over ``[-dt, dt]^2``.

    Rows with ``dt`` outside ``[1/N, 1]`` are still computed, tagged
    ``in_regime=False``, and trigger a :class:`RegimeViolation` warning.
    """
    ev = _evaluator(h)
    rows = []
    for dt in dt_list:
        dt = float(dt)
        ok = in_theorem_regime(ev.grid.n, dt)
        if not ok:
            warnings.warn(f"dt={dt} outside [1/N, 1] for N={ev.grid.n}", RegimeViolation)
        scan = scan_alpha(ev, 0.0, dt, k, refine=refine, norm=norm, seed=seed)
        rows.append(
            SuperconvergenceRow(
                dt=dt,
                sup_norm=scan.alpha_sup,
                ratio=scan.alpha_sup / dt**2,
                in_regime=ok,
                argmax=scan.argmax_times["alpha"],
            )
        )
    return rows
