"""Second-order Magnus steps with Riemann-sum quadrature.

Over ``[t0, t0 + dt]`` with ``M`` cells of width ``h = dt / M`` and nodes
``tau_m``, the exponent is

    Omega = -i h sum_m H(tau_m)  +  (h^2 / 2) sum_m [S_m, H(tau_m)],
    S_m   = sum_{k < m} H(tau_k).

``left_riemann`` uses ``tau_m = t0 + m h`` (first-order accurate);
``midpoint_reference`` uses cell midpoints (second order) and serves as the
exact-exponent stand-in. For the midpoint rule the half-cell contribution of
the inner integral commutes with ``H(tau_m)`` and drops out, so both rules
share the strict ``k < m`` inner sum. Running sums are compensated and the
summation order is fixed (ascending ``m``), so identical inputs give
bit-identical exponents.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDenominator, RegimeViolation
from .linalg import UnitaryMatrix, expm_antihermitian, hermitian_eig
from .propagators import InteractionHamiltonianEvaluator, to_position

RULES = ("left_riemann", "midpoint_reference")
DEFAULT_M_REF = 4096


@dataclass(frozen=True)
class MagnusStepConfig:
    dt: float
    quadrature_points: int = DEFAULT_M_REF
    quadrature_rule: str = "midpoint_reference"
    exponentiation: str = "eig"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.quadrature_points < 1:
            raise ValueError("need at least one quadrature point")
        if self.quadrature_rule not in RULES:
            raise ValueError(f"unknown quadrature rule {self.quadrature_rule!r}")
        if self.exponentiation != "eig":
            raise ValueError(f"unsupported exponentiation {self.exponentiation!r}")
        if self.dt > 1:
            warnings.warn(f"dt={self.dt} > 1 is outside the analysed regime", RegimeViolation)

    def nodes(self, t0: float) -> np.ndarray:
        h = self.dt / self.quadrature_points
        offset = 0.5 if self.quadrature_rule == "midpoint_reference" else 0.0
        return t0 + (np.arange(self.quadrature_points) + offset) * h


@dataclass(frozen=True)
class MagnusExponent:
    omega: np.ndarray
    first_term: np.ndarray
    second_term: np.ndarray


class _Compensated:
    """Kahan-compensated running sum of equally shaped arrays."""

    def __init__(self, shape):
        self.total = np.zeros(shape, dtype=complex)
        self._c = np.zeros(shape, dtype=complex)

    def add(self, x: np.ndarray) -> None:
        y = x - self._c
        t = self.total + y
        self._c = (t - self.total) - y
        self.total = t


def omega2_fourier(ev: InteractionHamiltonianEvaluator, t0: float, cfg: MagnusStepConfig):
    """Fourier-basis ``(first_term, second_term)`` of the quadrature exponent."""
    bh = ev._require_dense()
    h = cfg.dt / cfg.quadrature_points
    n = bh.shape[0]
    s = _Compensated((n, n))
    y = _Compensated((n, n))
    lam = ev.lam
    for tau in cfg.nodes(t0):
        p = np.exp(1j * lam * tau)
        hm = (p[:, None] * bh) * p.conj()[None, :]
        if s.total.any():
            y.add(s.total @ hm)
        s.add(hm)
    first = -1j * h * s.total
    yt = y.total
    # sum_m [S_m, H_m] = Y - Y^dagger since S_m and H_m are Hermitian
    second = 0.5 * h * h * (yt - yt.conj().T)
    return first, second


def _expm_fourier(first, second) -> np.ndarray:
    g = first + second
    g = 0.5 * (g - g.conj().T)
    eig = hermitian_eig(1j * g, tol=np.inf)
    return eig.apply_function(lambda w: np.exp(-1j * w))


def assemble_omega2(ev: InteractionHamiltonianEvaluator, t0: float, cfg: MagnusStepConfig) -> MagnusExponent:
    """Quadrature approximation of the second-order Magnus exponent on ``[t0, t0 + dt]``."""
    first, second = omega2_fourier(ev, t0, cfg)
    first_p = to_position(first, ev.grid)
    second_p = to_position(second, ev.grid)
    return MagnusExponent(omega=first_p + second_p, first_term=first_p, second_term=second_p)


def step_fourier(ev: InteractionHamiltonianEvaluator, t0: float, cfg: MagnusStepConfig) -> np.ndarray:
    return _expm_fourier(*omega2_fourier(ev, t0, cfg))


def magnus_step(ev: InteractionHamiltonianEvaluator, t0: float, cfg: MagnusStepConfig) -> UnitaryMatrix:
    """``exp(Omega)`` for one step starting at ``t0``."""
    return expm_antihermitian(assemble_omega2(ev, t0, cfg).omega)


def _check_steps(T: float, steps: int, cfg: MagnusStepConfig) -> None:
    if not T > 0 or steps < 1:
        raise ValueError(f"need T > 0 and at least one step, got T={T}, L={steps}")
    if not math.isclose(cfg.dt * steps, T, rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError(f"cfg.dt={cfg.dt} does not equal T/L = {T}/{steps}")


def evolve_fourier(ev: InteractionHamiltonianEvaluator, T: float, steps: int, cfg: MagnusStepConfig) -> np.ndarray:
    _check_steps(T, steps, cfg)
    u = np.eye(ev.size, dtype=complex)
    for j in range(steps):
        u = step_fourier(ev, j * T / steps, cfg) @ u
    return u


def evolve(ev: InteractionHamiltonianEvaluator, T: float, steps: int, cfg: MagnusStepConfig) -> UnitaryMatrix:
    """Ordered product of ``steps`` Magnus steps on ``t_j = j T / L``, earliest step rightmost."""
    return UnitaryMatrix.from_matrix(to_position(evolve_fourier(ev, T, steps, cfg), ev.grid))


@dataclass(frozen=True)
class QuadratureEstimate:
    points: int
    raw: float
    log2_points: float


#: Scale that makes the quadrature term of the long-time bound equal the
#: commutator terms (with beta bounded through 4 ||H|| alpha).
QUADRATURE_BALANCE = 24.0


def recommended_quadrature_points(
    T: float,
    dt: float,
    alpha: float,
    alpha_comm_sum: float,
    dh_norm: float,
    balance: float = QUADRATURE_BALANCE,
) -> QuadratureEstimate:
    """Riemann point count balancing quadrature against commutator error.

    ``M = balance * sup||H'|| T (1 + 3 dt alpha) / (dt^2 sum_j alpha_comm^j (13 + 10 dt alpha))``,
    rounded up and clamped to at least 1. Only ``log2 M`` enters circuit
    depth.
    """
    if min(T, dt) <= 0 or alpha < 0 or dh_norm < 0:
        raise ValueError("T and dt must be positive, alpha and dh_norm nonnegative")
    if dh_norm == 0:
        return QuadratureEstimate(points=1, raw=0.0, log2_points=0.0)
    denom = dt * dt * alpha_comm_sum * (13.0 + 10.0 * dt * alpha)
    if not denom > 0:
        raise NonPositiveDenominator(
            "commutator sum is zero: H commutes with itself at all times, any M >= 1 works"
        )
    raw = balance * dh_norm * T * (1.0 + 3.0 * dt * alpha) / denom
    points = max(1, math.ceil(raw))
    return QuadratureEstimate(points=points, raw=raw, log2_points=math.log2(points))
