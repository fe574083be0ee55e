"""Cost counters for the quantum algorithm, evaluated from their asymptotic forms.

All Big-O constants are set to one and logarithms are base 2, so the numbers
are proxies for scaling comparisons, not gate counts of a synthesized
circuit. The unknown analytic constant of the local error bound is replaced
by a measured value ``cv``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DomainError

ORDER = 4  # local error exponent is 1 + ORDER
#: Ancillas of the block encoding of a diagonal potential.
BLOCK_ENCODING_ANCILLAS = 1


@dataclass(frozen=True)
class ComplexityTable:
    T: float
    delta: float
    N: int
    cv: float
    alpha: float
    dh_norm: float
    dt_raw: float
    steps: int
    dt: float
    m_raw: float
    m: int
    log2_m: float
    queries: float
    lcu_gates: float
    qft_gates: float
    other_gates: float
    total_gates: float
    ancillas: int

    def as_dict(self) -> dict:
        return asdict(self)


def qft_gate_proxy(n: int) -> float:
    """``log N * log log N`` elementary gates for an approximate QFT on ``log2 N`` qubits."""
    ln = math.log2(n)
    return ln * math.log2(ln) if ln > 2 else ln


def complexity_table(
    T: float, delta: float, N: int, cv: float, alpha: float, dh_norm: float | None = None
) -> ComplexityTable:
    """Evaluate step size, step count, quadrature points, queries, gates and ancillas.

    ``dh_norm`` is ``sup ||H'||``; it defaults to ``N``, its order of
    magnitude for the finite-difference Laplacian.

    Raises
    ------
    DomainError
        Unless ``0 < delta < 1``, ``T > delta`` and ``cv * T > delta``, or
        if any other input is nonpositive.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if not T > delta:
        raise DomainError(f"need T > delta, got T={T}, delta={delta}")
    if not (cv > 0 and alpha > 0 and N >= 2):
        raise DomainError("cv and alpha must be positive and N >= 2")
    if not cv * T > delta:
        raise DomainError("cv * T <= delta: a single exact step already meets the tolerance")
    dh = float(N) if dh_norm is None else float(dh_norm)
    if not dh > 0:
        raise DomainError("dh_norm must be positive")

    dt_raw = (delta / (cv * T)) ** (1.0 / ORDER)
    steps = max(1, math.ceil(T / dt_raw))
    m_raw = N / dt_raw**3
    m = max(1, math.ceil(m_raw))
    log2_m = math.log2(m)
    scale = T ** (1 + 1 / ORDER) / delta ** (1 / ORDER)
    queries = alpha * T + cv ** (1 / ORDER) * scale * math.log2(cv * T / delta)
    polylog_t = math.log2(T / delta) ** 2
    qft = qft_gate_proxy(N)
    other = math.log2(N) * scale * polylog_t
    ancillas = BLOCK_ENCODING_ANCILLAS + max(0, math.ceil(math.log2(dh * T / (cv * delta))))
    return ComplexityTable(
        T=T,
        delta=delta,
        N=N,
        cv=cv,
        alpha=alpha,
        dh_norm=dh,
        dt_raw=dt_raw,
        steps=steps,
        dt=T / steps,
        m_raw=m_raw,
        m=m,
        log2_m=log2_m,
        queries=queries,
        lcu_gates=(BLOCK_ENCODING_ANCILLAS + log2_m) * queries,
        qft_gates=qft,
        other_gates=other,
        total_gates=qft * scale * polylog_t,
        ancillas=ancillas,
    )


_LABELS = (
    ("dt_raw", "time step (delta/(cv T))^(1/4)"),
    ("steps", "steps L = ceil(T/dt)"),
    ("dt", "time step T/L"),
    ("m_raw", "quadrature points N/dt^3"),
    ("m", "quadrature points M"),
    ("log2_m", "log2 M"),
    ("queries", "block-encoding queries"),
    ("lcu_gates", "LCU gates (n_a + log2 M) * queries"),
    ("qft_gates", "QFT gates log N loglog N"),
    ("other_gates", "non-oracle gates log N T^(5/4) delta^(-1/4) log^2(T/delta)"),
    ("total_gates", "total gates polylog(N) T^(5/4) delta^(-1/4) log^2(T/delta)"),
    ("ancillas", "ancilla qubits"),
)


def format_table(t: ComplexityTable) -> str:
    head = f"T={t.T:g} delta={t.delta:g} N={t.N} cv={t.cv:g} alpha={t.alpha:g} dH={t.dh_norm:g}"
    width = max(len(lbl) for _, lbl in _LABELS)
    lines = [head]
    for key, lbl in _LABELS:
        v = getattr(t, key)
        lines.append(f"{lbl:<{width}}  {v:.6g}" if isinstance(v, float) else f"{lbl:<{width}}  {v}")
    return "\n".join(lines) + "\n"
