"""Dense complex linear algebra kernels.

Everything here works on plain ``numpy`` arrays of dtype ``complex128``
(or real arrays, which are promoted). The Hermitian eigensolver and the
SVD delegate to LAPACK through ``numpy.linalg``; the DFT delegates to
``numpy.fft`` with unitary normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    NotAntiHermitian,
    NotHermitian,
    NotSquare,
    NotUnitary,
)

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-9
#: Seed for the power-iteration start vector. Fixed so reports are reproducible.
POWER_ITERATION_SEED = 20240917


def max_abs(m: np.ndarray) -> float:
    """Max-entry norm."""
    return float(np.max(np.abs(m))) if m.size else 0.0


def _require_square(m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise NotSquare(f"expected a nonempty square matrix, got shape {m.shape}")


def hermitian_defect(m: np.ndarray) -> float:
    return max_abs(m - m.conj().T)


def unitarity_defect(u: np.ndarray) -> float:
    """``max|U^dagger U - I|``."""
    return max_abs(u.conj().T @ u - np.eye(u.shape[0]))


@dataclass(frozen=True)
class HermitianEigen:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.conj().T

    def apply_function(self, f) -> np.ndarray:
        """Return ``Q f(diag(lambda)) Q^dagger`` for a scalar function ``f``."""
        q = self.eigenvectors
        return (q * f(self.eigenvalues)) @ q.conj().T


def hermitian_eig(m: np.ndarray, tol: float = HERMITIAN_TOL) -> HermitianEigen:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Raises
    ------
    NotSquare
        If ``m`` is not square.
    NotHermitian
        If ``max|m - m^dagger| > tol * max(1, max|m|)``.
    ConvergenceFailure
        If LAPACK fails to converge.
    """
    m = np.asarray(m)
    _require_square(m)
    defect = hermitian_defect(m)
    if defect > tol * max(1.0, max_abs(m)):
        raise NotHermitian(f"Hermiticity defect {defect:.3e} exceeds tolerance")
    m = 0.5 * (m + m.conj().T)
    try:
        w, q = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(q))):
        raise ConvergenceFailure("eigensolver returned non-finite values")
    return HermitianEigen(eigenvalues=w, eigenvectors=q)


@dataclass(frozen=True)
class UnitaryMatrix:
    """A dense unitary together with its measured unitarity defect."""

    matrix: np.ndarray
    unitarity_defect: float

    @classmethod
    def from_matrix(cls, m: np.ndarray, tol: float = UNITARY_TOL) -> "UnitaryMatrix":
        m = np.asarray(m, dtype=complex)
        _require_square(m)
        defect = unitarity_defect(m)
        if not defect <= tol:
            raise NotUnitary(f"unitarity defect {defect:.3e} exceeds {tol:.1e}")
        return cls(matrix=m, unitarity_defect=defect)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __matmul__(self, other: "UnitaryMatrix") -> "UnitaryMatrix":
        return UnitaryMatrix.from_matrix(self.matrix @ np.asarray(other))


def expm_antihermitian(g: np.ndarray, tol: float = HERMITIAN_TOL) -> UnitaryMatrix:
    """``exp(g)`` for anti-Hermitian ``g`` via the eigendecomposition of ``i g``.

    Unitary by construction; the returned defect is typically ~1e-15.
    """
    g = np.asarray(g, dtype=complex)
    _require_square(g)
    defect = max_abs(g + g.conj().T)
    if defect > tol * max(1.0, max_abs(g)):
        raise NotAntiHermitian(f"anti-Hermiticity defect {defect:.3e} exceeds tolerance")
    eig = hermitian_eig(1j * g, tol=np.inf)
    return UnitaryMatrix.from_matrix(eig.apply_function(lambda w: np.exp(-1j * w)))


def commutator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y - y @ x


def nested_commutator(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``[[x, y], z]``."""
    for m in (x, y, z):
        _require_square(m)
    if not (x.shape == y.shape == z.shape):
        raise DimensionMismatch(f"shapes {x.shape}, {y.shape}, {z.shape} differ")
    c = commutator(x, y)
    return c @ z - z @ c


@dataclass(frozen=True)
class SpectralNormEstimate:
    value: float
    method: str
    iterations: int
    residual: float

    def __float__(self) -> float:
        return self.value


def _power_iteration(m, tol, max_iter, seed):
    n = m.shape[1]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    mh = m.conj().T
    lam = 0.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        w = mh @ (m @ v)
        lam = float(np.vdot(v, w).real)
        if lam <= 0.0:
            # m v == 0 for a generic start vector means m == 0 numerically
            return 0.0, it, 0.0
        residual = float(np.linalg.norm(w - lam * v)) / lam
        if residual <= tol:
            return float(np.sqrt(lam)), it, residual
        v = w / np.linalg.norm(w)
    raise ConvergenceFailure(
        f"power iteration hit {max_iter} iterations with relative residual {residual:.3e}"
    )


#: Largest dimension for which ``"auto"`` uses a dense LAPACK solve; for
#: these sizes one factorization is cheaper than a Python-level power loop.
AUTO_DENSE_MAX = 1024


def _dense_norm(m: np.ndarray, hermitian: bool) -> SpectralNormEstimate:
    if hermitian:
        w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        return SpectralNormEstimate(float(np.max(np.abs(w))), "exact_eigh", 0, 0.0)
    s = np.linalg.svd(m, compute_uv=False)
    return SpectralNormEstimate(float(s[0]), "exact_svd", 0, 0.0)


def spectral_norm(
    m: np.ndarray,
    method: str = "exact_svd",
    *,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    seed: int = POWER_ITERATION_SEED,
    hermitian: bool = False,
) -> SpectralNormEstimate:
    """Operator 2-norm (largest singular value).

    ``method`` is ``"exact_svd"``, ``"power_iteration"`` (on ``m^dagger m``,
    residual measured relative to the Rayleigh quotient), or ``"auto"``
    (dense solve up to ``AUTO_DENSE_MAX``, above that power iteration with
    a dense fallback on non-convergence). ``hermitian=True`` lets the dense
    path use ``eigvalsh``; the caller guarantees the symmetry.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("spectral_norm needs a nonempty 2-D array")
    if method == "exact_svd":
        return _dense_norm(m, hermitian)
    if method == "auto" and max(m.shape) <= AUTO_DENSE_MAX:
        return _dense_norm(m, hermitian)
    if method in ("power_iteration", "auto"):
        try:
            value, it, res = _power_iteration(m, tol, max_iter, seed)
        except ConvergenceFailure:
            if method == "auto":
                return _dense_norm(m, hermitian)
            raise
        return SpectralNormEstimate(value, "power_iteration", it, res)
    raise ValueError(f"unknown spectral norm method {method!r}")


def opnorm(m: np.ndarray, method: str = "exact_svd") -> float:
    return spectral_norm(m, method).value


def dft_apply(v: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Unitary DFT, ``F_{kj} = exp(-2 pi i jk/N) / sqrt(N)``; ``inverse`` applies ``F^dagger``."""
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("dft_apply expects a nonempty vector")
    return np.fft.ifft(v, norm="ortho") if inverse else np.fft.fft(v, norm="ortho")


def dft_matrix(n: int) -> np.ndarray:
    return np.fft.fft(np.eye(n), axis=0, norm="ortho")
