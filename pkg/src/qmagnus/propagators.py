"""Free, interaction-picture and exact propagators.

Internally everything is carried in the Fourier basis where ``A`` is
diagonal: with ``F`` the unitary (tensor-product) DFT and ``B_hat = F B
F^dagger``, the interaction-picture Hamiltonian is the elementwise phase

    F H_I(t) F^dagger = B_hat[j, l] * exp(i (lambda_j - lambda_l) t).

Operator norms and unitarity are basis independent, so the stepping and
error-measurement code never leaves this basis. Public functions return
position-basis matrices.
"""

from __future__ import annotations

import threading
from functools import lru_cache
from typing import Callable

import numpy as np

from .discretization import DiscreteHamiltonian, SpatialGrid, build_hamiltonian
from .errors import DenseModeRequired
from .linalg import HermitianEigen, UnitaryMatrix, hermitian_eig, opnorm


def _axes(d: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    return tuple(range(d)), tuple(range(d, 2 * d))


def to_fourier(x: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """``F x F^dagger``."""
    rows, cols = _axes(grid.d)
    t = np.asarray(x, dtype=complex).reshape(grid.shape + grid.shape)
    t = np.fft.fftn(t, axes=rows, norm="ortho")
    t = np.fft.ifftn(t, axes=cols, norm="ortho")
    return t.reshape(grid.size, grid.size)


def to_position(xh: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """``F^dagger xh F``."""
    rows, cols = _axes(grid.d)
    t = np.asarray(xh, dtype=complex).reshape(grid.shape + grid.shape)
    t = np.fft.ifftn(t, axes=rows, norm="ortho")
    t = np.fft.fftn(t, axes=cols, norm="ortho")
    return t.reshape(grid.size, grid.size)


def _fft_vec(v: np.ndarray, grid: SpatialGrid, inverse: bool = False) -> np.ndarray:
    t = np.asarray(v, dtype=complex).reshape(grid.shape)
    t = np.fft.ifftn(t, norm="ortho") if inverse else np.fft.fftn(t, norm="ortho")
    return t.reshape(grid.size)


class InteractionHamiltonianEvaluator:
    """Evaluates ``H_I(t) = exp(iAt) B exp(-iAt)`` and related quantities.

    ``mode="dense"`` precomputes ``B_hat`` (needed for matrix commutators,
    Magnus exponents and error norms); ``mode="matrix_free"`` only applies
    operators to vectors through FFTs. The default picks dense whenever
    ``N**d <= DENSE_CAP``. Lazy caches (the ``A + B`` eigendecomposition and
    a few norms) are filled once under a lock and never mutated afterwards.
    """

    def __init__(self, hamiltonian: DiscreteHamiltonian, mode: str | None = None):
        grid = hamiltonian.grid
        if mode is None:
            mode = "dense" if grid.dense_ok else "matrix_free"
        if mode not in ("dense", "matrix_free"):
            raise ValueError(f"unknown evaluator mode {mode!r}")
        if mode == "dense" and not grid.dense_ok:
            raise ValueError(f"dense mode capped at N^d <= 4096, got {grid.size}")
        self.hamiltonian = hamiltonian
        self.mode = mode
        self.grid = grid
        self.lam = np.asarray(hamiltonian.kinetic_spectrum, dtype=float)
        self._lock = threading.Lock()
        self._cache: dict[str, object] = {}
        self.b_hat: np.ndarray | None = None
        if mode == "dense":
            bh = to_fourier(np.diag(hamiltonian.b_diag), grid)
            self.b_hat = 0.5 * (bh + bh.conj().T)

    @classmethod
    def build(cls, grid: SpatialGrid, potential, mode: str | None = None):
        return cls(build_hamiltonian(grid, potential, materialize=False), mode)

    @property
    def size(self) -> int:
        return self.grid.size

    def _require_dense(self) -> np.ndarray:
        if self.b_hat is None:
            raise DenseModeRequired("this operation needs a dense-mode evaluator")
        return self.b_hat

    def _cached(self, key: str, compute: Callable[[], object]):
        with self._lock:
            if key not in self._cache:
                self._cache[key] = compute()
            return self._cache[key]

    # Fourier-basis kernels -------------------------------------------------

    def phase(self, t: float) -> np.ndarray:
        return np.exp(1j * self.lam * t)

    def h_fourier(self, t: float) -> np.ndarray:
        bh = self._require_dense()
        p = self.phase(t)
        return (p[:, None] * bh) * p.conj()[None, :]

    def dh_fourier(self, t: float) -> np.ndarray:
        """Fourier-basis ``d/dt H_I(t) = i exp(iAt) [A, B] exp(-iAt)``."""
        bh = self._require_dense()
        p = self.phase(t)
        comm = (self.lam[:, None] - self.lam[None, :]) * bh
        return 1j * (p[:, None] * comm) * p.conj()[None, :]

    def coupled_eigen(self) -> HermitianEigen:
        """Eigendecomposition of ``A + B`` (Fourier basis), computed once."""
        bh = self._require_dense()
        return self._cached("coupled_eigen", lambda: hermitian_eig(np.diag(self.lam) + bh))

    def exact_fourier(self, t1: float, t0: float) -> np.ndarray:
        eig = self.coupled_eigen()
        tau = t1 - t0
        u = eig.apply_function(lambda w: np.exp(-1j * w * tau))
        return (self.phase(t1)[:, None] * u) * self.phase(-t0)[None, :]

    # Norms -------------------------------------------------------------------

    def b_norm(self) -> float:
        return self.hamiltonian.b_norm

    def commutator_ab_norm(self) -> float:
        """``||[A, B]||``, which equals ``sup_t ||H_I'(t)||``."""
        return self._cached("comm_ab", lambda: opnorm(self.dh_fourier(0.0)))

    def position_h(self, t: float) -> np.ndarray:
        return to_position(self.h_fourier(t), self.grid)


@lru_cache(maxsize=16)
def cached_evaluator(grid: SpatialGrid, potential) -> InteractionHamiltonianEvaluator:
    """Shared evaluator per ``(grid, potential)`` so decompositions are built once."""
    return InteractionHamiltonianEvaluator.build(grid, potential)


def _evaluator(h) -> InteractionHamiltonianEvaluator:
    if isinstance(h, InteractionHamiltonianEvaluator):
        return h
    if h.grid.dense_ok:
        return cached_evaluator(h.grid, h.potential)
    return InteractionHamiltonianEvaluator(h)


def free_propagator(h: DiscreteHamiltonian, t: float) -> UnitaryMatrix:
    """``exp(-iAt) = F^dagger diag(exp(-i lambda t)) F`` from the analytic spectrum."""
    diag = np.diag(np.exp(-1j * np.asarray(h.kinetic_spectrum) * t))
    return UnitaryMatrix.from_matrix(to_position(diag, h.grid))


def interaction_hamiltonian(ev: InteractionHamiltonianEvaluator, t: float):
    """``H_I(t)`` as a dense matrix, or as a ``vector -> vector`` callable in matrix-free mode."""
    if ev.mode == "dense":
        return ev.position_h(t)
    grid, lam, b = ev.grid, ev.lam, ev.hamiltonian.b_diag

    def apply(v: np.ndarray) -> np.ndarray:
        w = _fft_vec(v, grid)
        w = _fft_vec(np.exp(-1j * lam * t) * w, grid, inverse=True)
        w = _fft_vec(b * w, grid)
        return _fft_vec(np.exp(1j * lam * t) * w, grid, inverse=True)

    return apply


def interaction_hamiltonian_derivative(ev: InteractionHamiltonianEvaluator, t: float):
    """``i exp(iAt) [A, B] exp(-iAt)``; callable in matrix-free mode."""
    if ev.mode == "dense":
        return to_position(ev.dh_fourier(t), ev.grid)
    grid, lam, b = ev.grid, ev.lam, ev.hamiltonian.b_diag

    def apply(v: np.ndarray) -> np.ndarray:
        w = _fft_vec(v, grid)
        w = np.exp(-1j * lam * t) * w
        bw = _fft_vec(b * _fft_vec(w, grid, inverse=True), grid)
        ab = lam * bw
        ba = _fft_vec(b * _fft_vec(lam * w, grid, inverse=True), grid)
        return 1j * _fft_vec(np.exp(1j * lam * t) * (ab - ba), grid, inverse=True)

    return apply


def exact_propagator(h, t1: float, t0: float) -> UnitaryMatrix:
    """Exact interaction-picture evolution ``exp(iA t1) exp(-i(A+B)(t1-t0)) exp(-iA t0)``.

    ``h`` may be a :class:`DiscreteHamiltonian` or an evaluator; pass an
    evaluator to reuse its cached ``A + B`` eigendecomposition.
    """
    ev = _evaluator(h)
    return UnitaryMatrix.from_matrix(to_position(ev.exact_fourier(t1, t0), ev.grid))
