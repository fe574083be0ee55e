"""Periodic finite-difference operators and their torus quantizations.

Grids carry ``N`` nodes per dimension, ``x_j = a + (b - a) j / N``. Multi-
dimensional nodes are flattened lexicographically with the first coordinate
varying fastest: flat index ``j = j_1 + N j_2 + ... + N^{d-1} j_d``. The
Laplacian is the Kronecker sum of the 1-D periodic second-difference stencils,
so it is diagonalized by the tensor-product unitary DFT in the same ordering.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import GridTooSmall, NonFiniteSample, UnsupportedDimension
from .linalg import dft_matrix

#: Largest N**d for which dense matrices are materialized.
DENSE_CAP = 4096


@dataclass(frozen=True)
class SpatialGrid:
    n: int
    d: int = 1
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.n < 2:
            raise GridTooSmall(f"need at least 2 points per dimension, got {self.n}")
        if not self.b > self.a:
            raise ValueError(f"interval must satisfy b > a, got ({self.a}, {self.b})")

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        """Array shape whose C-order flattening matches the flat node index."""
        return (self.n,) * self.d

    @property
    def dense_ok(self) -> bool:
        return self.size <= DENSE_CAP

    def nodes(self) -> np.ndarray:
        return self.a + self.length * np.arange(self.n) / self.n

    def multi_index(self) -> list[np.ndarray]:
        """Per-dimension indices ``j_i`` for every flat index, first dimension first."""
        flat = np.arange(self.size)
        return [(flat // self.n**i) % self.n for i in range(self.d)]

    def coordinates(self) -> list[np.ndarray]:
        x = self.nodes()
        return [x[j] for j in self.multi_index()]


# Potentials ---------------------------------------------------------------

_KINDS = ("zero", "constant", "cos_mode", "exp_sin", "tabulated")


@dataclass(frozen=True)
class PotentialSpec:
    """A potential ``V(x)`` on the periodic box.

    Built-in kinds are smooth and periodic on ``[a, b)^d``; ``tabulated``
    carries raw node values with no smoothness guarantee (``smooth`` is
    False and study reports propagate the flag). With ``theta_i =
    2 pi (x_i - a) / (b - a)``:

    * ``cos_mode``: ``amplitude * cos(sum_i k_i theta_i)``
    * ``exp_sin``: ``amplitude * exp(sum_i sin theta_i)``
    """

    kind: str
    constant: float = 0.0
    k: tuple[int, ...] = (1,)
    amplitude: float = 1.0
    values: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind == "tabulated":
            if not self.values:
                raise ValueError("tabulated potential needs values")
            if not np.all(np.isfinite(self.values)):
                raise NonFiniteSample("tabulated potential contains non-finite values")

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls("zero")

    @classmethod
    def const(cls, c: float) -> "PotentialSpec":
        return cls("constant", constant=float(c))

    @classmethod
    def cos_mode(cls, k: int | Sequence[int] = 1, amplitude: float = 1.0) -> "PotentialSpec":
        k = (int(k),) if np.isscalar(k) else tuple(int(x) for x in k)
        return cls("cos_mode", k=k, amplitude=float(amplitude))

    @classmethod
    def exp_sin(cls, amplitude: float = 1.0) -> "PotentialSpec":
        return cls("exp_sin", amplitude=float(amplitude))

    @classmethod
    def tabulated(cls, values: Sequence[float]) -> "PotentialSpec":
        return cls("tabulated", values=tuple(float(v) for v in np.ravel(values)))

    @classmethod
    def from_csv(cls, path: str | Path) -> "PotentialSpec":
        """Single-column CSV of node values in flat-index order. Blank lines are skipped."""
        vals = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or not row[0].strip():
                    continue
                if len(row) != 1:
                    raise ValueError(f"{path}: expected one column, got {len(row)}")
                vals.append(float(row[0]))
        return cls.tabulated(vals)

    @property
    def smooth(self) -> bool:
        return self.kind != "tabulated"

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant(c={self.constant!r})"
        if self.kind == "cos_mode":
            return f"cos_mode(k={list(self.k)}, amplitude={self.amplitude!r})"
        if self.kind == "exp_sin":
            return f"exp_sin(amplitude={self.amplitude!r})"
        if self.kind == "tabulated":
            return f"tabulated(n={len(self.values)})"
        return "zero"

    def evaluate(self, grid: SpatialGrid) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(grid.size)
        if self.kind == "constant":
            return np.full(grid.size, self.constant)
        if self.kind == "tabulated":
            if len(self.values) != grid.size:
                raise ValueError(
                    f"tabulated potential has {len(self.values)} values, grid needs {grid.size}"
                )
            return np.array(self.values, dtype=float)
        theta = [2.0 * np.pi * (x - grid.a) / grid.length for x in grid.coordinates()]
        if self.kind == "cos_mode":
            k = self.k * grid.d if len(self.k) == 1 else self.k
            if len(k) != grid.d:
                raise ValueError(f"cos_mode has {len(k)} wave numbers for d={grid.d}")
            phase = sum(ki * th for ki, th in zip(k, theta))
            return self.amplitude * np.cos(phase)
        with np.errstate(over="ignore", invalid="ignore"):
            return self.amplitude * np.exp(sum(np.sin(th) for th in theta))


def build_potential(grid: SpatialGrid, v: PotentialSpec) -> np.ndarray:
    """Node samples ``V(x_j)`` in flat-index order."""
    out = v.evaluate(grid)
    if not np.all(np.isfinite(out)):
        raise NonFiniteSample(f"potential {v.describe()} is not finite on the grid")
    return out


# Kinetic part -------------------------------------------------------------


def stencil_1d(n: int, prefactor: float = 1.0) -> np.ndarray:
    """``prefactor * circ(2, -1, 0, ..., 0, -1)``, the periodic second difference."""
    if n < 3:
        raise GridTooSmall(f"periodic stencil needs N >= 3, got {n}")
    m = 2.0 * np.eye(n)
    idx = np.arange(n)
    m[idx, (idx + 1) % n] = -1.0
    m[idx, (idx - 1) % n] = -1.0
    return prefactor * m


def unit_stencil(n: int) -> np.ndarray:
    """The unit-prefactor stencil ``(1/2) circ(2, -1, ..., -1)``."""
    return stencil_1d(n, 0.5)


def kronecker_sum(block: np.ndarray, d: int) -> np.ndarray:
    n = block.shape[0]
    eye = np.eye(n)
    out = np.zeros((n**d, n**d))
    for i in range(d):
        term = np.ones((1, 1))
        for j in range(d):
            term = np.kron(term, block if j == i else eye)
        out += term
    return out


@dataclass(frozen=True)
class Laplacian:
    grid: SpatialGrid
    prefactor: float
    spectrum: np.ndarray
    dense: np.ndarray | None

    @property
    def norm(self) -> float:
        return float(np.max(self.spectrum))


def kinetic_spectrum_1d(grid: SpatialGrid) -> np.ndarray:
    k = np.arange(grid.n)
    return grid.n**2 * (1.0 - np.cos(2.0 * np.pi * k / grid.n)) / grid.length**2


def build_laplacian(grid: SpatialGrid, materialize: bool | None = None) -> Laplacian:
    """Finite-difference ``-Delta/2`` with periodic boundary conditions.

    ``spectrum`` holds the eigenvalues in DFT order (flat frequency index in
    the same ordering as the nodes). ``dense`` is built when
    ``materialize`` is true, or by default whenever ``N**d <= DENSE_CAP`` and
    ``d <= 3``.
    """
    if grid.n < 3:
        raise GridTooSmall(
            f"N={grid.n}: the periodic stencil double-counts the wraparound coupling for N < 3"
        )
    prefactor = grid.n**2 / (2.0 * grid.length**2)
    mu = kinetic_spectrum_1d(grid)
    spectrum = sum(mu[j] for j in grid.multi_index())
    if materialize is None:
        materialize = grid.dense_ok and grid.d <= 3
    dense = None
    if materialize:
        if grid.d > 3 or not grid.dense_ok:
            raise ValueError(f"refusing to materialize a {grid.size}x{grid.size} Laplacian")
        dense = kronecker_sum(stencil_1d(grid.n, prefactor), grid.d)
    return Laplacian(grid, prefactor, np.asarray(spectrum, dtype=float), dense)


@dataclass(frozen=True)
class DiscreteHamiltonian:
    """``H = A + B`` with ``A`` the periodic Laplacian and ``B = diag(V(x_j))``."""

    grid: SpatialGrid
    potential: PotentialSpec
    kinetic_spectrum: np.ndarray
    b_diag: np.ndarray
    kinetic_prefactor: float
    a_dense: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def b_norm(self) -> float:
        return float(np.max(np.abs(self.b_diag)))

    @property
    def a_norm(self) -> float:
        return float(np.max(self.kinetic_spectrum))

    def b_dense(self) -> np.ndarray:
        return np.diag(self.b_diag)


def build_hamiltonian(
    grid: SpatialGrid, potential: PotentialSpec, materialize: bool | None = None
) -> DiscreteHamiltonian:
    lap = build_laplacian(grid, materialize)
    return DiscreteHamiltonian(
        grid=grid,
        potential=potential,
        kinetic_spectrum=lap.spectrum,
        b_diag=build_potential(grid, potential),
        kinetic_prefactor=lap.prefactor,
        a_dense=lap.dense,
    )


# Torus quantization ---------------------------------------------------------


def quantize_momentum_symbol(grid: SpatialGrid, g: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """``op_N(g(xi)) = F^dagger diag(g(2 pi k / N)) F`` for a symbol depending on ``xi`` only."""
    if grid.d != 1:
        raise UnsupportedDimension("momentum symbols are quantized per dimension (d = 1)")
    xi = 2.0 * np.pi * np.arange(grid.n) / grid.n
    vals = np.asarray(g(xi), dtype=complex) * np.ones(grid.n)
    f = dft_matrix(grid.n)
    return f.conj().T @ (vals[:, None] * f)


def quantize_position_symbol(grid: SpatialGrid, v: PotentialSpec) -> np.ndarray:
    """``op_N(V(x))``: the diagonal matrix of node samples."""
    return np.diag(build_potential(grid, v)).astype(complex)
