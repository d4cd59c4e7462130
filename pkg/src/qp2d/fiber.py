"""Finite sections of the fiber operator H(kappa) on l^2(Z^4) and the dense
exact-diagonalization oracle used to validate every perturbative result.

H(kappa)_{m,m'} = |kappa + p_m|^2 delta_{m,m'} + V_{m-m'}, assembled so that
Hermiticity is exact at the bit level (each conjugate pair of entries is
written from a single coefficient).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import (
    LatticeIndex,
    QPParams,
    dual_array,
    indices_to_array,
)
from .potential import PotentialSpec


class DuplicateIndex(ValueError):
    pass


class DimensionCap(ValueError):
    pass


EIG_CAP_DEFAULT = 4096

_PACK_BASE = 4096  # coordinates must stay below half of this


def pack_rows(rows: np.ndarray) -> np.ndarray:
    """Injective int64 key per lattice row, for O(log n) pair matching."""
    b = _PACK_BASE
    h = b // 2
    out = rows[:, 0] + h
    for c in range(1, 4):
        out = out * b + (rows[:, c] + h)
    return out


@dataclass(frozen=True)
class FiberMatrix:
    indices: tuple[LatticeIndex, ...]
    kappa: np.ndarray
    entries: np.ndarray  # dense Hermitian, energy units

    @property
    def dim(self) -> int:
        return len(self.indices)

    def position(self, m: LatticeIndex) -> int:
        return self.indices.index(m)

    def submatrix(self, subset) -> "FiberMatrix":
        """Principal submatrix on a subset of the index list."""
        pos = [self.indices.index(m) for m in subset]
        sel = np.ix_(pos, pos)
        return FiberMatrix(
            indices=tuple(subset), kappa=self.kappa, entries=self.entries[sel]
        )


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # orthonormal columns
    residual_norm: float


def diagonal_energies(kappa, rows: np.ndarray, params: QPParams) -> np.ndarray:
    """|kappa + p_m|^2 for each row."""
    kap = np.asarray(kappa, dtype=float)
    shifted = dual_array(rows, params) + kap
    return np.einsum("ij,ij->i", shifted, shifted)


def coupling_pairs(rows: np.ndarray, spec: PotentialSpec):
    """All (i, j, V_q) with rows[i] - rows[j] = q over the nonzero support,
    one entry per ordered pair."""
    keys = pack_rows(rows)
    order = np.argsort(keys)
    sorted_keys = keys[order]
    out = []
    for q in spec.nonzero_support:
        v = spec.coeffs[q]
        q_row = np.array(q.as_row(), dtype=np.int64)
        target = pack_rows(rows - q_row[None, :])
        pos = np.searchsorted(sorted_keys, target)
        pos_c = np.clip(pos, 0, len(keys) - 1)
        hit = sorted_keys[pos_c] == target
        i_idx = np.nonzero(hit)[0]
        j_idx = order[pos_c[hit]]
        if len(i_idx):
            out.append((i_idx, j_idx, v))
    return out


def assemble(kappa, indices, spec: PotentialSpec, params: QPParams) -> FiberMatrix:
    idx = list(indices)
    if len(set(idx)) != len(idx):
        raise DuplicateIndex("index list contains duplicates")
    rows = indices_to_array(idx)
    n = len(idx)
    h = np.zeros((n, n), dtype=complex)
    np.fill_diagonal(h, diagonal_energies(kappa, rows, params))
    for i_idx, j_idx, v in coupling_pairs(rows, spec):
        upper = i_idx < j_idx
        h[i_idx[upper], j_idx[upper]] = v
        h[j_idx[upper], i_idx[upper]] = v.conjugate()
    return FiberMatrix(
        indices=tuple(idx), kappa=np.asarray(kappa, dtype=float), entries=h
    )


def eig_oracle(mat: FiberMatrix, cap: int = EIG_CAP_DEFAULT) -> SpectralData:
    """Full Hermitian eigendecomposition, eigenvalues ascending."""
    if mat.dim > cap:
        raise DimensionCap(f"dimension {mat.dim} exceeds the oracle cap {cap}")
    vals, vecs = np.linalg.eigh(mat.entries)
    res = np.linalg.norm(mat.entries @ vecs - vecs * vals[None, :], ord=2)
    return SpectralData(eigenvalues=vals, eigenvectors=vecs, residual_norm=float(res))


def eigvals_oracle(mat: FiberMatrix, cap: int = EIG_CAP_DEFAULT) -> np.ndarray:
    """Eigenvalues only (ascending); the cheap half of the oracle."""
    if mat.dim > cap:
        raise DimensionCap(f"dimension {mat.dim} exceeds the oracle cap {cap}")
    return np.linalg.eigvalsh(mat.entries)


def resolvent_gap(mat: FiberMatrix, z: complex) -> float:
    """dist(z, spec(M)) = 1/||(M - z)^{-1}|| for self-adjoint M."""
    vals = eig_oracle(mat).eigenvalues
    return float(np.min(np.abs(vals - z)))


def spectral_window(
    mat: FiberMatrix, center: float, radius: float
) -> tuple[int, np.ndarray]:
    """Eigenvalues with |lambda - center| <= radius and their count."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    vals = eig_oracle(mat).eigenvalues
    inside = vals[np.abs(vals - center) <= radius]
    return len(inside), inside
