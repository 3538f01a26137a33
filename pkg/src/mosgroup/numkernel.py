"""Dense complex linear algebra used by the rest of the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Vectorization
uses the column-stacking convention throughout::

    vec([[a, b],
         [c, d]]) == (a, c, b, d)

so that ``vec(a @ x @ b) == kron(b.T, a) @ vec(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from mosgroup.errors import DimensionError, NonHermitianError, NotPSDError

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-8
RANK_TOL = 1e-6


def as_matrix(a, *, square: bool = False, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` into a finite 2-D complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def vec(m) -> np.ndarray:
    m = as_matrix(m, square=True)
    return m.reshape(-1, order="F")


def unvec(w) -> np.ndarray:
    w = np.asarray(w, dtype=complex).reshape(-1)
    d = int(round(np.sqrt(w.size)))
    if d * d != w.size:
        raise DimensionError(f"vector of length {w.size} is not a square size")
    return w.reshape((d, d), order="F")


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hermitian_defect(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - dagger(a)))


def check_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL, name: str = "matrix") -> None:
    defect = hermitian_defect(a)
    if defect > tol * (1.0 + np.linalg.norm(a)):
        raise NonHermitianError(f"{name} is not Hermitian (defect {defect:.3e})")


@dataclass(frozen=True)
class HermitianEig:
    eigenvalues: np.ndarray  # real, descending
    eigenvectors: np.ndarray  # columns

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ dagger(u)


def hermitian_eig(a, tol: float = HERMITIAN_TOL) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues in descending order.

    The input is symmetrized before decomposition, so a Hermitian defect up to
    ``tol * (1 + |a|_F)`` is tolerated.
    """
    a = as_matrix(a, square=True)
    check_hermitian(a, tol)
    w, u = np.linalg.eigh(0.5 * (a + dagger(a)))
    return HermitianEig(w[::-1].copy(), u[:, ::-1].copy())


@dataclass(frozen=True)
class PSDCheck:
    psd: bool
    min_eigenvalue: float


def spectral_norm(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def is_psd(a, tol: float = PSD_TOL) -> PSDCheck:
    a = as_matrix(a, square=True)
    eig = hermitian_eig(a)
    lo = float(eig.eigenvalues[-1]) if eig.eigenvalues.size else 0.0
    scale = max(1.0, float(np.max(np.abs(eig.eigenvalues), initial=0.0)))
    return PSDCheck(lo >= -tol * scale, lo)


def matrix_exp(a) -> np.ndarray:
    a = as_matrix(a, square=True)
    return scipy.linalg.expm(a)


@dataclass(frozen=True)
class Pseudoinverse:
    pinv: np.ndarray
    rank: int


def psd_pseudoinverse(a, rank_tol: float = RANK_TOL, psd_tol: float = PSD_TOL) -> Pseudoinverse:
    """Moore-Penrose inverse of a PSD matrix.

    Eigenvalues at or below ``rank_tol * lambda_max`` count as zero.
    """
    a = as_matrix(a, square=True)
    eig = hermitian_eig(a)
    vals = eig.eigenvalues
    top = float(vals[0]) if vals.size else 0.0
    if vals.size and vals[-1] < -psd_tol * max(1.0, top):
        raise NotPSDError(f"matrix is not PSD (min eigenvalue {vals[-1]:.3e})")
    keep = vals > rank_tol * top if top > 0 else np.zeros(vals.shape, bool)
    u = eig.eigenvectors[:, keep]
    pinv = (u / vals[keep]) @ dagger(u)
    return Pseudoinverse(pinv, int(np.count_nonzero(keep)))


def null_space(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of the null space of ``a``."""
    a = as_matrix(a)
    if a.shape[0] == 0:
        return np.eye(a.shape[1], dtype=complex)
    _, s, vh = np.linalg.svd(a)
    top = s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > tol * max(top, 1.0)))
    return dagger(vh[rank:])


def numerical_rank(vectors: np.ndarray, rank_tol: float = RANK_TOL) -> int:
    """Rank of the column span, with the same relative threshold as Gram eigenvalues."""
    if vectors.size == 0:
        return 0
    s = np.linalg.svd(vectors, compute_uv=False)
    sq = s**2
    if sq[0] <= 0:
        return 0
    return int(np.count_nonzero(sq > rank_tol * sq[0]))
