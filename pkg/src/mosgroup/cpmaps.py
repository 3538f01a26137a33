"""Completely positive maps and their metric operator spaces.

A CP map ``P(x) = sum_k v_k x v_k^*`` is stored as its Kraus family together
with the Choi matrix ``C = sum_k vec(v_k) vec(v_k)^*``. The metric operator
space of ``P`` is the range of ``C`` (pulled back through ``unvec``) with the
inner product ``<a, b> = vec(b)^* C^+ vec(a)``. An orthonormal basis comes
from the Choi eigenpairs: ``e_k = sqrt(mu_k) unvec(w_k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from mosgroup import numkernel as nk
from mosgroup.errors import (
    DimensionError,
    NotInSpaceError,
    NotMultiplicativeError,
    NotPSDError,
)

MEMBER_TOL = 1e-7
KRAUS_CUTOFF = 1e-15


def choi_from_kraus(kraus: Sequence[np.ndarray], dim: int) -> np.ndarray:
    if len(kraus) == 0:
        return np.zeros((dim * dim, dim * dim), dtype=complex)
    k = np.stack([nk.vec(v) for v in kraus], axis=1)
    return k @ nk.dagger(k)


def superop_to_choi(superop: np.ndarray) -> np.ndarray:
    """Reshuffle between the superoperator (acting on vec) and the Choi matrix.

    With column stacking, ``S[a + d*b, c + d*e] == C[a + d*c, b + d*e]``; the
    reshuffle is an involution, so the same function maps Choi back to S.
    """
    n = superop.shape[0]
    d = int(round(np.sqrt(n)))
    s4 = superop.reshape((d, d, d, d), order="F")
    return s4.transpose(0, 2, 1, 3).reshape((n, n), order="F")


choi_to_superop = superop_to_choi


@dataclass(frozen=True, eq=False)
class CPMap:
    dim: int
    kraus: tuple[np.ndarray, ...]
    choi: np.ndarray = field(repr=False)

    @classmethod
    def from_kraus(cls, kraus: Sequence, dim: int | None = None) -> "CPMap":
        ops = tuple(nk.as_matrix(v, square=True, name="Kraus operator") for v in kraus)
        if dim is None:
            if not ops:
                raise DimensionError("dimension required for an empty Kraus family")
            dim = ops[0].shape[0]
        for v in ops:
            if v.shape != (dim, dim):
                raise DimensionError(f"Kraus operator of shape {v.shape}, expected {(dim, dim)}")
        return cls(dim, ops, choi_from_kraus(ops, dim))

    @classmethod
    def from_choi(cls, choi, psd_tol: float = nk.PSD_TOL) -> "CPMap":
        """Kraus family from the eigendecomposition of a PSD Choi matrix."""
        choi = nk.as_matrix(choi, square=True, name="Choi matrix")
        d = int(round(np.sqrt(choi.shape[0])))
        if d * d != choi.shape[0]:
            raise DimensionError(f"Choi matrix of size {choi.shape[0]} is not d^2 x d^2")
        eig = nk.hermitian_eig(choi)
        vals = eig.eigenvalues
        top = max(float(vals[0]), 0.0)
        if vals[-1] < -psd_tol * max(1.0, top):
            raise NotPSDError(f"Choi matrix is not PSD (min eigenvalue {vals[-1]:.3e})")
        keep = vals > KRAUS_CUTOFF * top
        kraus = [np.sqrt(mu) * nk.unvec(w) for mu, w in zip(vals[keep], eig.eigenvectors[:, keep].T)]
        return cls.from_kraus(kraus, d)

    @classmethod
    def from_superop(cls, superop, psd_tol: float = nk.PSD_TOL) -> "CPMap":
        return cls.from_choi(superop_to_choi(nk.as_matrix(superop, square=True)), psd_tol)

    @classmethod
    def identity(cls, dim: int) -> "CPMap":
        return cls.from_kraus([np.eye(dim)])

    @classmethod
    def zero(cls, dim: int) -> "CPMap":
        return cls.from_kraus([], dim)

    @property
    def superop(self) -> np.ndarray:
        return superop_to_choi(self.choi)

    def __call__(self, x) -> np.ndarray:
        return apply(self, x)

    def scaled(self, k: float) -> "CPMap":
        if k < 0:
            raise ValueError("CP maps can only be scaled by nonnegative factors")
        return CPMap.from_kraus([np.sqrt(k) * v for v in self.kraus], self.dim)


def apply(p: CPMap, x) -> np.ndarray:
    x = nk.as_matrix(x, square=True)
    if x.shape != (p.dim, p.dim):
        raise DimensionError(f"operand of shape {x.shape} for a map on {p.dim}x{p.dim} matrices")
    out = np.zeros_like(x)
    for v in p.kraus:
        out += v @ x @ nk.dagger(v)
    return out


def omega(a) -> CPMap:
    """The elementary map ``x -> a x a^*``."""
    return CPMap.from_kraus([nk.as_matrix(a, square=True)])


def compose(p1: CPMap, p2: CPMap) -> CPMap:
    """``P1 P2``, i.e. ``x -> P1(P2(x))``, with Kraus family ``{u_i v_j}``."""
    if p1.dim != p2.dim:
        raise DimensionError(f"cannot compose maps on dimensions {p1.dim} and {p2.dim}")
    return CPMap.from_kraus([u @ v for u in p1.kraus for v in p2.kraus], p1.dim)


def tensor_maps(p: CPMap, q: CPMap) -> CPMap:
    return CPMap.from_kraus([np.kron(u, v) for u in p.kraus for v in q.kraus], p.dim * q.dim)


@dataclass(frozen=True)
class OrderCertificate:
    lhs_label: str
    rhs_label: str
    difference_min_eigenvalue: float
    scale: float
    tol: float
    verdict: bool


def cp_leq(l1: CPMap, l2: CPMap, tol: float = nk.PSD_TOL, labels=("L1", "L2")) -> OrderCertificate:
    """Certificate for ``l1 <= l2`` in the completely positive order."""
    if l1.dim != l2.dim:
        raise DimensionError(f"cannot compare maps on dimensions {l1.dim} and {l2.dim}")
    diff = l2.choi - l1.choi
    check = nk.is_psd(diff, tol)
    scale = max(1.0, nk.spectral_norm(diff))
    return OrderCertificate(labels[0], labels[1], check.min_eigenvalue, scale, tol, check.psd)


@dataclass(frozen=True, eq=False)
class MetricOperatorSpace:
    """Orthonormal basis of E_P plus the data needed for inner products.

    ``range_vectors`` are the Choi eigenvectors kept by the rank decision and
    ``weights`` the matching eigenvalues; ``basis[k] = sqrt(weights[k]) *
    unvec(range_vectors[:, k])`` up to a phase.
    """

    dim: int
    basis: tuple[np.ndarray, ...]
    choi_pinv: np.ndarray = field(repr=False)
    rank: int
    range_vectors: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    member_tol: float = MEMBER_TOL

    def coordinates(self, a) -> np.ndarray:
        """Expansion coefficients of ``a`` in the orthonormal basis (no range test)."""
        return (nk.dagger(self.range_vectors) @ nk.vec(a)) / np.sqrt(self.weights)

    def range_residual(self, a) -> float:
        """Relative distance of ``vec(a)`` from the range of the Choi matrix."""
        w = nk.vec(a)
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        proj = self.range_vectors @ (nk.dagger(self.range_vectors) @ w)
        return float(np.linalg.norm(w - proj) / norm)

    def to_map(self) -> CPMap:
        return CPMap.from_kraus(self.basis, self.dim)


def _fix_phase(e: np.ndarray) -> np.ndarray:
    flat = e.reshape(-1, order="F")
    k = int(np.argmax(np.abs(flat)))
    if flat[k] == 0:
        return e
    return e * (abs(flat[k]) / flat[k])


def metric_operator_space(
    p: CPMap, rank_tol: float = nk.RANK_TOL, psd_tol: float = nk.PSD_TOL, member_tol: float = MEMBER_TOL
) -> MetricOperatorSpace:
    eig = nk.hermitian_eig(p.choi)
    vals = eig.eigenvalues
    top = float(vals[0])
    if vals[-1] < -psd_tol * max(1.0, top):
        raise NotPSDError(f"Choi matrix is not PSD (min eigenvalue {vals[-1]:.3e})")
    keep = vals > rank_tol * top if top > 0 else np.zeros(vals.shape, bool)
    mu = vals[keep]
    w = eig.eigenvectors[:, keep]
    basis = []
    for j in range(w.shape[1]):
        e = _fix_phase(np.sqrt(mu[j]) * nk.unvec(w[:, j]))
        basis.append(e)
        w[:, j] = nk.vec(e) / np.sqrt(mu[j])
    pinv = (w / mu) @ nk.dagger(w)
    return MetricOperatorSpace(p.dim, tuple(basis), pinv, int(mu.size), w, mu, member_tol)


@dataclass(frozen=True)
class Membership:
    member: bool
    norm_sq: float | None
    residual: float


def mos_member(a, s: MetricOperatorSpace, tol: float | None = None) -> Membership:
    """Whether ``a`` lies in E_P, and if so its squared norm.

    For members the squared norm is the least ``k`` with ``omega(a) <= k P``.
    """
    a = nk.as_matrix(a, square=True)
    if a.shape != (s.dim, s.dim):
        raise DimensionError(f"operand of shape {a.shape} for a space on dimension {s.dim}")
    tol = s.member_tol if tol is None else tol
    res = s.range_residual(a)
    if res > tol:
        return Membership(False, None, res)
    c = s.coordinates(a)
    return Membership(True, float(np.vdot(c, c).real), res)


def mos_inner(a, b, s: MetricOperatorSpace, tol: float | None = None) -> complex:
    """``<a, b>`` in E_P; linear in ``a``, conjugate-linear in ``b``.

    Evaluated as ``vec(b)^* C^+ vec(a)`` but through basis coordinates, which
    avoids forming products with the large entries of ``C^+`` when the Choi
    matrix has small eigenvalues.
    """
    tol = s.member_tol if tol is None else tol
    for name, op in (("first", a), ("second", b)):
        res = s.range_residual(nk.as_matrix(op, square=True))
        if res > tol:
            raise NotInSpaceError(f"{name} operand is not in the metric operator space (residual {res:.3e})")
    return complex(np.vdot(s.coordinates(b), s.coordinates(a)))


def gram(ops: Sequence[np.ndarray], s: MetricOperatorSpace) -> np.ndarray:
    """``G[i, j] = <ops[i], ops[j]>``."""
    coords = np.stack([s.coordinates(a) for a in ops], axis=0) if ops else np.zeros((0, s.rank))
    return coords @ nk.dagger(coords)


def comultiplication_gram(
    p1: CPMap, p2: CPMap, rank_tol: float = nk.RANK_TOL, member_tol: float = MEMBER_TOL
) -> np.ndarray:
    """Gram matrix of the products ``e_i f_j`` inside E_{P1 P2}.

    Rows and columns are indexed by ``(i, j)`` flattened as ``i * r2 + j``.
    The result is the projection ``M^* M`` onto the range of comultiplication.
    """
    s1 = metric_operator_space(p1, rank_tol)
    s2 = metric_operator_space(p2, rank_tol)
    s12 = metric_operator_space(compose(p1, p2), rank_tol, member_tol=member_tol)
    products = [e @ f for e in s1.basis for f in s2.basis]
    for k, x in enumerate(products):
        res = s12.range_residual(x)
        if res > member_tol:
            i, j = divmod(k, s2.rank)
            raise NotInSpaceError(f"product e_{i} f_{j} is not in E_(P1P2) (residual {res:.3e})")
    return gram(products, s12)


def comultiplication_isometry_map(p: CPMap, rank_tol: float = nk.RANK_TOL) -> np.ndarray:
    """The operator ``V xi = sum_k e_k (x) e_k^* xi`` as an ``(r d) x d`` matrix.

    Block ``k`` (rows ``k*d .. (k+1)*d``) is ``e_k^*``, so that
    ``V^* (1_r (x) x) V == P(x)``.
    """
    s = metric_operator_space(p, rank_tol)
    if s.rank == 0:
        return np.zeros((0, p.dim), dtype=complex)
    return np.vstack([nk.dagger(e) for e in s.basis])


def is_multiplicative(p: CPMap, tol: float = 1e-9) -> bool:
    d = p.dim
    units = [np.outer(np.eye(d)[i], np.eye(d)[j]) for i in range(d) for j in range(d)]
    images = [apply(p, x) for x in units]
    scale = max(1.0, max(np.linalg.norm(y) for y in images))
    for (x, px) in zip(units, images):
        for (y, py) in zip(units, images):
            if np.linalg.norm(apply(p, x @ y) - px @ py) > tol * scale:
                return False
    return True


def endo_intertwiners(p: CPMap, tol: float = 1e-9) -> list[np.ndarray]:
    """Basis of ``{T : P(x) T = T x for all x}`` for a multiplicative ``p``.

    Returned operators are orthonormal in the Hilbert-Schmidt inner product.
    """
    if not is_multiplicative(p, tol):
        raise NotMultiplicativeError("map is not multiplicative within tolerance")
    d = p.dim
    eye = np.eye(d)
    blocks = []
    for i in range(d):
        for j in range(d):
            x = np.outer(eye[i], eye[j]).astype(complex)
            # vec(P(x) T) - vec(T x) = (1 (x) P(x) - x^T (x) 1) vec(T)
            blocks.append(np.kron(eye, apply(p, x)) - np.kron(x.T, eye))
    ns = nk.null_space(np.vstack(blocks), tol)
    return [nk.unvec(ns[:, k]) for k in range(ns.shape[1])]


def intertwiner_inner(t1: np.ndarray, t2: np.ndarray) -> complex:
    """The scalar ``<T1, T2>`` with ``T2^* T1 = <T1, T2> 1``."""
    prod = nk.dagger(t2) @ t1
    return complex(np.trace(prod) / prod.shape[0])
