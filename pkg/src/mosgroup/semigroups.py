"""CP semigroups ``P_t = exp(t L)`` with bounded GKS/Lindblad generators.

Generators are in the Heisenberg (unital) form::

    L(x) = i[h, x] + sum_k (v_k^* x v_k - 1/2 {v_k^* v_k, x}) - 1/2 {r, x}

where the optional ``decay`` term ``r >= 0`` makes the semigroup contractive
but not unital.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from mosgroup import numkernel as nk
from mosgroup.cpmaps import CPMap, MetricOperatorSpace, apply, metric_operator_space
from mosgroup.errors import DimensionError, GeneratorError, NotPSDError

MAX_DIM = 8
MAX_TIME = 100.0
# Rank threshold for the spaces E_P(t). Directions that enter P_t at order
# t^2 must survive down to the smallest partition increments (t ~ 1e-5).
SPACE_RANK_TOL = 1e-12


def default_time_grid(t_max: float = 1.0) -> list[float]:
    return [t_max * 2.0**-m for m in range(13)]


@dataclass(frozen=True, eq=False)
class GKSGenerator:
    dim: int
    hamiltonian: np.ndarray
    noise_ops: tuple[np.ndarray, ...] = ()
    decay: np.ndarray | None = None

    def __post_init__(self):
        d = self.dim
        h = nk.as_matrix(self.hamiltonian, square=True, name="hamiltonian")
        if h.shape != (d, d):
            raise DimensionError(f"hamiltonian has shape {h.shape}, expected {(d, d)}")
        if nk.hermitian_defect(h) > nk.HERMITIAN_TOL * (1 + np.linalg.norm(h)):
            raise GeneratorError("hamiltonian is not Hermitian")
        ops = tuple(nk.as_matrix(v, square=True, name="noise operator") for v in self.noise_ops)
        for v in ops:
            if v.shape != (d, d):
                raise DimensionError(f"noise operator has shape {v.shape}, expected {(d, d)}")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "noise_ops", ops)
        if self.decay is not None:
            r = nk.as_matrix(self.decay, square=True, name="decay")
            if r.shape != (d, d):
                raise DimensionError(f"decay has shape {r.shape}, expected {(d, d)}")
            if not nk.is_psd(r).psd:
                raise GeneratorError("decay operator must be PSD")
            object.__setattr__(self, "decay", r)

    @property
    def drift(self) -> np.ndarray:
        """``k = i h - 1/2 (sum_k v_k^* v_k + r)`` so that ``L(x) = sum v^* x v + k x + x k^*``."""
        d = self.dim
        k = 1j * self.hamiltonian.copy()
        for v in self.noise_ops:
            k -= 0.5 * nk.dagger(v) @ v
        if self.decay is not None:
            k -= 0.5 * self.decay
        return k

    @property
    def unital(self) -> bool:
        return self.decay is None or not np.any(self.decay)

    def apply(self, x) -> np.ndarray:
        x = nk.as_matrix(x, square=True)
        k = self.drift
        out = k @ x + x @ nk.dagger(k)
        for v in self.noise_ops:
            out += nk.dagger(v) @ x @ v
        return out

    def superop(self) -> np.ndarray:
        """Matrix of ``L`` acting on column-stacked ``vec(x)``."""
        d = self.dim
        eye = np.eye(d)
        k = self.drift
        # vec(a x b) = (b^T (x) a) vec(x)
        s = np.kron(eye, k) + np.kron(k.conj(), eye)
        for v in self.noise_ops:
            s += np.kron(v.T, nk.dagger(v))
        return s

    def tensor(self, other: "GKSGenerator") -> "GKSGenerator":
        ea, eb = np.eye(self.dim), np.eye(other.dim)
        h = np.kron(self.hamiltonian, eb) + np.kron(ea, other.hamiltonian)
        ops = [np.kron(v, eb) for v in self.noise_ops] + [np.kron(ea, w) for w in other.noise_ops]
        decay = None
        if self.decay is not None or other.decay is not None:
            ra = self.decay if self.decay is not None else np.zeros_like(ea)
            rb = other.decay if other.decay is not None else np.zeros_like(eb)
            decay = np.kron(ra, eb) + np.kron(ea, rb)
        return GKSGenerator(self.dim * other.dim, h, tuple(ops), decay)


@dataclass(eq=False)
class CPSemigroup:
    """``P_t = exp(t L)``; evolved maps and their spaces are memoized by ``t``."""

    generator: GKSGenerator
    label: str = ""
    space_rank_tol: float = SPACE_RANK_TOL
    psd_tol: float = nk.PSD_TOL
    superop: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.generator.dim > MAX_DIM:
            raise DimensionError(f"dimension {self.generator.dim} exceeds the supported maximum {MAX_DIM}")
        self.superop = self.generator.superop()
        self._maps: dict[float, CPMap] = {}
        self._spaces: dict[float, MetricOperatorSpace] = {}

    @property
    def dim(self) -> int:
        return self.generator.dim

    @property
    def unital(self) -> bool:
        return self.generator.unital

    def evolve(self, t: float) -> CPMap:
        return evolve(self, t)

    def space(self, t: float) -> MetricOperatorSpace:
        """The metric operator space E_P(t)."""
        t = float(t)
        s = self._spaces.get(t)
        if s is None:
            s = metric_operator_space(self.evolve(t), self.space_rank_tol, self.psd_tol)
            self._spaces[t] = s
        return s

    @classmethod
    def from_ops(cls, hamiltonian, noise_ops: Sequence = (), decay=None, label: str = "") -> "CPSemigroup":
        h = nk.as_matrix(hamiltonian, square=True)
        return cls(GKSGenerator(h.shape[0], h, tuple(noise_ops), decay), label)

    @classmethod
    def identity(cls, dim: int, label: str = "identity") -> "CPSemigroup":
        return cls.from_ops(np.zeros((dim, dim)), (), label=label)


def evolve(p: CPSemigroup, t: float) -> CPMap:
    t = float(t)
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if t > MAX_TIME:
        raise ValueError(f"time {t} exceeds the supported maximum {MAX_TIME}")
    cached = p._maps.get(t)
    if cached is not None:
        return cached
    if t == 0:
        m = CPMap.identity(p.dim)
    else:
        try:
            m = CPMap.from_superop(nk.matrix_exp(t * p.superop), p.psd_tol)
        except NotPSDError as exc:
            raise GeneratorError(f"exp({t} L) is not completely positive: {exc}") from exc
    p._maps[t] = m
    return m


def is_unital(p: CPSemigroup, t_grid: Sequence[float] | None = None, tol: float = 1e-10) -> bool:
    grid = list(t_grid) if t_grid is not None else default_time_grid()
    if not grid:
        raise ValueError("time grid must be nonempty")
    eye = np.eye(p.dim)
    return all(np.linalg.norm(apply(evolve(p, t), eye) - eye) <= tol for t in grid)


def tensor(p: CPSemigroup, q: CPSemigroup) -> CPSemigroup:
    """``(P (x) Q)_t (x (x) y) = P_t(x) (x) Q_t(y)``."""
    if p.dim * q.dim > MAX_DIM:
        raise DimensionError(f"tensor dimension {p.dim * q.dim} exceeds the supported maximum {MAX_DIM}")
    label = f"{p.label or 'P'}(x){q.label or 'Q'}"
    return CPSemigroup(p.generator.tensor(q.generator), label, min(p.space_rank_tol, q.space_rank_tol))


def kronecker_sum_superop(p: CPSemigroup, q: CPSemigroup) -> np.ndarray:
    """``L_P (x) id + id (x) L_Q`` on vec of ``(d_P d_Q) x (d_P d_Q)`` matrices.

    Built directly from the two superoperators by permuting indices; used to
    cross-check :func:`tensor`.
    """
    dp, dq = p.dim, q.dim
    # S[i + d j, k + d l] -> s4[i, j, k, l]
    sp = p.superop.reshape((dp, dp, dp, dp), order="F")
    sq = q.superop.reshape((dq, dq, dq, dq), order="F")
    # Entry (a*dq + b, c*dq + e) of a matrix on H_P (x) H_Q sits at Fortran
    # position (b, a, e, c) of its vec; output axes are (b, a, e, c, b', a', e', c').
    t = np.einsum("ACGI,BF,EH->BAECFGHI", sp, np.eye(dq), np.eye(dq))
    t = t + np.einsum("BEFH,AG,CI->BAECFGHI", sq, np.eye(dp), np.eye(dp))
    n = (dp * dq) ** 2
    return t.reshape((n, n), order="F")
