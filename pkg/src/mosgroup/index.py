"""The covariance kernel on a unit family, the index lower bound, tensor
additivity, and the finite-dimensional trivial-dilation check.

Only finitely many units are ever seen, so the index reported here is a lower
bound: the rank of the covariance form on zero-sum functions supported on the
given family.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from mosgroup import numkernel as nk
from mosgroup.covariance import DEPTH_MAX, Partition, covariance, covariance_matrix, refine_to_limit
from mosgroup.cpmaps import endo_intertwiners, gram, intertwiner_inner, is_multiplicative
from mosgroup.errors import NotMultiplicativeError
from mosgroup.parallel import parallel_map
from mosgroup.semigroups import CPSemigroup, evolve, tensor
from mosgroup.units import UnitCandidate, unit_inner, verify_unit

CPD_TOL = 1e-7
# Eigenvalues of the zero-sum form below this are numerical noise from the
# partition limits (accurate to ~1e-9) regardless of the largest eigenvalue.
ABS_RANK_FLOOR = 1e-6
KERNEL_TOL = 1e-4
MAX_FAMILY = 6


def covariance_kernel(units: Sequence[UnitCandidate], p: CPSemigroup, depth_max: int = DEPTH_MAX) -> np.ndarray:
    """``C[i, j] = c_P(U_i, U_j)``; every entry is computed independently."""
    n = len(units)
    if n == 0:
        raise ValueError("the unit family is empty")
    pairs = [(i, j) for i in range(n) for j in range(n)]
    values = parallel_map(lambda ij: covariance(units[ij[0]], units[ij[1]], p, depth_max=depth_max), pairs)
    c = np.empty((n, n), dtype=complex)
    for (i, j), v in zip(pairs, values):
        c[i, j] = v
    return c


def zero_sum_gram(c: np.ndarray, base: int = -1) -> np.ndarray:
    """Gram matrix of ``delta_i - delta_base`` (``i != base``) under the kernel ``c``."""
    n = c.shape[0]
    base = base % n
    idx = [i for i in range(n) if i != base]
    g = c[np.ix_(idx, idx)] - c[np.ix_(idx, [base])] - c[np.ix_([base], idx)] + c[base, base]
    return 0.5 * (g + nk.dagger(g))


def form_rank(eigenvalues: np.ndarray, rank_tol: float = nk.RANK_TOL) -> int:
    if eigenvalues.size == 0:
        return 0
    top = float(eigenvalues.max())
    cut = max(rank_tol * top, ABS_RANK_FLOOR)
    return int(np.sum(eigenvalues > cut))


@dataclass(frozen=True)
class IndexReport:
    units_used: tuple[str, ...]
    c_matrix: np.ndarray | None
    gram: np.ndarray | None
    eigenvalues: np.ndarray | None
    index_lower_bound: int | None
    cpd_margin: float | None
    no_units_flag: bool = False
    budget: int | None = None
    diagnostics: tuple[str, ...] = field(default_factory=tuple)

    @property
    def consistent(self) -> bool:
        return self.no_units_flag or self.cpd_margin >= -CPD_TOL

    def summary(self) -> str:
        if self.no_units_flag:
            budget = f" (search budget {self.budget})" if self.budget is not None else ""
            return f"no units found in search family{budget}"
        return f"index >= {self.index_lower_bound} (from {len(self.units_used)} units)"


def index_from_kernel(
    c: np.ndarray,
    labels: Sequence[str],
    rank_tol: float = nk.RANK_TOL,
    base: int = -1,
) -> IndexReport:
    g = zero_sum_gram(c, base) if c.shape[0] > 1 else np.zeros((0, 0), dtype=complex)
    ev = np.linalg.eigvalsh(g)[::-1] if g.size else np.zeros(0)
    margin = float(ev.min()) if ev.size else 0.0
    notes = []
    if margin < -CPD_TOL:
        notes.append(f"covariance form is not conditionally positive (min eigenvalue {margin:.2e}); "
                     "a non-unit may have passed verification")
    return IndexReport(tuple(labels), c, g, ev, form_rank(ev, rank_tol), margin, diagnostics=tuple(notes))


def index_lower_bound(
    units: Sequence[UnitCandidate],
    p: CPSemigroup,
    rank_tol: float = nk.RANK_TOL,
    base: int = -1,
    budget: int | None = None,
    depth_max: int = DEPTH_MAX,
) -> IndexReport:
    """Rank of the covariance form on zero-sum functions over ``units``.

    An empty family gives a report with ``no_units_flag`` set and no numbers;
    ``budget`` records how hard the search tried.
    """
    if not units:
        return IndexReport((), None, None, None, None, None, True, budget)
    c = covariance_kernel(units, p, depth_max)
    return index_from_kernel(c, [u.label for u in units], rank_tol, base)


def select_family(units: Sequence[UnitCandidate], max_size: int = MAX_FAMILY) -> list[UnitCandidate]:
    """Pick at most ``max_size`` units, preferring generators that are
    independent modulo the identity; remaining slots are filled in order.
    """
    units = list(units)
    if len(units) <= max_size:
        return units
    d = units[0].dim
    eye = nk.vec(np.eye(d)) / np.sqrt(d)

    def reduced(u):
        w = nk.vec(u.b - units[0].b)
        return w - eye * np.vdot(eye, w)

    chosen = [units[0]]
    span = np.zeros((d * d, 0), dtype=complex)
    for u in units[1:]:
        if len(chosen) >= max_size:
            break
        r = reduced(u)
        if np.linalg.norm(r) <= 1e-8 * (1 + np.linalg.norm(u.b)):
            continue
        trial = np.column_stack([span, r])
        if nk.numerical_rank(trial, 1e-8) > span.shape[1]:
            span = trial
            chosen.append(u)
    for u in units:
        if len(chosen) >= max_size:
            break
        if u not in chosen:
            chosen.append(u)
    order = {id(u): k for k, u in enumerate(units)}
    return sorted(chosen, key=lambda u: order[id(u)])


def product_unit(s: UnitCandidate, u: UnitCandidate) -> UnitCandidate:
    """``(S (x) T)_t = S_t (x) T_t``, generated by ``b_S (x) 1 + 1 (x) b_T``."""
    es, eu = np.eye(s.dim), np.eye(u.dim)
    b = np.kron(s.b, eu) + np.kron(es, u.b)
    k = None if s.k is None or u.k is None else s.k + u.k
    return UnitCandidate(s.dim * u.dim, b, k, f"{s.label}(x){u.label}")


@dataclass(frozen=True)
class AdditivityReport:
    lhs: int | None
    rhs: int | None
    product_kernel_ok: bool
    max_kernel_error: float
    product_labels: tuple[str, ...]
    unverified: tuple[str, ...] = ()
    report_p: IndexReport | None = None
    report_q: IndexReport | None = None
    report_pq: IndexReport | None = None

    @property
    def consistent(self) -> bool:
        return self.product_kernel_ok and not self.unverified and self.lhs == self.rhs


def additivity_check(
    p: CPSemigroup,
    q: CPSemigroup,
    units_p: Sequence[UnitCandidate],
    units_q: Sequence[UnitCandidate],
    rank_tol: float = nk.RANK_TOL,
) -> AdditivityReport:
    """Index additivity for ``P (x) Q`` on a product family.

    The product family is ``{S_i (x) T_0} u {S_0 (x) T_j}``: its zero-sum
    functions split into the two factors, so its index bound should equal
    the sum of the factor bounds. The kernel identity
    ``c(S (x) T, S' (x) T') = c_P(S, S') + c_Q(T, T')`` is checked on every pair
    of the family against the factor kernels.
    """
    if not units_p or not units_q:
        raise ValueError("both unit families must be nonempty")
    pq = tensor(p, q)
    rep_p = index_lower_bound(units_p, p, rank_tol)
    rep_q = index_lower_bound(units_q, q, rank_tol)
    pairs = [(i, 0) for i in range(len(units_p))] + [(0, j) for j in range(1, len(units_q))]
    family = [product_unit(units_p[i], units_q[j]) for i, j in pairs]
    checks = parallel_map(lambda u: verify_unit(u, pq), family)
    unverified = tuple(u.label for u, v in zip(family, checks) if not v.verified)
    labels = tuple(u.label for u in family)
    if unverified:
        return AdditivityReport(None, rep_p.index_lower_bound + rep_q.index_lower_bound, False, float("nan"),
                                labels, unverified, rep_p, rep_q)
    rep_pq = index_lower_bound(family, pq, rank_tol)
    expected = np.array(
        [[rep_p.c_matrix[a[0], b[0]] + rep_q.c_matrix[a[1], b[1]] for b in pairs] for a in pairs]
    )
    err = float(np.max(np.abs(rep_pq.c_matrix - expected)))
    return AdditivityReport(
        rep_pq.index_lower_bound,
        rep_p.index_lower_bound + rep_q.index_lower_bound,
        err <= KERNEL_TOL,
        err,
        labels,
        (),
        rep_p,
        rep_q,
        rep_pq,
    )


DILATION_TIMES = (0.25, 0.5, 1.0)


@dataclass(frozen=True)
class DilationReport:
    intertwiner_ok: bool
    intertwiner_gap: float
    partition_ok: bool
    partition_gap: float
    identity_gap: float
    index_direct: int | None
    index_partition: int | None

    @property
    def passed(self) -> bool:
        return self.intertwiner_ok and self.partition_ok and self.index_direct == self.index_partition


def trivial_dilation_check(
    p: CPSemigroup,
    units: Sequence[UnitCandidate],
    tol: float = 1e-8,
    times: Sequence[float] = DILATION_TIMES,
    rank_tol: float = nk.RANK_TOL,
) -> DilationReport:
    """Sanity check for a semigroup of automorphisms, which is its own dilation.

    (i) the intertwiner space of each ``P_t`` with its scalar inner product
    ``T2^* T1 = <T1, T2> 1`` has the same Gram spectrum as E_P(t);
    (ii) ``<u1(t), u2(t)> = exp(t c(u1, u2))``, so a one-interval partition
    already gives the limit; (iii) the index computed from those one-step
    inner products equals the one from the partition limits.
    """
    for t in times:
        if not is_multiplicative(evolve(p, t), tol):
            raise NotMultiplicativeError(f"P_t is not multiplicative at t={t:g}; the dilation is not trivial")

    gap = 0.0
    for t in times:
        ops = endo_intertwiners(evolve(p, t), tol)
        g_int = np.array([[intertwiner_inner(a, b) for b in ops] for a in ops])
        g_mos = gram(ops, p.space(t))
        s1 = np.sort(np.linalg.eigvalsh(0.5 * (g_int + nk.dagger(g_int))))
        s2 = np.sort(np.linalg.eigvalsh(0.5 * (g_mos + nk.dagger(g_mos))))
        if s1.shape != s2.shape:
            gap = float("inf")
            break
        gap = max(gap, float(np.max(np.abs(s1 - s2))))
    intertwiner_ok = gap <= tol

    units = list(units)
    part_gap = 0.0
    ident_gap = 0.0
    t = 1.0
    for i, s in enumerate(units):
        for u in units[i:]:
            limit = refine_to_limit(s, u, p, t)
            single = covariance_matrix(s, u, p, Partition.uniform(t, 1))
            part_gap = max(part_gap, float(np.max(np.abs(single - limit.B))))
            z = unit_inner(s, u, p, t)
            ident_gap = max(ident_gap, abs(z - cmath.exp(t * limit.covariance)))
    partition_ok = part_gap <= 1e-10 and ident_gap <= 1e-6

    idx_direct = idx_part = None
    if units:
        direct = np.array([[cmath.log(unit_inner(a, b, p, t)) / t for b in units] for a in units])
        labels = [u.label for u in units]
        idx_direct = index_from_kernel(direct, labels, rank_tol).index_lower_bound
        idx_part = index_lower_bound(units, p, rank_tol).index_lower_bound
    return DilationReport(intertwiner_ok, gap, partition_ok, part_gap, ident_gap, idx_direct, idx_part)
