"""Partition products of unit inner products and the covariance function.

For units ``S, T`` and a partition ``0 = t_0 < ... < t_n = t`` the partition
product is ``prod_k <S_{dt_k}, T_{dt_k}>`` with each inner product taken in
``E_P(dt_k)``. The 2x2 matrices of these products for a pair of normalized
units increase (in the PSD order) under refinement and converge to
``B(t) = [exp(t c_ij)]``; ``c_12`` is the covariance ``c_P(S, T)``.

Nets are refined dyadically. The increments of the net behave like
``K / 2^m``, so the limit is accelerated with a Richardson (Romberg) table in
powers of ``2^-m``; the raw nets are also exposed for the monotonicity check.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from mosgroup import numkernel as nk
from mosgroup.cpmaps import gram
from mosgroup.errors import ConvergenceError, DegenerateCovarianceError, NotInSpaceError
from mosgroup.semigroups import CPSemigroup
from mosgroup.units import UnitCandidate, growth_rate, unit_inner, unit_value

DEPTH_MAX = 14
LIMIT_TOL = 1e-9
BRANCH_TOL = 1e-4
ROMBERG_COLUMNS = 4


@dataclass(frozen=True)
class Partition:
    points: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(float(x) for x in self.points)
        if len(pts) < 2:
            raise ValueError("a partition needs at least one interval")
        if pts[0] != 0.0:
            raise ValueError("a partition must start at 0")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("partition points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @property
    def t_max(self) -> float:
        return self.points[-1]

    @property
    def increments(self) -> list[float]:
        return [b - a for a, b in zip(self.points, self.points[1:])]

    def __len__(self) -> int:
        return len(self.points) - 1

    @classmethod
    def uniform(cls, t: float, n: int) -> "Partition":
        return cls(tuple(t * k / n for k in range(n)) + (t,))

    @classmethod
    def dyadic(cls, t: float, m: int) -> "Partition":
        return cls.uniform(t, 2**m)

    @classmethod
    def from_breakpoints(cls, t: float, breakpoints: Sequence[float], m: int) -> "Partition":
        """Each interval between consecutive breakpoints split into ``2^m`` equal parts."""
        edges = [0.0, *sorted(breakpoints), t]
        pts = [0.0]
        n = 2**m
        for a, b in zip(edges, edges[1:]):
            pts.extend(a + (b - a) * k / n for k in range(1, n))
            pts.append(b)
        return cls(tuple(pts))


def _increment_key(dt: float) -> float:
    return float(f"{dt:.13e}")


def partition_product(s: UnitCandidate, u: UnitCandidate, p: CPSemigroup, part: Partition) -> complex:
    """``prod_k <S_{t_k - t_(k-1)}, T_{t_k - t_(k-1)}>``."""
    cache: dict[float, complex] = {}
    out = 1.0 + 0.0j
    for dt in part.increments:
        key = _increment_key(dt)
        if key not in cache:
            cache[key] = unit_inner(s, u, p, key)
        out *= cache[key]
    return out


def pair_gram(units: Sequence[UnitCandidate], p: CPSemigroup, t: float) -> np.ndarray:
    """``G[i, j] = <T_i(t), T_j(t)>`` in E_P(t)."""
    space = p.space(t)
    values = [unit_value(u, t) for u in units]
    for u, x in zip(units, values):
        res = space.range_residual(x)
        if res > space.member_tol:
            raise NotInSpaceError(f"unit {u.label!r} is not in E_P({t:g}) (residual {res:.2e})")
    return gram(values, space)


@dataclass(frozen=True)
class Normalized:
    units: tuple[UnitCandidate, ...]
    shifts: tuple[float, ...]


def normalize(units: Sequence[UnitCandidate], p: CPSemigroup) -> Normalized:
    """Shift each ``b`` by ``-(r/2) 1`` so that ``<T_t, T_t> <= 1`` for all ``t``.

    ``r`` is the small-time growth rate, which bounds ``log<T_t, T_t> / t``
    for every ``t``.
    """
    shifts = tuple(0.5 * growth_rate(u, p) for u in units)
    return Normalized(tuple(u.shifted(-c) for u, c in zip(units, shifts)), shifts)


def _schur_power(g: np.ndarray, m: int) -> np.ndarray:
    out = g.copy()
    for _ in range(m):
        out = out * out
    return out


def _net(units, p, t, breakpoints, m) -> np.ndarray:
    edges = [0.0, *sorted(breakpoints), t]
    out = np.ones((len(units), len(units)), dtype=complex)
    for a, b in zip(edges, edges[1:]):
        dt = _increment_key((b - a) / 2**m)
        out = out * _schur_power(pair_gram(units, p, dt), m)
    return out


def dyadic_nets(
    s: UnitCandidate,
    u: UnitCandidate,
    p: CPSemigroup,
    t: float,
    depth: int = DEPTH_MAX,
    breakpoints: Sequence[float] = (),
    normalized: bool = True,
) -> list[np.ndarray]:
    """Raw 2x2 matrices ``A_m`` for partitions refined dyadically, ``m = 0..depth``.

    With ``breakpoints`` every interval between them is refined separately,
    so the chain stays cofinal in the partitions containing those points.
    """
    units = (s, u)
    if normalized:
        units = normalize(units, p).units
    return [_net(units, p, t, breakpoints, m) for m in range(depth + 1)]


def covariance_matrix(s: UnitCandidate, u: UnitCandidate, p: CPSemigroup, part: Partition) -> np.ndarray:
    """``A[i, j] = f(T_i, T_j)`` over ``part`` for the normalized pair."""
    units = normalize((s, u), p).units
    out = np.ones((2, 2), dtype=complex)
    cache: dict[float, np.ndarray] = {}
    for dt in part.increments:
        key = _increment_key(dt)
        if key not in cache:
            cache[key] = pair_gram(units, p, key)
        out = out * cache[key]
    return out


@dataclass(frozen=True)
class NetLimit:
    B: np.ndarray
    depth: int
    residual: float
    raw_residual: float
    converged: bool


def _limit(units, p, t, breakpoints, depth_max, tol) -> NetLimit:
    table: list[list[np.ndarray]] = []
    best_prev = None
    raw_prev = None
    residual = math.inf
    raw_res = math.inf
    for m in range(depth_max + 1):
        a = _net(units, p, t, breakpoints, m)
        row = [a]
        for k in range(1, min(m, ROMBERG_COLUMNS) + 1):
            f = 2.0**k
            row.append((f * row[k - 1] - table[m - 1][k - 1]) / (f - 1))
        table.append(row)
        best = row[-1]
        if best_prev is not None:
            residual = float(np.linalg.norm(best - best_prev))
            raw_res = float(np.linalg.norm(a - raw_prev))
            if residual < tol:
                return NetLimit(best, m - 1, residual, raw_res, True)
        best_prev, raw_prev = best, a
    return NetLimit(best_prev, depth_max, residual, raw_res, False)


def partition_limit(
    s: UnitCandidate,
    u: UnitCandidate,
    p: CPSemigroup,
    t: float,
    breakpoints: Sequence[float] = (),
    depth_max: int = DEPTH_MAX,
    tol: float = LIMIT_TOL,
    normalized: bool = True,
) -> NetLimit:
    units = (s, u)
    if normalized:
        units = normalize(units, p).units
    return _limit(units, p, t, breakpoints, depth_max, tol)


@dataclass(frozen=True)
class CovarianceResult:
    t: float
    B: np.ndarray
    c: np.ndarray
    refinement_depth: int
    residual: float
    raw_residual: float = 0.0
    shifts: tuple[float, float] = (0.0, 0.0)
    branch_gap: float = 0.0
    labels: tuple[str, str] = ("", "")
    diagnostics: tuple[str, ...] = field(default_factory=tuple)

    @property
    def covariance(self) -> complex:
        """``c_P(S, T)`` for the original (un-normalized) pair."""
        return complex(self.c[0, 1] + self.shifts[0] + self.shifts[1])


def _exponents(b: np.ndarray, t: float) -> np.ndarray:
    c = np.empty_like(b)
    for idx, z in np.ndenumerate(b):
        if abs(z) <= 1e-12:
            raise DegenerateCovarianceError(f"limit entry {idx} vanishes; exponent undefined")
        c[idx] = cmath.log(z) / t
    return c


def refine_to_limit(
    s: UnitCandidate,
    u: UnitCandidate,
    p: CPSemigroup,
    t: float = 1.0,
    depth_max: int = DEPTH_MAX,
    tol: float = LIMIT_TOL,
) -> CovarianceResult:
    """Limit of the dyadic nets at time ``t`` and the exponent matrix ``c``.

    ``c = Log(B) / t`` with the principal branch; the same limit at ``t / 2``
    must give the same exponents within ``1e-4``, which catches branch
    wrap-around. Raises :class:`ConvergenceError` (carrying the partial
    result) if the accelerated net has not settled by ``depth_max``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    norm = normalize((s, u), p)
    labels = (s.label, u.label)
    lim = _limit(norm.units, p, t, (), depth_max, tol)
    if not lim.converged:
        partial = CovarianceResult(t, lim.B, np.full((2, 2), np.nan + 0j), lim.depth, lim.residual,
                                   lim.raw_residual, norm.shifts, math.nan, labels)
        raise ConvergenceError(
            f"partition net did not converge by depth {depth_max} (residual {lim.residual:.2e})", partial
        )
    half = _limit(norm.units, p, t / 2, (), depth_max, tol)
    if not half.converged:
        partial = CovarianceResult(t, lim.B, np.full((2, 2), np.nan + 0j), lim.depth, lim.residual,
                                   lim.raw_residual, norm.shifts, math.nan, labels)
        raise ConvergenceError(
            f"partition net at t/2 did not converge by depth {depth_max} (residual {half.residual:.2e})", partial
        )
    c = _exponents(lim.B, t)
    gap = float(np.max(np.abs(c - _exponents(half.B, t / 2))))
    notes = []
    if gap > BRANCH_TOL:
        notes.append(f"exponents at t and t/2 differ by {gap:.2e}; logarithm branch is ambiguous")
    for i in range(2):
        if abs(c[i, i].imag) > 1e-8:
            notes.append(f"diagonal exponent c[{i},{i}] has imaginary part {c[i, i].imag:.2e}")
        c[i, i] = c[i, i].real
    return CovarianceResult(t, lim.B, c, lim.depth, lim.residual, lim.raw_residual, norm.shifts, gap, labels,
                            tuple(notes))


def covariance(
    s: UnitCandidate,
    u: UnitCandidate,
    p: CPSemigroup,
    t: float = 1.0,
    check_t: float = 0.5,
    depth_max: int = DEPTH_MAX,
) -> complex:
    """``c_P(S, T)``, computed at ``t`` and confirmed at ``check_t``."""
    r1 = refine_to_limit(s, u, p, t, depth_max)
    r2 = refine_to_limit(s, u, p, check_t, depth_max)
    c1, c2 = r1.covariance, r2.covariance
    if abs(c1 - c2) > BRANCH_TOL or r1.branch_gap > BRANCH_TOL or r2.branch_gap > BRANCH_TOL:
        raise ConvergenceError(f"covariance at t={t:g} ({c1:.6g}) and t={check_t:g} ({c2:.6g}) disagree", r1)
    return c1


ORACLE_STEPS = (1e-2, 5e-3, 2.5e-3)


def generator_covariance_oracle(s: UnitCandidate, u: UnitCandidate, p: CPSemigroup) -> complex:
    """Small-time derivative of ``t -> <S_t, T_t>`` at 0.

    Independent of the partition nets: three one-sided difference quotients
    are combined by Richardson extrapolation (steps halve each time).
    """
    norm = normalize((s, u), p)
    a, b = norm.units
    q = [(unit_inner(a, b, p, h) - 1.0) / h for h in ORACLE_STEPS]
    q1 = [2 * q[1] - q[0], 2 * q[2] - q[1]]
    d = (4 * q1[1] - q1[0]) / 3
    return complex(d + norm.shifts[0] + norm.shifts[1])


@dataclass(frozen=True)
class DeviationBound:
    lhs: float
    rhs: float
    holds: bool
    partition_lhs: float
    partition_rhs: float
    partition_holds: bool


def check_limit_deviation_bound(
    s: UnitCandidate,
    u: UnitCandidate,
    p: CPSemigroup,
    t: float = 1.0,
    part: Partition | None = None,
    slack: float = 1e-8,
) -> DeviationBound:
    """``|b_ij(t) - <T_i(t), T_j(t)>|^2 <= (1 - <T_i(t),T_i(t)>)(1 - <T_j(t),T_j(t)>)``.

    Checked for all four entries of the normalized pair, both for the limit
    ``B`` and for the partition product over ``part`` (default: 8 equal
    intervals). The reported sides belong to the entry with least slack.
    """
    norm = normalize((s, u), p)
    g = pair_gram(norm.units, p, t)
    b = refine_to_limit(s, u, p, t).B
    part = part or Partition.uniform(t, 8)
    a = covariance_matrix(s, u, p, part)

    def worst(mat):
        best = None
        for i in range(2):
            for j in range(2):
                lhs = abs(mat[i, j] - g[i, j]) ** 2
                rhs = (1 - g[i, i].real) * (1 - g[j, j].real)
                if best is None or rhs - lhs < best[1] - best[0]:
                    best = (float(lhs), float(rhs))
        return best

    lhs, rhs = worst(b)
    plhs, prhs = worst(a)
    return DeviationBound(lhs, rhs, lhs <= rhs + slack, plhs, prhs, plhs <= prhs + slack)


SMALL_TIMES = tuple(2.0**-m for m in range(4, 11))


def small_time_distances(s: UnitCandidate, u: UnitCandidate, p: CPSemigroup) -> list[float]:
    norm = normalize((s, u), p)
    a, b = norm.units
    return [abs(unit_inner(a, b, p, t) - 1.0) for t in SMALL_TIMES]


def check_small_time_limit(s: UnitCandidate, u: UnitCandidate, p: CPSemigroup, tol: float = 1e-3) -> bool:
    """``|<S_t, T_t> - 1|`` decreases along ``t = 2^-4 .. 2^-10`` and ends below ``tol``."""
    dist = small_time_distances(s, u, p)
    decreasing = all(b <= a + 1e-15 for a, b in zip(dist, dist[1:]))
    return decreasing and dist[-1] < tol
