"""Units of a CP semigroup: operator semigroups ``T_t = exp(t b)`` with
``omega(T_t) <= exp(k t) P_t`` for every ``t > 0``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from mosgroup import numkernel as nk
from mosgroup.cpmaps import cp_leq, mos_inner, mos_member, omega
from mosgroup.parallel import parallel_map
from mosgroup.semigroups import CPSemigroup, evolve

K_BRACKET = 50.0
K_TOL = 1e-6
# Small-t probes for the normalization limit <T_t, T_t> -> 1.
PROBE_TIMES = (2.0**-14, 2.0**-15)
LIMIT_TOL = 1e-4
DEDUPE_TOL = 1e-8


def default_unit_grid() -> list[float]:
    return [2.0**-m for m in range(11)] + [2.0]


@dataclass(frozen=True, eq=False)
class UnitCandidate:
    dim: int
    b: np.ndarray
    k: float | None = None
    label: str = ""

    def __post_init__(self):
        b = nk.as_matrix(self.b, square=True, name="unit generator")
        if b.shape != (self.dim, self.dim):
            raise ValueError(f"unit generator has shape {b.shape}, expected {(self.dim, self.dim)}")
        object.__setattr__(self, "b", b)

    @classmethod
    def scalar(cls, dim: int, c: complex, label: str = "") -> "UnitCandidate":
        return cls(dim, c * np.eye(dim, dtype=complex), label=label or f"scalar({c})")

    def shifted(self, c: float, label: str | None = None) -> "UnitCandidate":
        """The candidate with generator ``b + c 1``."""
        return UnitCandidate(self.dim, self.b + c * np.eye(self.dim), None, self.label if label is None else label)


def unit_value(u: UnitCandidate, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    return nk.matrix_exp(t * u.b)


@dataclass(frozen=True)
class UnitVerification:
    verified: bool
    minimal_k: float | None
    grid: tuple[float, ...]
    worst_margin: float | None
    norms: tuple[float, ...] = ()
    limit_value: float | None = None
    failure: str | None = None


def _norms(u: UnitCandidate, p: CPSemigroup, times: Sequence[float]):
    """Squared E_P(t) norms of T_t, or the first time at which membership fails."""

    def one(t):
        return mos_member(unit_value(u, t), p.space(t))

    results = parallel_map(one, list(times))
    for t, m in zip(times, results):
        if not m.member:
            return None, t, m.residual
    return [m.norm_sq for m in results], None, None


def _bisect_k(norms: Sequence[float], grid: Sequence[float]) -> float | None:
    """Least k in the bracket with ``norm(t)^(1/t) <= exp(k)`` on the grid."""
    rates = [math.log(n) / t if n > 0 else -math.inf for n, t in zip(norms, grid)]

    def ok(k):
        return all(r <= k for r in rates)

    lo, hi = -K_BRACKET, K_BRACKET
    if not ok(hi):
        return None
    if ok(lo):
        return lo
    while hi - lo > K_TOL:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def verify_unit(
    u: UnitCandidate,
    p: CPSemigroup,
    t_grid: Sequence[float] | None = None,
    tol: float = 1e-8,
) -> UnitVerification:
    """Check the unit condition on a time grid.

    Besides membership and the growth bound on ``t_grid``, the squared norms
    at two tiny probe times are extrapolated to ``t -> 0`` and must approach
    1; this rejects candidates whose growth rate diverges below the grid.
    The growth bound is also re-certified directly in the CP order at
    ``k = minimal_k + 1e-6``; ``worst_margin`` is the most negative scaled
    Choi eigenvalue seen.
    """
    grid = tuple(sorted(float(t) for t in (t_grid if t_grid is not None else default_unit_grid())))
    if not grid or grid[0] <= 0:
        raise ValueError("verification grid must be nonempty with positive times")
    if u.dim != p.dim:
        raise ValueError(f"unit of dimension {u.dim} for a semigroup of dimension {p.dim}")

    norms, bad_t, res = _norms(u, p, grid)
    if norms is None:
        return UnitVerification(False, None, grid, None, failure=f"T_t not in E_P(t) at t={bad_t:g} (residual {res:.2e})")
    k = _bisect_k(norms, grid)
    if k is None or any(n > math.exp(k * t) * (1 + tol) for n, t in zip(norms, grid)):
        return UnitVerification(False, None, grid, None, tuple(norms), failure=f"growth exceeds k={K_BRACKET:g}")

    probe, bad_t, res = _norms(u, p, PROBE_TIMES)
    if probe is None:
        return UnitVerification(False, k, grid, None, tuple(norms), failure=f"T_t not in E_P(t) at t={bad_t:g} (residual {res:.2e})")
    limit = 2.0 * probe[1] - probe[0]
    if abs(limit - 1.0) > LIMIT_TOL:
        return UnitVerification(
            False, k, grid, None, tuple(norms), limit, failure=f"<T_t, T_t> tends to {limit:.6g}, not 1, as t -> 0"
        )

    def margin(t):
        target = evolve(p, t).scaled(math.exp((k + K_TOL) * t))
        cert = cp_leq(omega(unit_value(u, t)), target, tol)
        return cert.difference_min_eigenvalue / cert.scale

    worst = min(parallel_map(margin, list(grid)))
    ok = worst >= -tol
    return UnitVerification(
        ok, k, grid, worst, tuple(norms), limit, None if ok else f"CP-order certificate failed (margin {worst:.2e})"
    )


def with_growth(u: UnitCandidate, v: UnitVerification) -> UnitCandidate:
    return dataclasses.replace(u, k=v.minimal_k)


def growth_rate(u: UnitCandidate, p: CPSemigroup) -> float:
    """``lim_{t -> 0} log<T_t, T_t> / t``, the least valid growth constant.

    ``t -> <T_t, T_t>`` is submultiplicative, so the rate is largest as
    ``t -> 0``; Richardson extrapolation of two probe times estimates the
    limit, and the largest sampled rate guards against undershoot.
    """
    times = (2.0**-13,) + PROBE_TIMES
    norms, bad_t, _ = _norms(u, p, times)
    if norms is None:
        raise ValueError(f"candidate {u.label!r} is not in E_P(t) at t={bad_t:g}")
    rates = [math.log(n) / t for n, t in zip(norms, times)]
    # rate(t) = r0 + a t + b t^2 + ...; eliminate the first two corrections.
    r1 = 2 * rates[1] - rates[0]
    r2 = 2 * rates[2] - rates[1]
    r0 = (4 * r2 - r1) / 3
    return max(r0, max(rates))


def unit_inner(s: UnitCandidate, u: UnitCandidate, p: CPSemigroup, t: float) -> complex:
    """``<S_t, T_t>`` in E_P(t)."""
    space = p.space(t)
    return mos_inner(unit_value(s, t), unit_value(u, t), space)


def search_directions(p: CPSemigroup) -> tuple[list[np.ndarray], list[np.ndarray]]:
    gen = p.generator
    return [nk.dagger(v) for v in gen.noise_ops], list(gen.noise_ops)


_GRID_SCALARS = (0.0, 0.5, -0.5, 0.5j)
_GRID_COEFFS = (0.5, -0.5, 0.5j, 1.0)


def _grid_candidates(p: CPSemigroup):
    """Deterministic candidates: drift plus one scalar and at most one direction."""
    adj, plain = search_directions(p)
    base = p.generator.drift
    eye = np.eye(p.dim)
    for mu in _GRID_SCALARS:
        yield base + mu * eye
    for dirs in (adj, plain):
        for v in dirs:
            for lam in _GRID_COEFFS:
                for mu in _GRID_SCALARS[:2]:
                    yield base + mu * eye + lam * v


def _random_candidates(p: CPSemigroup, rng: np.random.Generator):
    adj, plain = search_directions(p)
    base = p.generator.drift
    eye = np.eye(p.dim)

    def cgauss(n, scale):
        return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)

    while True:
        mu = cgauss(1, 0.5)[0]
        lam = cgauss(len(adj), 0.5)
        use_plain = rng.random() < 0.5
        lam2 = cgauss(len(plain), 0.5) if use_plain else np.zeros(len(plain))
        b = base + mu * eye
        for c, v in zip(lam, adj):
            b = b + c * v
        for c, v in zip(lam2, plain):
            b = b + c * v
        yield b


def discover_units(
    p: CPSemigroup,
    budget: int = 200,
    seed: int = 42,
    t_grid: Sequence[float] | None = None,
) -> list[UnitCandidate]:
    """Search ``b = drift + mu 1 + sum lam_k v_k^* + sum lam'_k v_k`` for units.

    The first candidates come from a fixed grid, the rest from a seeded
    random stream; ``budget`` caps the total number tried. Every returned
    candidate passed :func:`verify_unit`. An empty list means none were found.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = np.random.default_rng(seed)
    candidates = []
    for i, b in enumerate(_grid_candidates(p)):
        if len(candidates) >= budget:
            break
        candidates.append(UnitCandidate(p.dim, b, label=f"grid-{i:03d}"))
    rand = _random_candidates(p, rng)
    i = 0
    while len(candidates) < budget:
        candidates.append(UnitCandidate(p.dim, next(rand), label=f"rand-{i:03d}"))
        i += 1

    distinct: list[UnitCandidate] = []
    for cand in candidates:
        if not any(np.linalg.norm(cand.b - f.b) <= DEDUPE_TOL for f in distinct):
            distinct.append(cand)
    checks = parallel_map(lambda c: verify_unit(c, p, t_grid), distinct)
    found = [with_growth(c, v) for c, v in zip(distinct, checks) if v.verified]
    return sorted(found, key=lambda c: c.label)
