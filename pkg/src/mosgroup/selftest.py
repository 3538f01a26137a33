"""Invariant suite over the shipped example documents."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from mosgroup import numkernel as nk
from mosgroup.covariance import (
    check_limit_deviation_bound,
    check_small_time_limit,
    covariance,
    generator_covariance_oracle,
)
from mosgroup.cpmaps import CPMap, compose, comultiplication_gram, is_multiplicative
from mosgroup.document import ProblemDocument, load_document, shipped_documents
from mosgroup.index import additivity_check, index_lower_bound, trivial_dilation_check
from mosgroup.semigroups import default_time_grid, evolve
from mosgroup.units import verify_unit

TENSOR_PAIRS = (("identity", "identity"), ("identity", "qubit_sigmax"), ("qubit_sigmax", "qubit_dephasing"))


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    value: float | int | None = None

    def to_json(self) -> dict:
        v = self.value
        if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
            v = int(v)
        elif v is not None:
            v = float(v) if np.isfinite(v) else None
        return {"suite": self.suite, "name": self.name, "passed": bool(self.passed), "value": v}


def _semigroup_checks(label: str, doc: ProblemDocument) -> list[Check]:
    p = doc.semigroup()
    grid = default_time_grid()
    worst_law = 0.0
    for s, t in itertools.product(grid[:4], repeat=2):
        lhs = evolve(p, s + t).choi
        rhs = compose(evolve(p, s), evolve(p, t)).choi
        worst_law = max(worst_law, float(np.linalg.norm(lhs - rhs)))
    worst_psd = min(nk.is_psd(evolve(p, t).choi).min_eigenvalue for t in grid)
    return [
        Check("semigroup", f"{label}: semigroup law", worst_law <= 1e-8, worst_law),
        Check("semigroup", f"{label}: Choi PSD on grid", worst_psd >= -1e-8, worst_psd),
    ]


def _unit_checks(label: str, doc: ProblemDocument) -> list[Check]:
    p = doc.semigroup()
    out = []
    for u in doc.unit_candidates:
        v = verify_unit(u, p, doc.options.unit_grid)
        out.append(Check("units", f"{label}: {u.label} verifies", v.verified, v.minimal_k))
    return out


def _covariance_checks(label: str, doc: ProblemDocument) -> list[Check]:
    p = doc.semigroup()
    units = doc.unit_candidates
    out = []
    for s, u in itertools.combinations(units, 2):
        name = f"{label}: ({s.label}, {u.label})"
        c = covariance(s, u, p, depth_max=doc.options.depth_max)
        oracle = generator_covariance_oracle(s, u, p)
        out.append(Check("covariance", f"{name} oracle agreement", abs(c - oracle) <= 1e-4, abs(c - oracle)))
        back = covariance(u, s, p, depth_max=doc.options.depth_max)
        out.append(Check("covariance", f"{name} Hermitian", abs(c - np.conj(back)) <= 1e-8, abs(c - np.conj(back))))
        dev = check_limit_deviation_bound(s, u, p)
        out.append(Check("covariance", f"{name} deviation bound", dev.holds and dev.partition_holds,
                         dev.rhs - dev.lhs))
        out.append(Check("covariance", f"{name} small-time limit", check_small_time_limit(s, u, p)))
    if units:
        rep = index_lower_bound(units, p, doc.options.rank_tol)
        out.append(Check("index", f"{label}: conditional positivity", rep.consistent, rep.cpd_margin))
        out.append(Check("index", f"{label}: index lower bound", True, rep.index_lower_bound))
    return out


def _dilation_checks(label: str, doc: ProblemDocument) -> list[Check]:
    p = doc.semigroup()
    if not is_multiplicative(evolve(p, 1.0)):
        return []
    rep = trivial_dilation_check(p, doc.unit_candidates)
    return [Check("dilation", f"{label}: trivial dilation", rep.passed, rep.intertwiner_gap)]


def _tensor_checks(docs: dict[str, ProblemDocument]) -> list[Check]:
    out = []
    for a, b in TENSOR_PAIRS:
        if a not in docs or b not in docs:
            continue
        da, db = docs[a], docs[b]
        rep = additivity_check(da.semigroup(), db.semigroup(), da.unit_candidates, db.unit_candidates)
        out.append(Check("tensor", f"{a} (x) {b}: kernel additivity", rep.product_kernel_ok, rep.max_kernel_error))
        out.append(Check("tensor", f"{a} (x) {b}: index additivity", rep.lhs == rep.rhs, rep.lhs))
    return out


def _cpmap_checks(seed: int) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst_remix = 0.0
    worst_proj = 0.0
    for _ in range(5):
        d = int(rng.integers(2, 4))
        kraus = [rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for _ in range(2)]
        p = CPMap.from_kraus(kraus)
        z = rng.standard_normal((len(p.kraus),) * 2) + 1j * rng.standard_normal((len(p.kraus),) * 2)
        u, _ = np.linalg.qr(z)
        mixed = [sum(u[i, j] * p.kraus[j] for j in range(len(p.kraus))) for i in range(len(p.kraus))]
        worst_remix = max(worst_remix, float(np.linalg.norm(CPMap.from_kraus(mixed).choi - p.choi)))
        q = CPMap.from_kraus([rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))])
        g = comultiplication_gram(p, q)
        worst_proj = max(worst_proj, float(np.linalg.norm(g @ g - g)))
    return [
        Check("cpmaps", "Kraus remixing invariance", worst_remix <= 1e-9, worst_remix),
        Check("cpmaps", "comultiplication Gram is a projection", worst_proj <= 1e-7, worst_proj),
    ]


def run_selftest(paths=None, seed: int = 42, progress: Callable[[str], None] | None = None) -> list[Check]:
    paths = list(paths) if paths else shipped_documents()
    docs = {}
    for path in paths:
        doc = load_document(path)
        docs[doc.label or path.stem] = doc
    checks = _cpmap_checks(seed)
    for label, doc in docs.items():
        if progress:
            progress(label)
        checks += _semigroup_checks(label, doc)
        checks += _unit_checks(label, doc)
        checks += _covariance_checks(label, doc)
        checks += _dilation_checks(label, doc)
    checks += _tensor_checks(docs)
    return checks
