"""Problem documents: JSON descriptions of a semigroup, optional unit
candidates and numerical options.

Matrices are rectangular arrays of ``[re, im]`` pairs. Every validation error
names the offending field with a path such as ``noise_ops[1][0][2]``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from mosgroup import numkernel as nk
from mosgroup.errors import DocumentError
from mosgroup.semigroups import MAX_DIM, SPACE_RANK_TOL, CPSemigroup, GKSGenerator
from mosgroup.units import UnitCandidate, default_unit_grid

VERSION = "mosgroup/1"

DEFAULT_OPTIONS = {
    "psd_tol": 1e-8,
    "rank_tol": 1e-6,
    "depth_max": 14,
    "seed": 42,
    "budget": 200,
    "t_grid": None,
    "space_rank_tol": SPACE_RANK_TOL,
}

_TOP_KEYS = {"version", "label", "dim", "hamiltonian", "noise_ops", "decay", "unit_candidates", "options"}


def matrix_to_json(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[_num(z.real), _num(z.imag)] for z in row] for row in m]


def _num(x: float):
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return None
    # Normalize negative zero so serialized output does not depend on it.
    return x + 0.0


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def parse_matrix(raw, path: str, dim: int | None = None) -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        raise DocumentError(path, "expected a nonempty array of rows")
    rows = []
    ncols = None
    for i, row in enumerate(raw):
        if not isinstance(row, list) or not row:
            raise DocumentError(f"{path}[{i}]", "expected a nonempty array of [re, im] pairs")
        if ncols is None:
            ncols = len(row)
        elif len(row) != ncols:
            raise DocumentError(f"{path}[{i}]", f"row has {len(row)} entries, expected {ncols}")
        vals = []
        for j, z in enumerate(row):
            if not (isinstance(z, list) and len(z) == 2 and all(_is_number(x) for x in z)):
                raise DocumentError(f"{path}[{i}][{j}]", "expected a pair [re, im] of finite numbers")
            vals.append(complex(z[0], z[1]))
        rows.append(vals)
    m = np.array(rows, dtype=complex)
    if dim is not None and m.shape != (dim, dim):
        raise DocumentError(path, f"matrix has shape {m.shape[0]}x{m.shape[1]}, expected {dim}x{dim}")
    return m


@dataclass(frozen=True)
class Options:
    psd_tol: float = 1e-8
    rank_tol: float = 1e-6
    depth_max: int = 14
    seed: int = 42
    budget: int = 200
    t_grid: tuple[float, ...] | None = None
    space_rank_tol: float = SPACE_RANK_TOL

    @property
    def unit_grid(self) -> list[float]:
        return list(self.t_grid) if self.t_grid is not None else default_unit_grid()


def _parse_options(raw) -> Options:
    if raw is None:
        return Options()
    if not isinstance(raw, dict):
        raise DocumentError("options", "expected an object")
    unknown = sorted(set(raw) - set(DEFAULT_OPTIONS))
    if unknown:
        raise DocumentError(f"options.{unknown[0]}", "unknown option")
    vals: dict[str, Any] = {}
    for key in ("psd_tol", "rank_tol", "space_rank_tol"):
        if key in raw:
            x = raw[key]
            if not _is_number(x) or not 0 < x < 1:
                raise DocumentError(f"options.{key}", "expected a number in (0, 1)")
            vals[key] = float(x)
    for key, lo, hi in (("depth_max", 1, 14), ("budget", 1, 100000), ("seed", 0, 2**63 - 1)):
        if key in raw:
            x = raw[key]
            if not isinstance(x, int) or isinstance(x, bool) or not lo <= x <= hi:
                raise DocumentError(f"options.{key}", f"expected an integer in [{lo}, {hi}]")
            vals[key] = x
    if raw.get("t_grid") is not None:
        g = raw["t_grid"]
        if not isinstance(g, list) or not g:
            raise DocumentError("options.t_grid", "expected a nonempty array of positive times")
        for i, x in enumerate(g):
            if not _is_number(x) or x <= 0 or x > 100:
                raise DocumentError(f"options.t_grid[{i}]", "expected a time in (0, 100]")
        vals["t_grid"] = tuple(float(x) for x in g)
    return Options(**vals)


@dataclass(frozen=True, eq=False)
class ProblemDocument:
    dim: int
    hamiltonian: np.ndarray
    noise_ops: tuple[np.ndarray, ...] = ()
    decay: np.ndarray | None = None
    unit_candidates: tuple[UnitCandidate, ...] = ()
    options: Options = field(default_factory=Options)
    label: str = ""
    version: str = VERSION

    def semigroup(self) -> CPSemigroup:
        gen = GKSGenerator(self.dim, self.hamiltonian, self.noise_ops, self.decay)
        return CPSemigroup(gen, self.label, self.options.space_rank_tol, self.options.psd_tol)

    def to_json(self) -> dict:
        """Canonical form with defaults filled in."""
        out = {
            "version": self.version,
            "label": self.label,
            "dim": self.dim,
            "hamiltonian": matrix_to_json(self.hamiltonian),
            "noise_ops": [matrix_to_json(v) for v in self.noise_ops],
        }
        if self.decay is not None:
            out["decay"] = matrix_to_json(self.decay)
        out["unit_candidates"] = [{"label": u.label, "b": matrix_to_json(u.b)} for u in self.unit_candidates]
        o = self.options
        out["options"] = {
            "psd_tol": o.psd_tol,
            "rank_tol": o.rank_tol,
            "depth_max": o.depth_max,
            "seed": o.seed,
            "budget": o.budget,
            "t_grid": list(o.t_grid) if o.t_grid is not None else None,
            "space_rank_tol": o.space_rank_tol,
        }
        return out

    def digest(self) -> str:
        return canonical_digest(self.to_json())


def canonical_digest(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def parse_document(raw) -> ProblemDocument:
    if not isinstance(raw, dict):
        raise DocumentError("$", "document must be a JSON object")
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise DocumentError(unknown[0], "unknown field")
    if raw.get("version") != VERSION:
        raise DocumentError("version", f"expected {VERSION!r}, got {raw.get('version')!r}")
    label = raw.get("label", "")
    if not isinstance(label, str):
        raise DocumentError("label", "expected a string")
    dim = raw.get("dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise DocumentError("dim", "expected a positive integer")
    if dim > MAX_DIM:
        raise DocumentError("dim", f"dimension {dim} exceeds the supported maximum {MAX_DIM}")
    if "hamiltonian" not in raw:
        raise DocumentError("hamiltonian", "required field is missing")
    h = parse_matrix(raw["hamiltonian"], "hamiltonian", dim)
    if nk.hermitian_defect(h) > nk.HERMITIAN_TOL * (1 + np.linalg.norm(h)):
        raise DocumentError("hamiltonian", "matrix is not Hermitian")
    ops_raw = raw.get("noise_ops", [])
    if not isinstance(ops_raw, list):
        raise DocumentError("noise_ops", "expected an array of matrices")
    ops = tuple(parse_matrix(m, f"noise_ops[{i}]", dim) for i, m in enumerate(ops_raw))
    decay = None
    if raw.get("decay") is not None:
        decay = parse_matrix(raw["decay"], "decay", dim)
        if nk.hermitian_defect(decay) > nk.HERMITIAN_TOL * (1 + np.linalg.norm(decay)) or not nk.is_psd(decay).psd:
            raise DocumentError("decay", "matrix must be Hermitian positive semidefinite")
    cands_raw = raw.get("unit_candidates", [])
    if not isinstance(cands_raw, list):
        raise DocumentError("unit_candidates", "expected an array")
    cands = []
    seen = set()
    for i, c in enumerate(cands_raw):
        path = f"unit_candidates[{i}]"
        if not isinstance(c, dict):
            raise DocumentError(path, "expected an object with 'label' and 'b'")
        extra = sorted(set(c) - {"label", "b"})
        if extra:
            raise DocumentError(f"{path}.{extra[0]}", "unknown field")
        lab = c.get("label", f"u{i}")
        if not isinstance(lab, str) or not lab:
            raise DocumentError(f"{path}.label", "expected a nonempty string")
        if lab in seen:
            raise DocumentError(f"{path}.label", f"duplicate label {lab!r}")
        seen.add(lab)
        if "b" not in c:
            raise DocumentError(f"{path}.b", "required field is missing")
        cands.append(UnitCandidate(dim, parse_matrix(c["b"], f"{path}.b", dim), label=lab))
    options = _parse_options(raw.get("options"))
    return ProblemDocument(dim, h, ops, decay, tuple(cands), options, label)


def load_document(path: str | Path) -> ProblemDocument:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DocumentError("$", f"cannot read {path}: {exc.strerror}") from exc
    if text.startswith("\ufeff"):
        raise DocumentError("$", "document must be UTF-8 without a byte-order mark")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError("$", f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_document(raw)


def data_dir() -> Path:
    return Path(__file__).parent / "data"


def shipped_documents() -> list[Path]:
    return sorted(data_dir().glob("*.json"))
