import json
from pathlib import Path

import numpy as np
import pytest

from mosgroup.document import (
    DEFAULT_OPTIONS,
    Options,
    canonical_digest,
    load_document,
    matrix_to_json,
    parse_document,
    parse_matrix,
    shipped_documents,
)
from mosgroup.errors import DocumentError

FIXTURES = Path(__file__).parent / "fixtures"
MANIFEST = json.loads((FIXTURES / "malformed_manifest.json").read_text())


def minimal(**extra):
    doc = {"version": "mosgroup/1", "dim": 2, "hamiltonian": [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]}
    doc.update(extra)
    return doc


def test_shipped_documents_present():
    names = sorted(p.stem for p in shipped_documents())
    assert names == ["identity", "qubit_dephasing", "qubit_sigmax", "qubit_sxsz", "qutrit_shift", "unitary_sz"]


def test_minimal_document_defaults():
    doc = parse_document(minimal())
    assert doc.noise_ops == () and doc.unit_candidates == () and doc.decay is None
    assert doc.options == Options()
    assert doc.to_json()["options"] == DEFAULT_OPTIONS


def test_matrix_round_trip():
    m = np.array([[1 + 2j, -0.5], [0.25j, -0.0]])
    back = parse_matrix(matrix_to_json(m), "m", 2)
    assert np.array_equal(back, m)
    # negative zero is written as plain zero
    assert matrix_to_json(m)[1][1] == [0.0, 0.0]
    assert str(matrix_to_json(m)[1][1][0]) == "0.0"


@pytest.mark.parametrize("path", shipped_documents(), ids=lambda p: p.stem)
def test_shipped_round_trip(path):
    doc = load_document(path)
    again = parse_document(json.loads(json.dumps(doc.to_json())))
    assert again.to_json() == doc.to_json()
    assert again.digest() == doc.digest()
    assert [u.label for u in again.unit_candidates] == [u.label for u in doc.unit_candidates]


def test_digest_ignores_key_order_and_defaults():
    a = parse_document(minimal())
    b = parse_document(dict(reversed(list(minimal(options={"seed": 42}).items()))))
    assert a.digest() == b.digest()
    c = parse_document(minimal(options={"seed": 43}))
    assert a.digest() != c.digest()
    assert canonical_digest({"b": 1, "a": 2}) == canonical_digest({"a": 2, "b": 1})


def test_digest_independent_of_file_location(tmp_path):
    src = shipped_documents()[0]
    dst = tmp_path / "copy.json"
    dst.write_text(src.read_text())
    assert load_document(src).digest() == load_document(dst).digest()


def test_options_parsing():
    doc = parse_document(minimal(options={"t_grid": [1, 0.5], "depth_max": 3, "rank_tol": 1e-4}))
    assert doc.options.unit_grid == [1.0, 0.5]
    assert doc.options.depth_max == 3 and doc.options.rank_tol == 1e-4


@pytest.mark.parametrize("name", sorted(MANIFEST))
def test_malformed_fixtures_report_path(name):
    with pytest.raises(DocumentError) as exc:
        load_document(FIXTURES / "malformed" / name)
    assert exc.value.path == MANIFEST[name]


def test_bad_json_reports_location():
    with pytest.raises(DocumentError) as exc:
        load_document(FIXTURES / "malformed" / "bad_json.json")
    assert "line 3" in exc.value.message


def test_missing_file(tmp_path):
    with pytest.raises(DocumentError) as exc:
        load_document(tmp_path / "nope.json")
    assert exc.value.path == "$"


@pytest.mark.parametrize(
    "patch,path",
    [
        ({"options": {"t_grid": [1, -1]}}, "options.t_grid[1]"),
        ({"options": {"psd_tol": 2}}, "options.psd_tol"),
        ({"options": {"depth_max": True}}, "options.depth_max"),
        ({"options": []}, "options"),
        ({"noise_ops": {}}, "noise_ops"),
        ({"unit_candidates": [{"label": "a"}]}, "unit_candidates[0].b"),
        ({"unit_candidates": [{"label": "", "b": [[[0, 0]]]}]}, "unit_candidates[0].label"),
        ({"unit_candidates": [{"label": "a", "b": [[[0, 0]]], "k": 1}]}, "unit_candidates[0].k"),
        ({"label": 3}, "label"),
        ({"dim": 0}, "dim"),
        ({"dim": 3}, "hamiltonian"),
        ({"hamiltonian": [[[0, 0], [float("nan"), 0]], [[0, 0], [0, 0]]]}, "hamiltonian[0][1]"),
    ],
)
def test_parse_error_paths(patch, path):
    with pytest.raises(DocumentError) as exc:
        parse_document(minimal(**patch))
    assert exc.value.path == path
