import io
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from mosgroup.cli import run
from mosgroup.document import data_dir

HERE = Path(__file__).parent
GOLDEN = HERE / "golden"
FIXTURES = HERE / "fixtures"
MANIFEST = json.loads((FIXTURES / "malformed_manifest.json").read_text())
REGEN = os.environ.get("MOSGROUP_REGEN_GOLDEN") == "1"


def doc(name):
    return str(data_dir() / f"{name}.json")


# golden name -> (argv, expected exit code)
CASES = {
    "mos_sigmax": (["mos", doc("qubit_sigmax")], 0),
    "mos_qutrit_half": (["mos", doc("qutrit_shift"), "--t", "0.5"], 0),
    "verify_sxsz": (["verify-unit", doc("qubit_sxsz")], 0),
    "verify_bogus": (["verify-unit", str(FIXTURES / "sigmax_bogus.json")], 1),
    "discover_identity": (["discover-units", doc("identity")], 0),
    "covariance_sigmax": (["covariance", doc("qubit_sigmax")], 0),
    "covariance_identity": (["covariance", doc("identity")], 0),
    "index_sxsz": (["index", doc("qubit_sxsz")], 0),
    "index_bare": (["index", str(FIXTURES / "sigmax_bare.json")], 0),
    "tensor_sigmax_dephasing": (["tensor-index", doc("qubit_sigmax"), "--other", doc("qubit_dephasing")], 0),
    "dilation_unitary": (["dilation-check", doc("unitary_sz")], 0),
    "dilation_sigmax": (["dilation-check", doc("qubit_sigmax")], 1),
}


def invoke(argv, env=None):
    out, err = io.StringIO(), io.StringIO()
    old = dict(os.environ)
    os.environ.update(env or {})
    try:
        code = run(argv, out, err)
    finally:
        os.environ.clear()
        os.environ.update(old)
    return code, json.loads(out.getvalue()), err.getvalue()


def close(a, b, path="results", atol=1e-7):
    if isinstance(a, dict):
        assert isinstance(b, dict) and sorted(a) == sorted(b), path
        for k in a:
            close(a[k], b[k], f"{path}.{k}", atol)
    elif isinstance(a, list):
        assert isinstance(b, list) and len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            close(x, y, f"{path}[{i}]", atol)
    elif isinstance(a, float) or isinstance(b, float):
        assert a is not None and b is not None, path
        assert abs(a - b) <= atol * (1 + abs(b)), f"{path}: {a} != {b}"
    else:
        assert a == b, path


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden(name):
    argv, expected_code = CASES[name]
    code, report, _ = invoke(argv)
    assert code == expected_code
    assert sorted(report) == ["command", "diagnostics", "inputs_digest", "results", "timings"]
    assert report["command"] == argv[0]
    path = GOLDEN / f"{name}.json"
    stored = {"exit_code": code, "inputs_digest": report["inputs_digest"], "results": report["results"]}
    if REGEN:
        path.write_text(json.dumps(stored, indent=1, sort_keys=True) + "\n")
    golden = json.loads(path.read_text())
    assert golden["exit_code"] == code
    assert golden["inputs_digest"] == report["inputs_digest"]
    close(report["results"], golden["results"])


@pytest.mark.parametrize("name", sorted(MANIFEST))
def test_malformed_input_exit_code(name):
    code, report, err = invoke(["index", str(FIXTURES / "malformed" / name)])
    assert code == 2
    assert report["results"]["error"]["path"] == MANIFEST[name]
    assert err.startswith(f"mosgroup: malformed input at {MANIFEST[name]}:")


def test_bad_arguments():
    assert invoke(["index", doc("identity"), "--depth", "0"])[0] == 2
    assert invoke(["index", doc("identity"), "--t", "-1"])[0] == 2
    assert invoke(["index"])[0] == 2
    code, _, _ = invoke(["tensor-index", doc("identity")])
    assert code == 2
    code, _, _ = invoke(["verify-unit", str(FIXTURES / "sigmax_bare.json")])
    assert code == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["index", doc("qubit_sigmax")],
        ["discover-units", str(FIXTURES / "sigmax_bare.json")],
        ["index", str(FIXTURES / "sigmax_bare.json")],
        ["covariance", doc("qutrit_shift")],
    ],
    ids=["index", "discover", "index-discovered", "covariance"],
)
def test_results_byte_identical_across_runs(argv):
    outputs = set()
    for threads in ("1", "4", "4"):
        _, report, _ = invoke(argv, {"MOSGROUP_THREADS": threads})
        outputs.add(json.dumps(report["results"], sort_keys=True))
    assert len(outputs) == 1


def test_seed_override_changes_digest():
    a = invoke(["index", doc("identity")])[1]["inputs_digest"]
    b = invoke(["index", doc("identity"), "--seed", "7"])[1]["inputs_digest"]
    assert a != b


def test_pretty_goes_to_stderr():
    code, report, err = invoke(["index", doc("qubit_sigmax"), "--pretty"])
    assert code == 0 and "index" in err and report["results"]["index_lower_bound"] == 1


def test_selftest_passes():
    code, report, _ = invoke(["selftest"])
    assert code == 0
    assert report["results"]["failed"] == 0


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "mosgroup", "index", doc("identity")], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"]["index_lower_bound"] == 0
