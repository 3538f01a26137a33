import numpy as np
import pytest

from mosgroup.document import load_document, shipped_documents

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)

# criterion number -> (passed, detail); filled in by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def random_matrix(rng, d, scale=1.0):
    return scale * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)


def random_hermitian(rng, d):
    a = random_matrix(rng, d)
    return 0.5 * (a + a.conj().T)


def random_unitary(rng, n):
    q, r = np.linalg.qr(random_matrix(rng, n))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture(scope="session")
def docs():
    return {p.stem: load_document(p) for p in shipped_documents()}


@pytest.fixture(scope="session")
def semigroups(docs):
    return {k: d.semigroup() for k, d in docs.items()}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


# Shipped units written as b = drift + mu*1 + sum_k lam_k v_k^*; expanding
# <S_t, T_t> to first order in t gives the covariance in closed form:
# c(S, T) = mu_S + conj(mu_T) + sum_k lam_S,k conj(lam_T,k).
UNIT_COEFFICIENTS = {
    "identity": {"a": (0, []), "c": (1, [])},
    "unitary_sz": {"rot": (0, []), "rot_damped": (-0.5, []), "rot_phase": (0.5j, []), "rot_mixed": (0.25 - 0.25j, [])},
    "qubit_sigmax": {"zero": (0.5, [0]), "flip": (-0.5, [1]), "flip_i": (0, [0.5j])},
    "qubit_dephasing": {"zero": (0.5, [0]), "flip": (-0.5, [1]), "flip_i": (0, [0.5j])},
    "qubit_sxsz": {"zero": (1, [0, 0]), "flip_x": (0, [1, 0]), "flip_z": (0, [0, 1]), "mixed": (0, [0.5, 0.5j])},
    "qutrit_shift": {"drift": (0, [0]), "shift": (0, [0.5]), "shift_i": (0, [0.5j]), "shift_mixed": (0.25, [-0.5])},
}


def expected_covariance(name, s_label, t_label):
    mu_s, lam_s = UNIT_COEFFICIENTS[name][s_label]
    mu_t, lam_t = UNIT_COEFFICIENTS[name][t_label]
    return complex(mu_s + np.conj(mu_t) + np.vdot(np.array(lam_t, complex), np.array(lam_s, complex)))


def expected_kernel(name, labels):
    return np.array([[expected_covariance(name, a, b) for b in labels] for a in labels])
