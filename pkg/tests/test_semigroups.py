import itertools

import numpy as np
import pytest

from mosgroup import numkernel as nk
from mosgroup.cpmaps import CPMap, apply, compose, tensor_maps
from mosgroup.errors import DimensionError, GeneratorError
from mosgroup.semigroups import (
    CPSemigroup,
    GKSGenerator,
    default_time_grid,
    evolve,
    is_unital,
    kronecker_sum_superop,
    tensor,
)

from conftest import I2, SX, SZ, random_hermitian, random_matrix

SHIPPED = ["identity", "unitary_sz", "qubit_sigmax", "qubit_sxsz", "qubit_dephasing", "qutrit_shift"]


def test_default_grid():
    g = default_time_grid(2.0)
    assert len(g) == 13 and g[0] == 2.0 and g[-1] == 2.0 / 4096


def test_generator_is_unital_and_matches_superop():
    rng = np.random.default_rng(0)
    gen = GKSGenerator(3, random_hermitian(rng, 3), (random_matrix(rng, 3), random_matrix(rng, 3)))
    assert np.linalg.norm(gen.apply(np.eye(3))) <= 1e-10
    x = random_matrix(rng, 3)
    assert np.allclose(gen.superop() @ nk.vec(x), nk.vec(gen.apply(x)))
    h = gen.hamiltonian
    direct = 1j * (h @ x - x @ h)
    for v in gen.noise_ops:
        vv = v.conj().T @ v
        direct += v.conj().T @ x @ v - 0.5 * (vv @ x + x @ vv)
    assert np.allclose(gen.apply(x), direct)


def test_generator_rejects_bad_input():
    with pytest.raises(GeneratorError):
        GKSGenerator(2, np.array([[0, 1], [0, 0]]))
    with pytest.raises(DimensionError):
        GKSGenerator(2, np.zeros((2, 2)), (np.eye(3),))
    with pytest.raises(GeneratorError):
        GKSGenerator(2, np.zeros((2, 2)), (), decay=-np.eye(2))


def test_evolve_at_zero_and_trivial_generator():
    p = CPSemigroup.from_ops(SZ, [SX])
    assert np.allclose(evolve(p, 0).choi, CPMap.identity(2).choi)
    q = CPSemigroup.identity(2)
    for t in (0.1, 1.0, 7.0):
        assert np.allclose(evolve(q, t).choi, CPMap.identity(2).choi)


def test_evolve_guards():
    p = CPSemigroup.identity(2)
    with pytest.raises(ValueError):
        evolve(p, -1)
    with pytest.raises(ValueError):
        evolve(p, 101)


def test_sigma_x_noise_damps_sigma_z():
    p = CPSemigroup.from_ops(np.zeros((2, 2)), [SX])
    for t in (0.1, 0.5, 1.3):
        assert np.allclose(apply(evolve(p, t), SZ), np.exp(-2 * t) * SZ, atol=1e-12)
        assert np.allclose(apply(evolve(p, t), SX), SX, atol=1e-12)


@pytest.mark.parametrize("name", SHIPPED)
def test_semigroup_law_and_cp(name, semigroups):
    p = semigroups[name]
    scale = 1.0
    for s, t in itertools.product((0.1, 0.25, 0.5, 1.0), repeat=2):
        lhs = evolve(p, s + t).choi
        rhs = compose(evolve(p, s), evolve(p, t)).choi
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * scale
    for t in default_time_grid():
        assert nk.is_psd(evolve(p, t).choi).psd


@pytest.mark.parametrize("name", SHIPPED)
def test_continuity_at_zero(name, semigroups):
    p = semigroups[name]
    ident = CPMap.identity(p.dim).choi
    dist = [np.linalg.norm(evolve(p, t).choi - ident) for t in reversed(default_time_grid())]
    assert dist[0] < 1e-2
    assert all(a <= b + 1e-14 for a, b in zip(dist, dist[1:]))


def test_is_unital():
    assert is_unital(CPSemigroup.from_ops(np.zeros((2, 2)), [SX]))
    assert is_unital(CPSemigroup.from_ops(SZ, [SX, SZ]))
    assert not is_unital(CPSemigroup.from_ops(np.zeros((2, 2)), [SX], decay=0.5 * I2))
    with pytest.raises(ValueError):
        is_unital(CPSemigroup.identity(2), [])


def test_tensor_matches_kraus_product():
    p = CPSemigroup.from_ops(0.3 * SZ, [SX])
    q = CPSemigroup.from_ops(np.zeros((2, 2)), [0.7 * SZ])
    pq = tensor(p, q)
    for t in (0.3, 1.0):
        expected = tensor_maps(evolve(p, t), evolve(q, t))
        assert np.allclose(evolve(pq, t).choi, expected.choi, atol=1e-8)
    x, y = SX + 0.5j * SZ, I2 + SX
    t = 0.4
    lhs = apply(evolve(pq, t), np.kron(x, y))
    assert np.allclose(lhs, np.kron(apply(evolve(p, t), x), apply(evolve(q, t), y)), atol=1e-10)


def test_tensor_generator_is_kronecker_sum():
    rng = np.random.default_rng(4)
    p = CPSemigroup.from_ops(random_hermitian(rng, 2), [random_matrix(rng, 2)])
    q = CPSemigroup.from_ops(random_hermitian(rng, 2), [random_matrix(rng, 2), random_matrix(rng, 2)])
    assert np.allclose(tensor(p, q).superop, kronecker_sum_superop(p, q), atol=1e-12)


def test_tensor_identity_and_unitality():
    q = CPSemigroup.from_ops(np.zeros((2, 2)), [SX])
    pq = tensor(CPSemigroup.identity(2), q)
    y = SZ + 0.3 * SX
    assert np.allclose(apply(evolve(pq, 0.7), np.kron(I2, y)), np.kron(I2, apply(evolve(q, 0.7), y)))
    assert is_unital(pq)


def test_tensor_dimension_guard():
    with pytest.raises(DimensionError):
        tensor(CPSemigroup.identity(3), CPSemigroup.identity(3))
    with pytest.raises(DimensionError):
        CPSemigroup.identity(9)
