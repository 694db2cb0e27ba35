from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qchaos.qcore import (
    WeakMeasurementModel,
    basis_overlaps,
    check_density,
    check_unitary,
    from_coordinates,
    haar_unitary,
    hermitian_basis,
    make_rng,
    post_measurement_state,
    random_diagonal_unitary,
    random_mixed_state,
    random_pure_state,
    shannon_entropy,
    spawn_streams,
    spin_coherent_state,
    spin_operators,
    to_coordinates,
    von_neumann_entropy,
    weak_measurement_kraus,
)


@pytest.mark.parametrize("two_j", [1, 2, 3, 4, 7, 20])
def test_spin_algebra(two_j):
    sp = spin_operators(two_j)
    j = sp.j
    assert np.allclose(sp.jx @ sp.jy - sp.jy @ sp.jx, 1j * sp.jz, atol=1e-12)
    casimir = sp.jx @ sp.jx + sp.jy @ sp.jy + sp.jz @ sp.jz
    assert np.allclose(casimir, j * (j + 1) * np.eye(sp.dim), atol=1e-12)
    assert sp.m[0] == j


def test_spin_trace_jx_squared():
    # j(j+1)(2j+1)/3 for j = 10
    jx = spin_operators(20).jx
    assert np.trace(jx @ jx).real == pytest.approx(770.0, abs=1e-10)


@pytest.mark.parametrize("dim", [1, 2, 5, 16])
def test_haar_unitary_is_unitary(dim, rng):
    check_unitary(haar_unitary(dim, rng))


def test_haar_first_moment(rng):
    # E|U_00|^2 = 1/d
    d = 6
    vals = [abs(haar_unitary(d, rng)[0, 0]) ** 2 for _ in range(4000)]
    assert np.mean(vals) == pytest.approx(1 / d, abs=0.01)


def test_check_unitary_rejects():
    with pytest.raises(ValueError, match="square"):
        check_unitary(np.ones((2, 3)))
    with pytest.raises(ValueError, match="not unitary"):
        check_unitary(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_random_diagonal_unitaries_commute(rng):
    b = haar_unitary(5, rng)
    u1, u2 = random_diagonal_unitary(5, b, rng), random_diagonal_unitary(5, b, rng)
    assert np.allclose(u1 @ u2, u2 @ u1, atol=1e-12)
    with pytest.raises(ValueError):
        random_diagonal_unitary(4, b, rng)


def test_coherent_state_north_pole_and_equator():
    psi = spin_coherent_state(3, 0.0, 0.0)
    assert np.allclose(psi, [1, 0, 0, 0])
    sp = spin_operators(3)
    # |+>^3 with |+> = (|0> + i|1>)/sqrt 2 points along +y
    psi = spin_coherent_state(3, np.pi / 2, -np.pi / 2)
    assert np.vdot(psi, sp.jy @ psi).real == pytest.approx(1.5)
    with pytest.raises(ValueError):
        spin_coherent_state(3, -0.1, 0.0)


def test_states_are_valid(rng):
    psi = random_pure_state(7, rng)
    assert np.linalg.norm(psi) == pytest.approx(1.0)
    check_density(random_mixed_state(7, rng))
    with pytest.raises(ValueError, match="trace"):
        check_density(np.eye(2))


def test_entropies():
    assert shannon_entropy([0.5, 0.5, 0.0]) == pytest.approx(np.log(2))
    assert von_neumann_entropy(np.eye(4) / 4) == pytest.approx(np.log(4))
    assert von_neumann_entropy(np.diag([1.0, 0.0])) == 0.0


@pytest.mark.parametrize("norm", [1.0, 2.0])
def test_hermitian_basis_orthogonality(norm):
    e = hermitian_basis(5, norm)
    assert e.shape == (24, 5, 5)
    gram = np.einsum("aij,bji->ab", e, e).real
    assert np.allclose(gram, norm * np.eye(24), atol=1e-12)
    assert np.allclose(np.trace(e, axis1=1, axis2=2), 0)
    assert np.allclose(e, e.conj().transpose(0, 2, 1))


@given(st.integers(2, 6), st.integers(0, 2**32 - 1), st.sampled_from([1.0, 2.0]))
@settings(max_examples=30, deadline=None)
def test_coordinates_round_trip(dim, seed, norm):
    rng = np.random.default_rng(seed)
    rho = random_mixed_state(dim, rng)
    basis = hermitian_basis(dim, norm)
    assert np.allclose(from_coordinates(to_coordinates(rho, basis), basis), rho, atol=1e-12)


def test_basis_overlaps_stack_matches_single(rng):
    basis = hermitian_basis(3)
    ops = np.array([random_mixed_state(3, rng) for _ in range(4)])
    stacked = basis_overlaps(ops, basis)
    assert np.allclose(stacked[2], basis_overlaps(ops[2], basis))


def test_weak_measurement_povm_completeness():
    jz = spin_operators(2).jz
    model = WeakMeasurementModel(jz, g=0.3, sigma=0.5)
    qs = np.linspace(-10, 10, 4001)
    total = sum(weak_measurement_kraus(model, q)[1] for q in qs) * (qs[1] - qs[0])
    assert np.allclose(total, np.eye(3), atol=1e-8)
    kraus, _ = weak_measurement_kraus(model, 0.1)
    out = post_measurement_state(np.eye(3) / 3, kraus)
    check_density(out)


def test_weak_measurement_validation():
    with pytest.raises(ValueError, match="sigma"):
        WeakMeasurementModel(np.eye(2), 1.0, 0.0)


def test_rng_helpers():
    g = np.random.default_rng(1)
    assert make_rng(g) is g
    a = [r.random() for r in spawn_streams(5, 3)]
    b = [r.random() for r in spawn_streams(5, 3)]
    assert a == b and len(set(a)) == 3
