import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cavity_hom.linalg import (
    as_operator,
    check_density_matrix,
    commutator,
    dagger,
    dissipator_superop,
    hamiltonian_superop,
    identity,
    is_hermitian,
    left_superop,
    min_eigenvalue,
    projector,
    right_superop,
    transition_op,
)

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def complex_matrices(d):
    return st.tuples(arrays(float, (d, d), elements=finite), arrays(float, (d, d), elements=finite)).map(
        lambda p: p[0] + 1j * p[1]
    )


def vec(x):
    return x.reshape(-1)


def test_transition_op_single_entry():
    op = transition_op(1, 2, 3)
    assert op[1, 2] == 1 and np.count_nonzero(op) == 1
    with pytest.raises(ValueError):
        op[0, 0] = 5  # read-only


@pytest.mark.parametrize("i,j,d", [(3, 0, 3), (0, -1, 3), (0, 0, 0)])
def test_transition_op_out_of_range(i, j, d):
    with pytest.raises((IndexError, ValueError)):
        transition_op(i, j, d)


def test_as_operator_rejects_bad_input():
    with pytest.raises(ValueError):
        as_operator(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        as_operator([[np.nan]])


def test_commutator_dimension_mismatch():
    with pytest.raises(ValueError):
        commutator(np.eye(2), np.eye(3))


def test_ladder_commutator():
    # [sigma_-, sigma_+] on a two-level system is -sigma_z
    sm = transition_op(0, 1, 2)
    assert np.allclose(commutator(sm, dagger(sm)), np.diag([1, -1]))


def test_density_matrix_checks():
    check_density_matrix(identity(3) / 3)
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([1.2, -0.2]))
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([0.5, 0.4]))
    with pytest.raises(ValueError):
        check_density_matrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    rho = projector([1, 1j])
    assert np.isclose(np.trace(rho), 1) and is_hermitian(rho)
    assert min_eigenvalue(rho) > -1e-12


@settings(max_examples=40, deadline=None)
@given(complex_matrices(3), complex_matrices(3), complex_matrices(3))
def test_superoperators_match_matrix_products(a, b, x):
    assert np.allclose(left_superop(a) @ vec(x), vec(a @ x))
    assert np.allclose(right_superop(b) @ vec(x), vec(x @ b))
    assert np.allclose(hamiltonian_superop(a) @ vec(x), vec(-1j * (a @ x - x @ a)))
    cdc = dagger(b) @ b
    expected = b @ x @ dagger(b) - 0.5 * (cdc @ x + x @ cdc)
    assert np.allclose(dissipator_superop(b) @ vec(x), vec(expected))


@settings(max_examples=40, deadline=None)
@given(complex_matrices(4), complex_matrices(4))
def test_generator_is_trace_free(h, c):
    h = h + dagger(h)
    gen = hamiltonian_superop(h) + dissipator_superop(c)
    # trace functional vec(I)^T annihilates the generator
    assert np.allclose(vec(np.eye(4)) @ gen, 0, atol=1e-9)


def test_min_eigenvalue_stack():
    stack = np.stack([np.diag([1.0, 0.0]), np.diag([0.3, 0.7])])
    assert np.allclose(min_eigenvalue(stack), [0.0, 0.3])
