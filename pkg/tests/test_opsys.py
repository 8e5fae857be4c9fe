import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from helpers import SMALL, random_matrix, random_psd
from oscone import linalg
from oscone.errors import DimensionMismatch, Malformed, NotHermitian, SizeMismatch
from oscone.opsys import (
    DualSystem,
    OperatorSystem,
    SystemMatrix,
    amplify,
    builtin_system,
    choi_values,
    dual_cone_membership,
    dual_unit,
    level_positive,
    make_system,
    realize,
    resolve_system,
    system_from_dict,
    system_ref,
    system_to_dict,
)

E = linalg.matrix_unit
Z = np.diag([1.0, -1.0])


def test_make_system_examples():
    S = make_system([], d=2)
    assert S.dim == 1 and S.contains(np.eye(2))
    C2 = make_system([E(2, 0, 0)])
    assert C2.dim == 2
    assert C2.contains(Z) and not C2.contains(E(2, 0, 1))
    M2 = make_system([E(2, i, j) for i in range(2) for j in range(2)])
    assert M2.dim == 4
    for i in range(2):
        for j in range(2):
            assert M2.contains(E(2, i, j))


def test_make_system_errors():
    with pytest.raises(DimensionMismatch):
        make_system([np.eye(2), np.eye(3)])
    with pytest.raises(DimensionMismatch):
        make_system([])
    with pytest.raises(Malformed):
        OperatorSystem([Z])
    with pytest.raises(NotHermitian):
        OperatorSystem([np.eye(2), E(2, 0, 1)])
    with pytest.raises(Malformed):
        OperatorSystem([np.eye(2), Z, 2 * Z])


@pytest.mark.parametrize("name,dim", [("Mn:2", 4), ("Mn:3", 9), ("Cn:2", 2), ("Cn:4", 4), ("pauli-xz", 3), ("scalars", 1)])
def test_builtins(name, dim):
    S = builtin_system(name)
    assert S.dim == dim
    assert_allclose(S.basis[0], np.eye(S.ambient_dim))
    for b in S.basis:
        assert_allclose(b, b.conj().T)
    with pytest.raises(KeyError):
        builtin_system("Mn:5")


def test_realize_examples():
    C2 = builtin_system("Cn:2")
    assert_allclose(realize(C2.identity(1)), np.eye(2))
    assert_allclose(realize(C2.identity(2)), np.eye(4))
    x = SystemMatrix.from_matrices(C2, [[np.eye(2), Z], [Z, np.eye(2)]])
    assert_allclose(np.linalg.eigvalsh(realize(x)), [0, 0, 2, 2], atol=1e-14)
    assert level_positive(x, 1e-9).is_member


def test_level_positive_unit_and_negative():
    S = builtin_system("pauli-xz")
    assert level_positive(S.identity(3)).is_member
    v = level_positive(-S.identity(2))
    assert v.is_nonmember
    W = v.witness
    assert np.real(np.trace(W @ realize(-S.identity(2)))) == pytest.approx(-1)


def test_level_positive_rejects_non_hermitian():
    S = builtin_system("Cn:2")
    c = np.zeros((2, 2, 2))
    c[0, 1, 0] = 1
    with pytest.raises(NotHermitian):
        level_positive(SystemMatrix(S, c))


def test_system_matrix_shape_check():
    with pytest.raises(SizeMismatch):
        SystemMatrix(builtin_system("Mn:2"), np.zeros((2, 2, 3)))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(SMALL), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_compression_stability(name, k, r, seed):
    rng = np.random.default_rng(seed)
    S = builtin_system(name)
    X = random_psd(rng, S, k)
    B = rng.normal(size=(r, k)) + 1j * rng.normal(size=(r, k))
    Y = X.compress(B)
    Bd = np.kron(B, np.eye(S.ambient_dim))
    assert_allclose(realize(Y), Bd @ realize(X) @ Bd.conj().T, atol=1e-12)
    assert level_positive(Y).is_member


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(SMALL), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_realization_round_trip(name, k, seed):
    rng = np.random.default_rng(seed)
    S = builtin_system(name)
    X = random_matrix(rng, S, k)
    Y = SystemMatrix.from_realization(S, realize(X), k)
    assert_allclose(Y.coeffs, X.coeffs, atol=1e-12)


def test_dual_unit_examples():
    assert_allclose(dual_unit(builtin_system("Mn:2")).values, [1, 0, 0, 0], atol=1e-15)
    assert_allclose(dual_unit(builtin_system("scalars")).values, [1])
    assert_allclose(dual_unit(builtin_system("Cn:2")).values, [1, 0], atol=1e-15)


def test_dual_cone_trace_state():
    S = builtin_system("pauli-xz")
    D = DualSystem(S)
    F = D.identity(1)
    assert dual_cone_membership(F).is_member
    v = dual_cone_membership(-F)
    assert v.is_nonmember


def test_dual_cone_coordinate_functionals():
    # the diagonal coordinates of C^2 as a 2x2 matrix of functionals
    C2 = builtin_system("Cn:2")
    D = DualSystem(C2)
    coeffs = np.zeros((2, 2, 2), dtype=complex)
    for i in range(2):
        # f_ii(b_a) = (b_a)_ii
        coeffs[i, i] = [C2.basis[a][i, i] for a in range(2)]
    v = dual_cone_membership(SystemMatrix(D, coeffs))
    assert v.is_member
    choi = v.certificate
    assert linalg.min_eigenvalue(choi) >= -1e-8
    assert_allclose(choi_values(C2, choi, 2), coeffs, atol=1e-7)


def test_dual_cone_requires_dual():
    with pytest.raises(TypeError):
        dual_cone_membership(builtin_system("Cn:2").identity(1))


def test_amplify_contains_block_matrices(rng):
    S = builtin_system("Cn:2")
    A = amplify(S, 2)
    X = random_matrix(rng, S, 2)
    assert A.contains(realize(X))
    assert A.dim == 4 * S.dim
    assert amplify(S, 1) is S


def test_system_serialization():
    S = make_system([np.array([[0, 1], [1, 0]])], name="custom")
    T = system_from_dict(system_to_dict(S))
    assert T == S
    assert system_ref(builtin_system("Mn:2")) == "Mn:2"
    assert system_ref(S)["name"] == "custom"
    assert resolve_system({"dual": "Cn:2"}) == DualSystem(builtin_system("Cn:2"))
    with pytest.raises(Malformed):
        system_from_dict({"ambient_dim": 2})
