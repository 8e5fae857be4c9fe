import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from helpers import SMALL, max_entangled, random_element, random_matrix, random_psd, units_matrix
from oscone import linalg
from oscone.errors import NotHermitian, NotPositive, SizeMismatch
from oscone.opsys import SystemMatrix, builtin_system, level_positive
from oscone.tensor import (
    DFormCertificate,
    MaxConeCertificate,
    MaxConeWitness,
    TensorElement,
    block_matrix,
    compress_kron,
    decompose_as_schur,
    kron_as_schur,
    normal_form_level1,
    schur_product,
    tensor_kron,
)

SCALARS = builtin_system("scalars")


def test_schur_product_of_units():
    S, T = builtin_system("Cn:2"), builtin_system("pauli-xz")
    u = schur_product(S.identity(1), T.identity(1))
    assert u.distance(TensorElement.unit(S, T)) == 0


def test_schur_product_scalar_case_is_hadamard():
    X = SystemMatrix.scalar(SCALARS, [[1, 1], [1, 1]])
    Y = SystemMatrix.scalar(SCALARS, [[2, 0], [0, 2]])
    u = schur_product(X, Y)
    assert_array_equal(u.coeffs[:, :, 0, 0], [[2, 0], [0, 2]])


def test_schur_product_size_mismatch():
    with pytest.raises(SizeMismatch):
        schur_product(SCALARS.identity(1), SCALARS.identity(2))


def test_compress_kron_picks_diagonal_pairs(rng):
    S, T = builtin_system("Mn:2"), builtin_system("Cn:2")
    X, Y = random_matrix(rng, S, 2), random_matrix(rng, T, 2)
    K = tensor_kron(X, Y).coeffs
    # E = [E_11 E_22] keeps rows and columns 1 and 4 of the 4x4 middle matrix
    expected = K[np.ix_([0, 3], [0, 3])]
    assert_allclose(compress_kron(X, Y).coeffs, expected, atol=0)
    assert compress_kron(X, Y).distance(schur_product(X, Y)) <= 1e-12


def test_compress_kron_level_one(rng):
    S, T = builtin_system("pauli-xz"), builtin_system("Mn:2")
    x, y = random_matrix(rng, S, 1), random_matrix(rng, T, 1)
    assert_allclose(compress_kron(x, y).coeffs[0, 0], np.outer(x.coeffs[0, 0], y.coeffs[0, 0]))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(SMALL), st.sampled_from(SMALL), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_compress_kron_equals_schur_product(a, b, n, seed):
    rng = np.random.default_rng(seed)
    X, Y = random_matrix(rng, builtin_system(a), n), random_matrix(rng, builtin_system(b), n)
    assert compress_kron(X, Y).distance(schur_product(X, Y)) <= 1e-12


def test_realization_of_schur_product_is_entrywise_kron(rng):
    S, T = builtin_system("Cn:2"), builtin_system("Mn:2")
    X, Y = random_matrix(rng, S, 2), random_matrix(rng, T, 2)
    R = schur_product(X, Y).realize().reshape(2, 4, 2, 4)
    RX, RY = X.realize().reshape(2, 2, 2, 2), Y.realize().reshape(2, 2, 2, 2)
    for i in range(2):
        for j in range(2):
            assert_allclose(R[i, :, j, :], np.kron(RX[i, :, j, :], RY[i, :, j, :]), atol=1e-13)


def test_decompose_single_elementary_layer(rng):
    S, T = builtin_system("Mn:2"), builtin_system("pauli-xz")
    X, Y = random_matrix(rng, S, 2), SystemMatrix.scalar(T, np.ones((2, 2)))
    P = schur_product(X, Y)
    dec = decompose_as_schur(P)
    assert dec.k == 2
    assert_array_equal(dec.A, np.eye(2))
    assert dec.assemble().distance(P) <= 1e-12


def test_decompose_two_terms_level_one(rng):
    S, T = builtin_system("Cn:2"), builtin_system("Cn:2")
    c = np.eye(2)[None, None]
    P = TensorElement(S, T, c)
    dec = decompose_as_schur(P)
    assert dec.k == 2
    assert_array_equal(dec.A, [[1, 1]])
    assert dec.assemble().distance(P) <= 1e-12


def test_decompose_level_two_three_layers(rng):
    S, T = builtin_system("Mn:2"), builtin_system("pauli-xz")
    P = random_element(rng, S, T, 2)
    dec = decompose_as_schur(P)
    assert dec.k == 6
    assert dec.assemble().distance(P) <= 1e-12


def test_kron_as_schur_scalars_unchanged(rng):
    S, T = builtin_system("Cn:2"), builtin_system("Mn:2")
    x, y = random_matrix(rng, S, 1), random_matrix(rng, T, 1)
    X2, Y2 = kron_as_schur(x, y)
    assert_array_equal(X2.coeffs, x.coeffs)
    assert_array_equal(Y2.coeffs, y.coeffs)


def test_kron_as_schur_identity_pattern():
    S, T = builtin_system("Cn:2"), builtin_system("pauli-xz")
    X, y = S.identity(2), T.identity(1)
    X2, Y2 = kron_as_schur(X, y)
    assert schur_product(X2, Y2).distance(tensor_kron(X, y)) <= 1e-15
    assert_array_equal(Y2.coeffs[:, :, 0], np.ones((2, 2)))


def test_kron_as_schur_preserves_positivity(rng):
    S, T = builtin_system("Mn:2"), builtin_system("Mn:2")
    X, Y = random_psd(rng, S, 2), random_psd(rng, T, 2)
    X2, Y2 = kron_as_schur(X, Y)
    assert level_positive(X2).is_member and level_positive(Y2).is_member
    assert schur_product(X2, Y2).distance(tensor_kron(X, Y)) <= 1e-12


def test_element_realization_and_projection(rng):
    S, T = builtin_system("pauli-xz"), builtin_system("Cn:2")
    u = random_element(rng, S, T, 2)
    v = TensorElement.from_realization(S, T, u.realize(), 2)
    assert v.distance(u) <= 1e-12
    assert u.swap().swap().distance(u) == 0


def test_element_checks():
    S = builtin_system("Cn:2")
    with pytest.raises(SizeMismatch):
        TensorElement(S, S, np.zeros((1, 1, 2, 3)))
    c = np.zeros((2, 2, 2, 2), dtype=complex)
    c[0, 1, 0, 0] = 1
    with pytest.raises(NotHermitian):
        TensorElement(S, S, c).check_hermitian()
    with pytest.raises(SizeMismatch):
        TensorElement.unit(S, S) + TensorElement.unit(S, S, 2)


def test_block_matrix(rng):
    S, T = builtin_system("Cn:2"), builtin_system("Cn:2")
    u = random_element(rng, S, T)
    one = TensorElement.unit(S, T)
    B = block_matrix([[one, u], [u.adjoint(), one]])
    assert B.level == 2
    assert_array_equal(B.coeffs[0, 1], u.coeffs[0, 0])


def test_normal_form_units():
    S, T = builtin_system("Cn:2"), builtin_system("Mn:2")
    c = normal_form_level1([[1]], S.identity(1), T.identity(1))
    assert c.k == 1
    assert c.element.distance(TensorElement.unit(S, T)) == 0
    assert c.verify(1e-12)


def test_normal_form_single_entry(rng):
    S, T = builtin_system("pauli-xz"), builtin_system("Mn:2")
    p, q = random_psd(rng, S, 1), random_psd(rng, T, 1)
    c = normal_form_level1([[2.0]], p, q)
    assert_allclose(c.element.coeffs[0, 0], 4 * np.outer(p.coeffs[0, 0], q.coeffs[0, 0]), atol=1e-12)
    assert c.verify(1e-12)


def test_normal_form_random(rng):
    S, T = builtin_system("Mn:2"), builtin_system("Cn:2")
    for _ in range(10):
        A = rng.normal(size=(1, 4)) + 1j * rng.normal(size=(1, 4))
        c = normal_form_level1(A, random_psd(rng, S, 2), random_psd(rng, T, 2))
        assert c.residual <= 1e-12
        assert c.verify(1e-10)
        assert c.diagnostics["dform_residual"] <= 1e-12


def test_normal_form_rejects_indefinite():
    S = builtin_system("Cn:2")
    with pytest.raises(NotPositive):
        normal_form_level1([[1]], -S.identity(1), S.identity(1))
    with pytest.raises(SizeMismatch):
        normal_form_level1([[1, 1]], S.identity(1), S.identity(1))


def test_certificate_for_max_entangled():
    M = builtin_system("Mn:2")
    P = units_matrix(M, 2)
    c = MaxConeCertificate(max_entangled(), P, P, 0.0)
    chk = c.check(1e-12)
    assert chk.passed and chk.residual <= 1e-12
    assert abs(chk.min_eigenvalue_left) <= 1e-12


def test_certificate_operations(rng):
    S, T = builtin_system("Mn:2"), builtin_system("pauli-xz")
    P, Q = random_psd(rng, S, 3), random_psd(rng, T, 3)
    A = rng.normal(size=(1, 3))
    u = schur_product(P, Q).compress(A)
    c = MaxConeCertificate(u, P, Q, 0.0, A)
    assert c.verify(1e-12)
    assert c.normal_form().verify(1e-12)
    assert c.swap().verify(1e-12)
    assert c.scale(2.5).verify(1e-11)
    assert (c + c).verify(1e-11)
    with pytest.raises(ValueError):
        c.scale(-1)
    d = c.to_dform()
    assert d.verify(1e-12)
    assert d.to_schur().verify(1e-12)
    bad = MaxConeCertificate(u + TensorElement.unit(S, T), P, Q, 0.0, A)
    assert not bad.verify(1e-6)


def test_certificate_level_compression(rng):
    S, T = builtin_system("Cn:2"), builtin_system("Cn:2")
    P, Q = random_psd(rng, S, 2), random_psd(rng, T, 2)
    A = np.eye(2)
    c = MaxConeCertificate(schur_product(P, Q), P, Q, 0.0, A)
    B = rng.normal(size=(1, 2))
    assert c.compress(B).verify(1e-12)


def test_witness_for_negative_unit():
    S, T = builtin_system("Mn:2"), builtin_system("Mn:2")
    u = -2 * TensorElement.unit(S, T)
    w = MaxConeWitness(u, 1.0, np.eye(4) / 4, -1.0)
    assert w.recompute() == pytest.approx(-1)
    assert w.verify(1e-9)
    assert w.swap().verify(1e-9)
    assert not MaxConeWitness(u, 1.0, np.eye(4) / 4, -0.5).verify(1e-9)
    assert not MaxConeWitness(u, 1.0, np.eye(4) / 2, -2.0).verify(1e-9)


def test_dform_certificate_detects_negative_factor(rng):
    S = builtin_system("Cn:2")
    P = -S.identity(1)
    Q = S.identity(1)
    u = tensor_kron(P, Q)
    assert not DFormCertificate(u, P, Q, 0.0, np.eye(1)).verify()
