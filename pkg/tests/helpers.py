"""Random generators shared by the test modules."""

import numpy as np

from oscone import linalg
from oscone.opsys import SystemMatrix, builtin_system
from oscone.tensor import TensorElement

SMALL = ("Cn:2", "Mn:2", "pauli-xz")


def hermitian_coeffs(rng, k, *dims):
    c = rng.normal(size=(k, k) + dims) + 1j * rng.normal(size=(k, k) + dims)
    c = (c + np.conj(np.swapaxes(c, 0, 1))) / 2
    return c


def random_matrix(rng, S, k):
    """Hermitian element of M_k(S)."""
    return SystemMatrix(S, hermitian_coeffs(rng, k, S.dim))


def positive_element(rng, S, margin=0.1):
    c = rng.normal(size=S.dim)
    lam = linalg.min_eigenvalue(S.element(c))
    return c + (margin - lam) * S.unit_coeffs


def random_psd(rng, S, k, terms=None):
    """PSD element of M_k(S) built as a sum of B p B^* with p positive in S."""
    terms = terms or k + 1
    coeffs = np.zeros((k, k, S.dim), dtype=complex)
    for _ in range(terms):
        b = rng.normal(size=k) + 1j * rng.normal(size=k)
        coeffs += np.einsum("i,j,a->ija", b, b.conj(), positive_element(rng, S))
    return SystemMatrix(S, coeffs / terms)


def random_element(rng, S, T, n=1):
    return TensorElement(S, T, hermitian_coeffs(rng, n, S.dim, T.dim))


def random_pair(rng):
    return builtin_system(rng.choice(SMALL)), builtin_system(rng.choice(SMALL))


def max_entangled(d=2):
    M = builtin_system(f"Mn:{d}")
    r = np.zeros((d, d, d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            r[i, i, j, j] = 1.0
    return TensorElement.from_realization(M, M, r.reshape(d * d, d * d))


def units_matrix(S, d):
    """[E_ij]_{ij} as an element of M_d(S)."""
    return SystemMatrix.from_matrices(S, [[linalg.matrix_unit(d, i, j) for j in range(d)] for i in range(d)])


# criterion number -> printed pass/fail line, echoed in the terminal summary
ACCEPTANCE: dict = {}


def report(n: int, passed: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)
