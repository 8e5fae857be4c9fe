"""Dense complex matrix helpers.

Matrices are plain ``numpy.ndarray`` objects of complex dtype. Everything here
is a pure function; nothing mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotHermitian

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class PsdReport:
    min_eigenvalue: float
    is_psd: bool
    tolerance: float

    def __bool__(self) -> bool:
        return self.is_psd


def as_matrix(m) -> np.ndarray:
    """Return ``m`` as a 2-d complex array (a copy is made only if needed)."""
    a = np.asarray(m, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def adjoint(m: np.ndarray) -> np.ndarray:
    return np.conj(m).T


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return (m + adjoint(m)) / 2


def kron(a, b) -> np.ndarray:
    """Kronecker product, ``kron(a, b)[(i, k), (j, l)] = a[i, j] * b[k, l]``."""
    return np.kron(as_matrix(a), as_matrix(b))


def matrix_unit(n: int, i: int, j: int, m: int | None = None) -> np.ndarray:
    e = np.zeros((n, n if m is None else m), dtype=complex)
    e[i, j] = 1
    return e


def matrix_units_row(n: int) -> np.ndarray:
    """The ``n x n**2`` block row ``[E_11 E_22 ... E_nn]``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.hstack([matrix_unit(n, i, i) for i in range(n)])


def canonical_shuffle(n: int, m: int) -> np.ndarray:
    """Permutation ``U`` with ``U @ kron(a, b) @ U.T == kron(b, a)`` for
    ``a`` in M_n and ``b`` in M_m."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    u = np.zeros((n * m, n * m), dtype=complex)
    for i in range(n):
        for k in range(m):
            # row (k, i) of kron(b, a) reads row (i, k) of kron(a, b)
            u[k * n + i, i * m + k] = 1
    return u


def all_ones(k: int) -> np.ndarray:
    if k < 1:
        raise ValueError("k must be >= 1")
    return np.ones((k, k), dtype=complex)


def check_hermitian(h: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    h = as_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    dev = np.max(np.abs(h - adjoint(h))) if h.size else 0.0
    if dev > tol:
        raise NotHermitian(f"matrix deviates from its adjoint by {dev:.3e} > {tol:.1e}")
    return h


def min_eigenvalue(h: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part of ``h``."""
    return float(np.linalg.eigvalsh(hermitian_part(as_matrix(h)))[0])


def psd_check(h, tol: float = DEFAULT_TOL) -> PsdReport:
    """Threshold the spectrum of a Hermitian matrix.

    Raises
    ------
    NotHermitian
        If ``h`` differs from its adjoint by more than ``tol`` in some entry.
    """
    h = check_hermitian(h, tol)
    lam = min_eigenvalue(h)
    return PsdReport(lam, lam >= -tol, tol)


def operator_norm(m) -> float:
    m = as_matrix(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def min_eigenpair(h: np.ndarray) -> tuple[float, np.ndarray]:
    lam, vecs = np.linalg.eigh(hermitian_part(as_matrix(h)))
    return float(lam[0]), vecs[:, 0]


def psd_sqrt_factor(h: np.ndarray) -> np.ndarray:
    """Return ``L`` with ``L @ L^* == h`` for a PSD ``h`` (negative eigenvalues clipped)."""
    lam, vecs = np.linalg.eigh(hermitian_part(as_matrix(h)))
    return vecs * np.sqrt(np.clip(lam, 0, None))


# Matrix literal format: {"rows": n, "cols": m, "entries": [[re, im], ...]}.

def matrix_to_literal(m) -> dict:
    m = as_matrix(m)
    flat = m.reshape(-1)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_literal(obj) -> np.ndarray:
    try:
        rows, cols, entries = int(obj["rows"]), int(obj["cols"]), obj["entries"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix literal: {exc}") from None
    if len(entries) != rows * cols:
        raise ValueError(
            f"matrix literal has {len(entries)} entries, expected {rows}x{cols}={rows * cols}"
        )
    flat = np.array([complex(re, im) for re, im in entries], dtype=complex)
    return flat.reshape(rows, cols)
