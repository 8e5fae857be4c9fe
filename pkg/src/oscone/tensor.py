"""Elements of ``M_n(S ⊗ T)``, Schur products and cone certificates.

A :class:`TensorElement` stores ``coeffs[i, j, a, b]``, the coefficient of
``s_a ⊗ t_b`` in entry ``(i, j)``. Scalar matrices act on the outer indices,
so every algebraic identity between Schur products, Kronecker products and
compressions is checked on coefficient arrays, never on floating point
realizations.

Two certificate shapes are used:

* :class:`MaxConeCertificate` (Schur form): ``A (P ∘ Q) A^* = U + eps·1``
  with ``P`` PSD over ``S`` and ``Q`` PSD over ``T``. At level one with
  ``A`` the all-ones row this is the normal form ``sum p_ij ⊗ q_ij``.
* :class:`DFormCertificate`: ``A (P ⊗ Q) A^* = U + eps·1``.

Both re-verify from their stored data alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import NotHermitian, NotPositive, SizeMismatch
from .opsys import SystemMatrix, choi_values, realize


class TensorElement:
    def __init__(self, left, right, coeffs):
        c = np.array(coeffs, dtype=complex)
        if c.ndim == 2:
            c = c[None, None]
        if c.ndim != 4 or c.shape[0] != c.shape[1] or c.shape[2:] != (left.dim, right.dim):
            raise SizeMismatch(
                f"coefficient array of shape {c.shape} for systems of dims {left.dim}, {right.dim}"
            )
        c.setflags(write=False)
        self.left = left
        self.right = right
        self.coeffs = c

    @property
    def level(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def unit(cls, left, right, n: int = 1) -> "TensorElement":
        c = np.zeros((n, n, left.dim, right.dim), dtype=complex)
        u = np.outer(left.unit_coeffs, right.unit_coeffs)
        for i in range(n):
            c[i, i] = u
        return cls(left, right, c)

    @classmethod
    def elementary(cls, x, y) -> "TensorElement":
        """``x ⊗ y`` for two :class:`~oscone.opsys.SystemElement` values."""
        return cls(x.system, y.system, np.outer(x.coeffs, y.coeffs))

    @classmethod
    def from_realization(cls, left, right, r, n: int = 1) -> "TensorElement":
        """Coordinates of a matrix in ``M_n(M_dS ⊗ M_dT)`` projected onto ``M_n(S ⊗ T)``."""
        dS, dT = left.ambient_dim, right.ambient_dim
        r6 = linalg.as_matrix(r).reshape(n, dS, dT, n, dS, dT)
        t = np.einsum("ixyjuv,aux,bvy->ijab", r6, left.basis, right.basis)
        c = np.einsum("ac,ijcd,bd->ijab", left.gram_inv, t, right.gram_inv)
        return cls(left, right, c)

    def realize(self) -> np.ndarray:
        """Spatial realization in ``M_n(M_dS ⊗ M_dT)``, size ``n dS dT``."""
        if self.left.is_dual or self.right.is_dual:
            raise TypeError("elements over a dual system have no concrete realization")
        n, dS, dT = self.level, self.left.ambient_dim, self.right.ambient_dim
        r = np.einsum("ijab,axy,buv->ixujyv", self.coeffs, self.left.basis, self.right.basis)
        return r.reshape(n * dS * dT, n * dS * dT)

    def adjoint(self) -> "TensorElement":
        return TensorElement(self.left, self.right, np.conj(np.swapaxes(self.coeffs, 0, 1)))

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.coeffs - self.adjoint().coeffs), initial=0.0))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.hermitian_defect() <= tol

    def check_hermitian(self, tol: float = 1e-9) -> None:
        if not self.is_hermitian(tol):
            raise NotHermitian(f"tensor element deviates from its adjoint by {self.hermitian_defect():.2e}")

    def compress(self, A, B=None) -> "TensorElement":
        """``A U B`` (``B`` defaults to ``A^*``)."""
        A = linalg.as_matrix(A)
        B = A.conj().T if B is None else linalg.as_matrix(B)
        return TensorElement(self.left, self.right, np.einsum("ri,ijab,js->rsab", A, self.coeffs, B))

    def swap(self) -> "TensorElement":
        return TensorElement(self.right, self.left, np.swapaxes(self.coeffs, 2, 3))

    def direct_sum(self, other: "TensorElement") -> "TensorElement":
        n, k = self.level, other.level
        c = np.zeros((n + k, n + k) + self.coeffs.shape[2:], dtype=complex)
        c[:n, :n] = self.coeffs
        c[n:, n:] = other.coeffs
        return TensorElement(self.left, self.right, c)

    def distance(self, other: "TensorElement") -> float:
        """Frobenius distance between coefficient arrays."""
        return float(np.linalg.norm(self.coeffs - other.coeffs))

    def _check_same(self, other):
        if other.left != self.left or other.right != self.right or other.level != self.level:
            raise SizeMismatch("tensor elements live in different spaces")

    def __add__(self, other):
        self._check_same(other)
        return TensorElement(self.left, self.right, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_same(other)
        return TensorElement(self.left, self.right, self.coeffs - other.coeffs)

    def __mul__(self, t):
        return TensorElement(self.left, self.right, self.coeffs * t)

    __rmul__ = __mul__

    def __neg__(self):
        return TensorElement(self.left, self.right, -self.coeffs)

    def __repr__(self) -> str:
        return f"TensorElement({self.left.name} ⊗ {self.right.name}, level={self.level})"


def block_matrix(rows) -> TensorElement:
    """Assemble a ``2 x 2`` (or larger) block matrix of tensor elements."""
    first = rows[0][0]
    sizes = [r[0].level for r in rows]
    n = sum(sizes)
    c = np.zeros((n, n, first.left.dim, first.right.dim), dtype=complex)
    oi = 0
    for r, si in zip(rows, sizes):
        oj = 0
        for e in r:
            c[oi:oi + si, oj:oj + e.level] = e.coeffs
            oj += e.level
        oi += si
    return TensorElement(first.left, first.right, c)


# -- Schur and Kronecker products ---------------------------------------------


def schur_product(X: SystemMatrix, Y: SystemMatrix) -> TensorElement:
    """``X ∘ Y = [x_ij ⊗ y_ij]``."""
    if X.size != Y.size:
        raise SizeMismatch(f"Schur product of sizes {X.size} and {Y.size}")
    return TensorElement(X.system, Y.system, np.einsum("ija,ijb->ijab", X.coeffs, Y.coeffs))


def tensor_kron(X: SystemMatrix, Y: SystemMatrix) -> TensorElement:
    """``X ⊗ Y = [x_ij ⊗ Y]``, entry ``((i,k),(j,l)) = x_ij ⊗ y_kl``."""
    n, m = X.size, Y.size
    c = np.einsum("ija,klb->ikjlab", X.coeffs, Y.coeffs).reshape(n * m, n * m, X.system.dim, Y.system.dim)
    return TensorElement(X.system, Y.system, c)


def compress_kron(X: SystemMatrix, Y: SystemMatrix) -> TensorElement:
    """``E (X ⊗ Y) E^*`` with ``E = [E_11 E_22 ... E_nn]``; equals ``X ∘ Y``."""
    if X.size != Y.size:
        raise SizeMismatch(f"sizes {X.size} and {Y.size} differ")
    return tensor_kron(X, Y).compress(linalg.matrix_units_row(X.size))


def kron_as_schur(X: SystemMatrix, Y: SystemMatrix) -> tuple[SystemMatrix, SystemMatrix]:
    """Factors ``(X', Y')`` of size ``nm`` with ``X' ∘ Y' = X ⊗ Y``.

    ``X' = X ⊗ J_m``; ``Y'`` is ``Y ⊗ J_n`` conjugated by the canonical
    shuffle, i.e. ``J_n ⊗ Y``. Both are PSD whenever ``X`` and ``Y`` are,
    since ``J_k`` is.
    """
    n, m = X.size, Y.size
    left = X.kron_scalar(linalg.all_ones(m))
    right = Y.kron_scalar(linalg.all_ones(n)).compress(linalg.canonical_shuffle(m, n))
    return left, right


@dataclass
class SchurDecomposition:
    """``P = A (X ∘ Y) B``."""

    A: np.ndarray
    X: SystemMatrix
    Y: SystemMatrix
    B: np.ndarray

    @property
    def k(self) -> int:
        return self.X.size

    def assemble(self) -> TensorElement:
        return schur_product(self.X, self.Y).compress(self.A, self.B)


def decompose_as_schur(P: TensorElement, rank_tol: float = 1e-13) -> SchurDecomposition:
    """Split ``P`` into layers of elementary-tensor matrices and stack them.

    Each entry ``P_ij`` is a sum of at most ``min(dim S, dim T)`` elementary
    tensors (singular value decomposition of its coefficient matrix); layer
    ``l`` collects the ``l``-th term of every entry. The layers are placed on
    the diagonal of ``X ∘ Y`` and summed back by ``A = [I_n ... I_n]``.
    """
    n, mS, mT = P.level, P.left.dim, P.right.dim
    scale = max(float(np.max(np.abs(P.coeffs), initial=0.0)), 1e-300)
    xs = np.zeros((n, n, min(mS, mT), mS), dtype=complex)
    ys = np.zeros((n, n, min(mS, mT), mT), dtype=complex)
    layers = 1
    for i in range(n):
        for j in range(n):
            u, s, vh = np.linalg.svd(P.coeffs[i, j])
            r = int(np.sum(s > rank_tol * scale))
            layers = max(layers, r)
            xs[i, j, :r] = (u[:, :r] * s[:r]).T
            ys[i, j, :r] = vh[:r]
    k = n * layers
    X = np.zeros((k, k, mS), dtype=complex)
    Y = np.zeros((k, k, mT), dtype=complex)
    for l in range(layers):
        sl = slice(l * n, (l + 1) * n)
        X[sl, sl] = xs[:, :, l]
        Y[sl, sl] = ys[:, :, l]
    A = np.hstack([np.eye(n, dtype=complex)] * layers)
    return SchurDecomposition(A, SystemMatrix(P.left, X), SystemMatrix(P.right, Y), A.conj().T)


# -- certificates -------------------------------------------------------------


@dataclass
class CertificateCheck:
    passed: bool
    residual: float
    min_eigenvalue_left: float
    min_eigenvalue_right: float
    choi_error: float = 0.0

    def __bool__(self) -> bool:
        return self.passed


def _side_min_eigenvalue(X: SystemMatrix, choi):
    """Smallest eigenvalue certifying positivity of ``X`` and the error of the
    Choi reproduction for matrices over a dual system."""
    defect = float(np.max(np.abs(X.coeffs - X.adjoint().coeffs), initial=0.0))
    if X.system.is_dual:
        if choi is None:
            return -np.inf, np.inf
        choi = linalg.as_matrix(choi)
        err = float(np.max(np.abs(choi_values(X.system.primal, choi, X.size) - X.coeffs), initial=0.0))
        return linalg.min_eigenvalue(choi), max(err, defect)
    return linalg.min_eigenvalue(realize(X)), defect


@dataclass
class MaxConeCertificate:
    """``A (P ∘ Q) A^* = element + epsilon · (I_n ⊗ 1 ⊗ 1)`` with ``P``, ``Q`` positive.

    ``left_choi`` / ``right_choi`` carry the Choi matrices certifying
    positivity when a side is a dual system.
    """

    element: TensorElement
    P: SystemMatrix
    Q: SystemMatrix
    epsilon: float = 0.0
    A: np.ndarray | None = None
    left_choi: np.ndarray | None = None
    right_choi: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.P.size != self.Q.size:
            raise SizeMismatch("certificate factors differ in size")
        if self.A is None:
            self.A = np.ones((1, self.P.size), dtype=complex)
        self.A = linalg.as_matrix(self.A)

    @property
    def k(self) -> int:
        return self.P.size

    @property
    def target(self) -> TensorElement:
        e = self.element
        return e + self.epsilon * TensorElement.unit(e.left, e.right, e.level)

    def assemble(self) -> TensorElement:
        return schur_product(self.P, self.Q).compress(self.A)

    @property
    def residual(self) -> float:
        return self.assemble().distance(self.target)

    def check(self, tol: float = 1e-9) -> CertificateCheck:
        lp, ep = _side_min_eigenvalue(self.P, self.left_choi)
        lq, eq = _side_min_eigenvalue(self.Q, self.right_choi)
        res = self.residual
        ok = lp >= -tol and lq >= -tol and max(ep, eq) <= tol and res <= tol
        return CertificateCheck(bool(ok), res, lp, lq, max(ep, eq))

    def verify(self, tol: float = 1e-9) -> bool:
        return self.check(tol).passed

    def normal_form(self) -> "MaxConeCertificate":
        """Fold a level-one compression row into ``P``: ``(D P D^*) ∘ Q`` with ``D = diag(A)``."""
        if self.element.level != 1:
            raise SizeMismatch("normal form exists at level one only")
        D = np.diag(self.A[0])
        return MaxConeCertificate(self.element, self.P.compress(D), self.Q, self.epsilon,
                                  left_choi=self._fold_choi(D), right_choi=self.right_choi)

    def _fold_choi(self, D):
        if self.left_choi is None:
            return None
        d = self.P.system.ambient_dim
        T = np.kron(np.eye(d), D)
        return T @ self.left_choi @ T.conj().T

    def __add__(self, other: "MaxConeCertificate") -> "MaxConeCertificate":
        """Cone sum: ``P1 ⊕ P2``, ``Q1 ⊕ Q2`` with compression ``[A1 A2]``."""
        if self.P.system.is_dual or self.Q.system.is_dual:
            raise TypeError("sums of certificates over dual systems are not supported")
        return MaxConeCertificate(
            self.element + other.element,
            self.P.direct_sum(other.P),
            self.Q.direct_sum(other.Q),
            self.epsilon + other.epsilon,
            np.hstack([self.A, other.A]),
        )

    def scale(self, t: float) -> "MaxConeCertificate":
        if t < 0:
            raise ValueError("cones are closed under nonnegative scaling only")
        return MaxConeCertificate(self.element * t, self.P, self.Q, self.epsilon * t, np.sqrt(t) * self.A,
                                  self.left_choi, self.right_choi)

    def compress(self, B) -> "MaxConeCertificate":
        """``B U B^*``; the epsilon term becomes ``eps B B^*``, so this needs ``eps == 0``
        or ``B B^* = I``."""
        B = linalg.as_matrix(B)
        if self.epsilon and not np.allclose(B @ B.conj().T, np.eye(B.shape[0]), atol=1e-12):
            raise ValueError("compression of an eps-shifted certificate needs an isometric row space")
        return MaxConeCertificate(self.element.compress(B), self.P, self.Q, self.epsilon, B @ self.A,
                                  self.left_choi, self.right_choi)

    def swap(self) -> "MaxConeCertificate":
        return MaxConeCertificate(self.element.swap(), self.Q, self.P, self.epsilon, self.A,
                                  self.right_choi, self.left_choi, dict(self.diagnostics))

    def to_dform(self) -> "DFormCertificate":
        """``A (P ∘ Q) A^* = (A E)(P ⊗ Q)(A E)^*``."""
        return DFormCertificate(self.element, self.P, self.Q, self.epsilon,
                                self.A @ linalg.matrix_units_row(self.k))


@dataclass
class DFormCertificate:
    """``A (P ⊗ Q) A^* = element + epsilon · 1`` with ``P``, ``Q`` PSD of sizes ``k``, ``m``."""

    element: TensorElement
    P: SystemMatrix
    Q: SystemMatrix
    epsilon: float
    A: np.ndarray

    @property
    def target(self) -> TensorElement:
        e = self.element
        return e + self.epsilon * TensorElement.unit(e.left, e.right, e.level)

    def assemble(self) -> TensorElement:
        return tensor_kron(self.P, self.Q).compress(self.A)

    @property
    def residual(self) -> float:
        return self.assemble().distance(self.target)

    def check(self, tol: float = 1e-9) -> CertificateCheck:
        lp = linalg.min_eigenvalue(realize(self.P))
        lq = linalg.min_eigenvalue(realize(self.Q))
        res = self.residual
        return CertificateCheck(lp >= -tol and lq >= -tol and res <= tol, res, lp, lq)

    def verify(self, tol: float = 1e-9) -> bool:
        return self.check(tol).passed

    def to_schur(self) -> MaxConeCertificate:
        """Schur form with factors ``P ⊗ J_m`` and ``J_k ⊗ Q``."""
        X, Y = kron_as_schur(self.P, self.Q)
        return MaxConeCertificate(self.element, X, Y, self.epsilon, self.A)


def normal_form_level1(A, P: SystemMatrix, Q: SystemMatrix, tol: float = 1e-9) -> MaxConeCertificate:
    """Level-one normal form ``sum p'_ij ⊗ q'_ij`` of ``u = A (P ⊗ Q) A^*``.

    ``A`` is ``1 x km``; the factors are padded with ``J`` to size ``km`` and
    the row ``A`` is folded into the left factor.
    """
    A = linalg.as_matrix(A)
    if A.shape != (1, P.size * Q.size):
        raise SizeMismatch(f"A must be 1 x {P.size * Q.size}, got {A.shape}")
    for X in (P, Q):
        rep = linalg.psd_check(realize(X), tol) if X.is_hermitian(tol) else None
        if rep is None or not rep.is_psd:
            raise NotPositive("normal form needs PSD factors")
    u = tensor_kron(P, Q).compress(A)
    dform = DFormCertificate(u, P, Q, 0.0, A)
    cert = dform.to_schur().normal_form()
    cert.diagnostics["dform_residual"] = dform.residual
    return cert


@dataclass
class MaxConeWitness:
    """A PSD, trace-one ``W`` with ``tr(W · realize(element + eps·1)) < 0``."""

    element: TensorElement
    epsilon: float
    W: np.ndarray
    pairing_value: float

    @property
    def target(self) -> TensorElement:
        e = self.element
        return e + self.epsilon * TensorElement.unit(e.left, e.right, e.level)

    def recompute(self) -> float:
        return float(np.real(np.trace(self.W @ self.target.realize())))

    def verify(self, tol: float = 1e-9) -> bool:
        W = linalg.as_matrix(self.W)
        if not linalg.psd_check(W, tol).is_psd or abs(np.trace(W).real - 1) > tol:
            return False
        val = self.recompute()
        return val < -tol and abs(val - self.pairing_value) <= max(tol, 1e-12)

    def swap(self) -> "MaxConeWitness":
        e = self.element
        n, dS, dT = e.level, e.left.ambient_dim, e.right.ambient_dim
        U = np.kron(np.eye(n), linalg.canonical_shuffle(dS, dT))
        return MaxConeWitness(e.swap(), self.epsilon, U @ self.W @ U.T, self.pairing_value)
