"""Concrete finite-dimensional operator systems and their duals.

An :class:`OperatorSystem` is a unital self-adjoint subspace of ``M_d`` given
by a real-linearly independent Hermitian basis whose first element is the
identity. Elements and matrices over the system are stored as coefficient
arrays with respect to that basis; the concrete inclusion into ``M_d`` is used
for the positivity cones at every matrix level.

The dual ``S^d`` is never realized as a matrix subspace. A functional is the
vector of its values on the basis of ``S`` (equivalently, its coordinates in
the dual basis), and a matrix of functionals is positive exactly when the map
``S -> M_k`` it defines is completely positive. That is decided by looking for
a PSD Choi matrix of an extension ``M_d -> M_k``, which exists precisely for
CP maps because ``M_k`` is injective.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from . import linalg
from .conic import ConicProblem, Status, solve
from .errors import DimensionMismatch, Malformed, NotHermitian, SizeMismatch
from .verdict import ConeVerdict

GS_PIVOT = 1e-10


def _real_inner(a, b) -> float:
    return float(np.real(np.vdot(a, b)))


def _hermitian_candidates(generators):
    for g in generators:
        yield (g + g.conj().T) / 2
        yield (g - g.conj().T) / 2j


class OperatorSystem:
    """A concrete operator system ``span_R{b_0 = I, b_1, ..., b_{m-1}}`` (complexified).

    Parameters
    ----------
    basis : sequence of d x d arrays
        Hermitian, real-linearly independent, with ``basis[0]`` the identity.
    name : str
    """

    def __init__(self, basis, name: str = "S"):
        mats = [linalg.as_matrix(b) for b in basis]
        if not mats:
            raise Malformed("an operator system needs at least the identity")
        d = mats[0].shape[0]
        for b in mats:
            if b.shape != (d, d):
                raise DimensionMismatch(f"basis element of shape {b.shape}, expected {(d, d)}")
        if not np.array_equal(mats[0], np.eye(d)):
            raise Malformed("basis[0] must be the identity")
        for b in mats:
            if np.max(np.abs(b - b.conj().T)) > 1e-12:
                raise NotHermitian("basis elements must be Hermitian")
        basis = np.array(mats)
        basis.setflags(write=False)
        self.basis = basis
        self.name = name
        self.ambient_dim = d
        g = self.gram
        norms = np.sqrt(np.diag(g))
        if np.linalg.eigvalsh(g / np.outer(norms, norms))[0] <= GS_PIVOT:
            raise Malformed("basis is not linearly independent")

    is_dual = False

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @cached_property
    def gram(self) -> np.ndarray:
        b = self.basis.reshape(self.dim, -1)
        return np.real(b.conj() @ b.T)

    @cached_property
    def gram_inv(self) -> np.ndarray:
        return np.linalg.inv(self.gram)

    @cached_property
    def unit_coeffs(self) -> np.ndarray:
        e = np.zeros(self.dim, dtype=complex)
        e[0] = 1
        return e

    @cached_property
    def complement(self) -> np.ndarray:
        """Orthonormal Hermitian basis of the trace-orthogonal complement of
        the system inside the Hermitian d x d matrices."""
        d = self.ambient_dim
        std = _hermitian_standard_basis(d)
        coords = np.real(np.einsum("axy,bxy->ab", self.basis.conj(), std))
        _, s, vt = np.linalg.svd(coords)
        rank = int(np.sum(s > GS_PIVOT * s[0]))
        null = vt[rank:]
        return np.einsum("rb,bxy->rxy", null, std)

    def element(self, coeffs) -> np.ndarray:
        return np.einsum("a,axy->xy", np.asarray(coeffs, dtype=complex), self.basis)

    def coords(self, m) -> np.ndarray:
        """Coefficients of the orthogonal projection of ``m`` onto the system."""
        m = linalg.as_matrix(m)
        t = np.einsum("axy,yx->a", self.basis, m)
        return self.gram_inv @ t

    def contains(self, m, tol: float = 1e-10) -> bool:
        m = linalg.as_matrix(m)
        return float(np.max(np.abs(self.element(self.coords(m)) - m), initial=0.0)) <= tol

    def identity(self, k: int = 1) -> "SystemMatrix":
        c = np.zeros((k, k, self.dim), dtype=complex)
        for i in range(k):
            c[i, i] = self.unit_coeffs
        return SystemMatrix(self, c)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorSystem) or other.is_dual:
            return NotImplemented
        return self.basis.shape == other.basis.shape and np.array_equal(self.basis, other.basis)

    def __hash__(self) -> int:
        return hash((self.basis.shape, self.basis.tobytes()))

    def __repr__(self) -> str:
        return f"OperatorSystem({self.name!r}, d={self.ambient_dim}, dim={self.dim})"


class DualSystem:
    """The linear dual ``S^d`` with the dual basis of ``S``'s basis.

    The order unit is the normalized trace restricted to ``S``.
    """

    is_dual = True

    def __init__(self, primal: OperatorSystem):
        self.primal = primal
        self.name = f"dual({primal.name})"

    @property
    def dim(self) -> int:
        return self.primal.dim

    @property
    def ambient_dim(self) -> int:
        return self.primal.ambient_dim

    @cached_property
    def unit_coeffs(self) -> np.ndarray:
        return dual_unit(self.primal).values

    def identity(self, k: int = 1) -> "SystemMatrix":
        c = np.zeros((k, k, self.dim), dtype=complex)
        for i in range(k):
            c[i, i] = self.unit_coeffs
        return SystemMatrix(self, c)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DualSystem):
            return NotImplemented
        return self.primal == other.primal

    def __hash__(self) -> int:
        return hash(("dual", hash(self.primal)))

    def __repr__(self) -> str:
        return f"DualSystem({self.primal.name!r}, dim={self.dim})"


def _hermitian_standard_basis(d: int) -> np.ndarray:
    out = []
    for i in range(d):
        out.append(linalg.matrix_unit(d, i, i))
    s = 1 / np.sqrt(2)
    for i in range(d):
        for j in range(i + 1, d):
            e = linalg.matrix_unit(d, i, j)
            out.append(s * (e + e.T))
            out.append(s * (-1j * e + 1j * e.T))
    return np.array(out)


def make_system(generators, name: str = "S", d: int | None = None) -> OperatorSystem:
    """Operator system spanned by ``generators``, their adjoints and the unit.

    The Hermitian basis is obtained by real-linear Gram-Schmidt over the
    Hermitian and skew parts of the generators, in order, starting from the
    identity. Every basis element is scaled to Frobenius norm ``sqrt(d)``
    (the norm of the identity).
    """
    gens = [linalg.as_matrix(g) for g in generators]
    if d is None:
        if not gens:
            raise DimensionMismatch("ambient dimension needed when no generators are given")
        d = gens[0].shape[0]
    for g in gens:
        if g.shape != (d, d):
            raise DimensionMismatch(f"generator of shape {g.shape}, expected {(d, d)}")
    target = np.sqrt(d)
    basis = [np.eye(d, dtype=complex)]
    for c in _hermitian_candidates(gens):
        nc = np.linalg.norm(c)
        if nc <= GS_PIVOT:
            continue
        r = c / nc
        for _ in range(2):
            for q in basis:
                r = r - _real_inner(q, r) / _real_inner(q, q) * q
        nr = np.linalg.norm(r)
        if nr > GS_PIVOT:
            basis.append(r / nr * target)
    basis[1:] = [linalg.hermitian_part(b) for b in basis[1:]]
    return OperatorSystem(basis, name)


def full_algebra(d: int) -> OperatorSystem:
    gens = []
    for i in range(d):
        for j in range(i + 1, d):
            gens.append(linalg.matrix_unit(d, i, j))
    gens += [linalg.matrix_unit(d, i, i) for i in range(d - 1)]
    return make_system(gens, f"Mn:{d}", d)


def diagonal_algebra(d: int) -> OperatorSystem:
    return make_system([linalg.matrix_unit(d, i, i) for i in range(d - 1)], f"Cn:{d}", d)


def pauli_xz() -> OperatorSystem:
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return OperatorSystem([np.eye(2), sx, sz], "pauli-xz")


def scalars() -> OperatorSystem:
    return OperatorSystem([np.eye(1)], "scalars")


def builtin_system(name: str) -> OperatorSystem:
    """Resolve ``Mn:d``, ``Cn:d`` (d <= 4), ``pauli-xz`` or ``scalars``."""
    if name == "pauli-xz":
        return pauli_xz()
    if name in ("scalars", "span{I}"):
        return scalars()
    kind, _, dim = name.partition(":")
    if kind in ("Mn", "Cn") and dim.isdigit() and 1 <= int(dim) <= 4:
        d = int(dim)
        return full_algebra(d) if kind == "Mn" else diagonal_algebra(d)
    raise KeyError(f"unknown built-in system {name!r}")


def amplify(system: OperatorSystem, n: int) -> OperatorSystem:
    """``M_n(S)`` as a concrete system in ``M_{n d}``."""
    if n == 1:
        return system
    gens = [
        np.kron(linalg.matrix_unit(n, k, l), b)
        for k in range(n)
        for l in range(n)
        for b in system.basis
    ]
    return make_system(gens, f"M{n}({system.name})", n * system.ambient_dim)


# -- elements and matrices over a system --------------------------------------


class SystemElement:
    """An element of ``S`` (or of ``S^d`` when ``system`` is a :class:`DualSystem`)."""

    def __init__(self, system, coeffs):
        self.system = system
        self.coeffs = np.asarray(coeffs, dtype=complex).reshape(system.dim)

    @property
    def values(self) -> np.ndarray:
        # for functionals the coordinates in the dual basis are the pairing values
        return self.coeffs

    def matrix(self) -> np.ndarray:
        return self.system.element(self.coeffs)

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        return float(np.max(np.abs(self.coeffs.imag), initial=0.0)) <= tol

    def __call__(self, x):
        """Pair a functional with an element of the primal system."""
        if not self.system.is_dual:
            raise TypeError("only functionals can be evaluated")
        c = x.coeffs if isinstance(x, SystemElement) else np.asarray(x, dtype=complex)
        return complex(self.coeffs @ c)

    def __repr__(self) -> str:
        return f"SystemElement({self.system.name}, {np.round(self.coeffs, 6)})"


DualFunctional = SystemElement


class SystemMatrix:
    """A ``k x k`` matrix with entries in a system, as coefficients ``(k, k, m)``."""

    def __init__(self, system, coeffs):
        self.system = system
        c = np.array(coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[0] != c.shape[1] or c.shape[2] != system.dim:
            raise SizeMismatch(f"coefficient array of shape {c.shape} for system of dim {system.dim}")
        c.setflags(write=False)
        self.coeffs = c

    @property
    def size(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def from_matrices(cls, system: OperatorSystem, entries) -> "SystemMatrix":
        k = len(entries)
        c = np.zeros((k, k, system.dim), dtype=complex)
        for i in range(k):
            for j in range(k):
                c[i, j] = system.coords(entries[i][j])
        return cls(system, c)

    @classmethod
    def from_realization(cls, system: OperatorSystem, r, k: int) -> "SystemMatrix":
        d = system.ambient_dim
        blocks = linalg.as_matrix(r).reshape(k, d, k, d)
        return cls.from_matrices(system, [[blocks[i, :, j, :] for j in range(k)] for i in range(k)])

    @classmethod
    def scalar(cls, system, a) -> "SystemMatrix":
        """The scalar matrix ``a`` tensored with the unit."""
        a = linalg.as_matrix(a)
        return cls(system, a[:, :, None] * system.unit_coeffs[None, None, :])

    def realize(self) -> np.ndarray:
        return realize(self)

    def adjoint(self) -> "SystemMatrix":
        return SystemMatrix(self.system, np.conj(np.swapaxes(self.coeffs, 0, 1)))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return float(np.max(np.abs(self.coeffs - self.adjoint().coeffs), initial=0.0)) <= tol

    def compress(self, B) -> "SystemMatrix":
        """``B X B^*`` for a scalar ``r x k`` matrix ``B``."""
        B = linalg.as_matrix(B)
        return SystemMatrix(self.system, np.einsum("ri,ija,sj->rsa", B, self.coeffs, B.conj()))

    def kron_scalar(self, J) -> "SystemMatrix":
        """``X ⊗ J`` with the system index on the left, ``[(i,k),(j,l)] = x_ij J_kl``."""
        J = linalg.as_matrix(J)
        k, m = self.size, J.shape[0]
        c = np.einsum("ija,kl->ikjla", self.coeffs, J).reshape(k * m, k * m, -1)
        return SystemMatrix(self.system, c)

    def direct_sum(self, other: "SystemMatrix") -> "SystemMatrix":
        if other.system != self.system:
            raise SizeMismatch("direct sum of matrices over different systems")
        k, l = self.size, other.size
        c = np.zeros((k + l, k + l, self.system.dim), dtype=complex)
        c[:k, :k] = self.coeffs
        c[k:, k:] = other.coeffs
        return SystemMatrix(self.system, c)

    def __add__(self, other):
        return SystemMatrix(self.system, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SystemMatrix(self.system, self.coeffs - other.coeffs)

    def __mul__(self, t):
        return SystemMatrix(self.system, self.coeffs * t)

    __rmul__ = __mul__

    def __neg__(self):
        return SystemMatrix(self.system, -self.coeffs)

    def __repr__(self) -> str:
        return f"SystemMatrix({self.system.name}, k={self.size})"


DualSystemMatrix = SystemMatrix


def realize(x: SystemMatrix) -> np.ndarray:
    """The ``kd x kd`` matrix whose ``(i, j)`` block is ``x_ij`` in ``M_d``."""
    if x.system.is_dual:
        raise TypeError("matrices over a dual system have no concrete realization")
    k, d = x.size, x.system.ambient_dim
    return np.einsum("ija,axy->ixjy", x.coeffs, x.system.basis).reshape(k * d, k * d)


def level_positive(x: SystemMatrix, tol: float = linalg.DEFAULT_TOL) -> ConeVerdict:
    """Membership of ``x`` in the concrete cone ``M_k(S)^+``."""
    if not x.is_hermitian(max(tol, 1e-12)):
        raise NotHermitian("system matrix is not Hermitian")
    r = realize(x)
    lam, v = linalg.min_eigenpair(r)
    if lam >= -tol:
        return ConeVerdict.member(lam, min_eigenvalue=lam)
    return ConeVerdict.nonmember(np.outer(v, v.conj()), min_eigenvalue=lam)


def dual_unit(S: OperatorSystem) -> SystemElement:
    """Normalized trace ``b -> tr(b)/d`` restricted to ``S``."""
    vals = np.einsum("axx->a", S.basis) / S.ambient_dim
    return SystemElement(DualSystem(S), vals)


def choi_values(S: OperatorSystem, choi, k: int) -> np.ndarray:
    """Values ``[Phi(b_a)_ij]`` of the map ``M_d -> M_k`` with Choi matrix
    ``choi = sum_pq E_pq ⊗ Phi(E_pq)`` on the basis of ``S``, shape ``(k, k, m)``."""
    d = S.ambient_dim
    c4 = linalg.as_matrix(choi).reshape(d, k, d, k)
    return np.einsum("aqp,qipj->ija", S.basis, c4)


def dual_functionals(S: OperatorSystem, k: int) -> np.ndarray:
    """Hermitian ``K[i, j, a]`` with ``choi_values(...)[i, j, a] = tr(K[i, j, a] @ choi)``."""
    d = S.ambient_dim
    K = np.zeros((k, k, S.dim, d * k, d * k), dtype=complex)
    for i in range(k):
        for j in range(k):
            e = linalg.matrix_unit(k, j, i)
            for a in range(S.dim):
                K[i, j, a] = np.kron(S.basis[a].T, e)
    return K


def dual_cone_membership(F: SystemMatrix, tol: float = 1e-8, seed: int = 0) -> ConeVerdict:
    """Decide whether the functionals ``F = [f_ij]`` define a CP map ``S -> M_k``.

    A ``Member`` certificate is a PSD Choi matrix of size ``d k`` reproducing
    every value ``f_ij(b_a)``; a ``NonMember`` witness is a normalized Farkas
    vector for the same linear system.
    """
    if not F.system.is_dual:
        raise TypeError("expected a matrix over a dual system")
    if not F.is_hermitian(max(tol, 1e-12)):
        raise NotHermitian("matrix of functionals is not Hermitian")
    S = F.system.primal
    k = F.size
    K = dual_functionals(S, k)
    rows = []
    for i in range(k):
        for j in range(i, k):
            for a in range(S.dim):
                kij = K[i, j, a]
                z = F.coeffs[i, j, a]
                rows.append(((kij + kij.conj().T) / 2, z.real))
                if i != j:
                    rows.append(((kij - kij.conj().T) / 2j, z.imag))
    p = ConicProblem.from_constraints([S.ambient_dim * k], [([a], b) for a, b in rows])
    sol = solve(p, feas_tol=tol, seed=seed)
    diag = {"status": sol.status.value, "residual": sol.max_constraint_residual,
            "min_eigenvalue": sol.min_block_eigenvalue}
    if sol.status is Status.FEASIBLE:
        return ConeVerdict.member(sol.block_values[0], **diag)
    if sol.status is Status.INFEASIBLE:
        return ConeVerdict.nonmember(sol.farkas, **diag, trace_bound=sol.trace_bound)
    return ConeVerdict.unknown(**diag)


# -- serialization -------------------------------------------------------------


def system_to_dict(S: OperatorSystem) -> dict:
    return {
        "name": S.name,
        "ambient_dim": S.ambient_dim,
        "basis": [linalg.matrix_to_literal(b) for b in S.basis],
    }


def system_from_dict(obj) -> OperatorSystem:
    try:
        d = int(obj["ambient_dim"])
        basis = [linalg.matrix_from_literal(b) for b in obj["basis"]]
    except (KeyError, TypeError) as exc:
        raise Malformed(f"malformed system: missing {exc}") from None
    for i, b in enumerate(basis):
        if b.shape != (d, d):
            raise Malformed(f"basis[{i}] has shape {b.shape}, expected {(d, d)}")
    return OperatorSystem(basis, obj.get("name", "S"))


def resolve_system(ref) -> OperatorSystem:
    """A system reference is a built-in name, a system dict, or ``{"dual": ref}``."""
    if isinstance(ref, OperatorSystem):
        return ref
    if isinstance(ref, str):
        return builtin_system(ref)
    if isinstance(ref, dict) and "dual" in ref:
        return DualSystem(resolve_system(ref["dual"]))
    return system_from_dict(ref)


def system_ref(S) -> object:
    """Inverse of :func:`resolve_system`: built-in systems serialize by name."""
    if S.is_dual:
        return {"dual": system_ref(S.primal)}
    try:
        if builtin_system(S.name) == S:
            return S.name
    except KeyError:
        pass
    return system_to_dict(S)
