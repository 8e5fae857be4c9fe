"""Hat maps, the ``|||·|||`` norm and factorizations through matrix algebras.

For ``u = sum c_ab s_a ⊗ t_b`` the hat map sends a functional ``f`` on ``S``
to ``sum c_ab f(s_a) t_b``. A certificate ``sum p_ij ⊗ q_ij = u + eps·1⊗1``
gives completely positive maps ``phi(f) = [f(p_ij)]`` into ``M_k`` and
``psi([a_ij]) = sum a_ij q_ij`` out of it whose composition is the hat map
up to ``eps·f(1)·1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import NotInMaxCone, NotPositive, NotSelfAdjoint, SizeMismatch
from .membership import DEFAULT_EPS, DEFAULT_TOL, max_cone_membership
from .opsys import DualSystem, SystemMatrix, choi_values, realize
from .tensor import MaxConeCertificate, MaxConeWitness, TensorElement, schur_product
from .verdict import ConeVerdict


@dataclass
class HatMap:
    """Linear map ``S^d -> T`` as a ``(dim T, dim S)`` matrix acting on the
    values ``f(s_a)`` of a functional."""

    source: object
    target: object
    matrix: np.ndarray

    def __call__(self, f) -> np.ndarray:
        vals = getattr(f, "values", f)
        return self.matrix @ np.asarray(vals, dtype=complex)

    def on_dual_basis(self, a: int) -> np.ndarray:
        return self.matrix[:, a]


def hat(u: TensorElement) -> HatMap:
    if u.level != 1:
        raise SizeMismatch("the hat map is defined at level one")
    S = u.left
    source = S.primal if S.is_dual else DualSystem(S)
    return HatMap(source, u.right, u.coeffs[0, 0].T.copy())


# -- the |||·||| norm -----------------------------------------------------------


class TripleNormContext:
    """A basis ``y_1 = 1, ..., y_m`` of ``T`` of self-adjoint norm-one elements.

    Built from the stored basis by trace Gram-Schmidt followed by
    operator-norm normalization. ``change[i]`` holds the coordinates of
    ``y_i`` in the stored basis.
    """

    def __init__(self, system):
        if system.is_dual:
            raise TypeError("the norm context needs a concrete system")
        self.system = system
        ys = []
        for b in system.basis:
            v = b.astype(complex)
            for y in ys:
                v = v - np.real(np.trace(y @ v)) / np.real(np.trace(y @ y)) * y
            ys.append(v)
        ys = [y / linalg.operator_norm(y) for y in ys]
        ys[0] = np.eye(system.ambient_dim, dtype=complex)
        self.basis = np.array(ys)
        self.change = np.array([system.coords(y) for y in ys])
        self._change_inv = np.linalg.inv(self.change)

    @property
    def dim(self) -> int:
        return self.system.dim

    def expand(self, u: TensorElement) -> np.ndarray:
        """Coefficients ``X[:, i]`` of ``x_i`` in ``u = sum_i x_i ⊗ y_i``."""
        if u.right != self.system:
            raise SizeMismatch("context built for a different right factor")
        if u.level != 1:
            raise SizeMismatch("the norm is defined at level one")
        return u.coeffs[0, 0] @ self._change_inv


def _left_norm(S, x) -> float:
    if S.is_dual:
        raise TypeError("the norm needs a concrete left factor")
    return linalg.operator_norm(S.element(x))


def triple_norm(u: TensorElement, ctx: TripleNormContext) -> float:
    """``sum_i ||x_i||`` for the unique expansion ``u = sum_i x_i ⊗ y_i``."""
    X = ctx.expand(u)
    return float(sum(_left_norm(u.left, X[:, i]) for i in range(ctx.dim)))


def perturbation_certificate(u: TensorElement, ctx: TripleNormContext) -> MaxConeCertificate:
    """Closed-form certificate for ``|||u|||·(1⊗1) + u`` in the maximal cone.

    Each term contributes ``P_i = ½[[‖x_i‖, x_i], [x_i, ‖x_i‖]]`` and
    ``Q_i = [[1, y_i], [y_i, 1]]``; the blocks are summed by an all-ones row.
    """
    S, T = u.left, u.right
    X = ctx.expand(u)
    if np.max(np.abs(X.imag), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(X), initial=0.0)):
        raise NotSelfAdjoint("expansion coefficients must be self-adjoint")
    X = X.real
    Ps, Qs = [], []
    total = 0.0
    for i in range(ctx.dim):
        if not np.any(X[:, i]):
            continue
        nrm = _left_norm(S, X[:, i])
        total += nrm
        p = np.zeros((2, 2, S.dim), dtype=complex)
        p[0, 0] = p[1, 1] = 0.5 * nrm * S.unit_coeffs
        p[0, 1] = p[1, 0] = 0.5 * X[:, i]
        q = np.zeros((2, 2, T.dim), dtype=complex)
        q[0, 0] = q[1, 1] = T.unit_coeffs
        q[0, 1] = q[1, 0] = ctx.change[i]
        Ps.append(p)
        Qs.append(q)
    if not Ps:
        P, Q = SystemMatrix(S, np.zeros((1, 1, S.dim))), T.identity(1)
    else:
        P, Q = SystemMatrix(S, Ps[0]), SystemMatrix(T, Qs[0])
        for p, q in zip(Ps[1:], Qs[1:]):
            P, Q = P.direct_sum(SystemMatrix(S, p)), Q.direct_sum(SystemMatrix(T, q))
    return MaxConeCertificate(u, P, Q, total, np.ones((1, P.size), dtype=complex))


def dual_basis_norms(u: TensorElement) -> np.ndarray:
    """``||û(δ_a)||_T`` for every dual basis functional ``δ_a``."""
    T = u.right
    return np.array([linalg.operator_norm(T.element(row)) for row in u.coeffs[0, 0]])


def point_norm_gap(u: TensorElement, w: TensorElement, ctx: TripleNormContext) -> tuple[float, float]:
    """``(|||u - w|||, max_a ||(û - ŵ)(δ_a)||)``."""
    v = u - w
    return triple_norm(v, ctx), float(np.max(dual_basis_norms(v), initial=0.0))


def norm_equivalence_constants(S, ctx: TripleNormContext) -> tuple[float, float]:
    """``(c, C)`` with ``c·sup_basis <= triple <= C·sup_basis`` on ``S ⊗ T``.

    Derived from the extreme eigenvalues of both Gram matrices and the
    singular values of the change of basis to the norm context.
    """
    T = ctx.system
    gS = np.linalg.eigvalsh(S.gram)
    gT = np.linalg.eigvalsh(T.gram)
    sN = np.linalg.svd(ctx.change, compute_uv=False)
    lower = np.sqrt(gS[0]) / np.sqrt(S.ambient_dim)
    upper = np.sqrt(gS[-1] * T.dim * S.dim * T.ambient_dim) / (sN[-1] * np.sqrt(gT[0]))
    return float(lower), float(upper)


# -- factorization through M_k --------------------------------------------------


@dataclass
class FactorizationPair:
    """CP maps ``phi(f) = [f(p_ij)]`` and ``psi([a_ij]) = sum a_ij q_ij``."""

    element: TensorElement
    P: SystemMatrix
    Q: SystemMatrix
    epsilon: float
    left_choi: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.P.size

    @property
    def amplification(self) -> float:
        """Bound on ``||sum_b r_b t_b||`` per unit of coefficient norm ``||r||``."""
        T = self.Q.system
        return float(np.sqrt(T.dim) * max(linalg.operator_norm(b) for b in T.basis))

    @property
    def certificate(self) -> MaxConeCertificate:
        return MaxConeCertificate(self.element, self.P, self.Q, self.epsilon, left_choi=self.left_choi)

    @property
    def residual(self) -> float:
        return self.certificate.residual

    def phi(self, f) -> np.ndarray:
        vals = np.asarray(getattr(f, "values", f), dtype=complex)
        return np.einsum("ija,a->ij", self.P.coeffs, vals)

    def psi(self, a) -> np.ndarray:
        return np.einsum("ij,ijb->b", linalg.as_matrix(a), self.Q.coeffs)

    def composed(self, f) -> np.ndarray:
        return self.psi(self.phi(f))

    def composition_errors(self) -> np.ndarray:
        """``||psi(phi(δ_a)) - û(δ_a)||_T`` over the dual basis."""
        h = hat(self.element)
        T = self.Q.system
        m = self.P.system.dim
        out = []
        for a in range(m):
            e = np.zeros(m)
            e[a] = 1.0
            out.append(linalg.operator_norm(T.element(self.composed(e) - h(e))))
        return np.array(out)

    def error_bounds(self) -> np.ndarray:
        """``eps·|f(1)|·||1|| + amplification·residual`` per dual basis functional."""
        unit = np.abs(self.P.system.unit_coeffs)
        return self.epsilon * unit + self.amplification * self.residual

    def check(self, tol: float = DEFAULT_TOL) -> bool:
        if not self.certificate.check(tol).passed:
            return False
        return bool(np.all(self.composition_errors() <= self.error_bounds() + tol))

    def verify(self, tol: float = DEFAULT_TOL) -> bool:
        return self.check(tol)


def pair_from_certificate(cert: MaxConeCertificate) -> FactorizationPair:
    if cert.element.level != 1 or not np.allclose(cert.A, np.ones((1, cert.k))):
        cert = cert.normal_form()
    return FactorizationPair(cert.element, cert.P, cert.Q, cert.epsilon, cert.left_choi,
                             {"residual": cert.residual})


def factor_through_matrices(
    u: TensorElement,
    eps: float = DEFAULT_EPS,
    k_max: int | None = None,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> FactorizationPair:
    """Approximate factorization of ``û`` through ``M_k`` from a membership certificate.

    Raises
    ------
    NotInMaxCone
        If ``u + eps·1⊗1`` is not certified in the maximal cone.
    """
    v = max_cone_membership(u, eps=eps, k_max=k_max, tol=tol, seed=seed)
    if not v.is_member:
        raise NotInMaxCone(f"membership at eps={eps} returned {v.status.value}")
    pair = pair_from_certificate(v.certificate)
    pair.diagnostics.update(k=pair.k, amplification=pair.amplification)
    return pair


def _positive(X: SystemMatrix, choi, tol: float) -> bool:
    if X.system.is_dual:
        if choi is None:
            return False
        ok = linalg.min_eigenvalue(choi) >= -tol
        return ok and np.max(np.abs(choi_values(X.system.primal, choi, X.size) - X.coeffs), initial=0.0) <= tol
    return X.is_hermitian(tol) and linalg.min_eigenvalue(realize(X)) >= -tol


def reconstruct_membership(
    pair: FactorizationPair, u: TensorElement, ctx: TripleNormContext, tol: float = 1e-9
) -> ConeVerdict:
    """Certify ``u + eps'·(1⊗1)`` with ``eps' = |||u - w|||`` and ``w = sum p_ij ⊗ q_ij``."""
    if pair.P.system.is_dual:
        raise TypeError("reconstruction needs a concrete left factor")
    if not (_positive(pair.P, pair.left_choi, tol) and _positive(pair.Q, None, tol)):
        raise NotPositive("factorization pair fails its positivity checks")
    w = schur_product(pair.P, pair.Q).compress(np.ones((1, pair.k)))
    v = u - w
    pert = perturbation_certificate(v, ctx)
    main = MaxConeCertificate(w, pair.P, pair.Q, 0.0)
    total = main + pert
    chk = total.check(tol)
    diag = {"epsilon": pert.epsilon, "residual": chk.residual}
    if chk.passed:
        return ConeVerdict.member(total, **diag)
    return ConeVerdict.unknown(**diag)


# -- symmetry -------------------------------------------------------------------


def swap(u: TensorElement) -> TensorElement:
    return u.swap()


def swap_certificate(c: MaxConeCertificate) -> MaxConeCertificate:
    return c.swap()


def swap_witness(w: MaxConeWitness) -> MaxConeWitness:
    return w.swap()


def swap_verdict(v: ConeVerdict) -> ConeVerdict:
    if v.is_member:
        return ConeVerdict.member(v.certificate.swap(), **v.diagnostics)
    if v.is_nonmember:
        return ConeVerdict.nonmember(v.witness.swap(), **v.diagnostics)
    return ConeVerdict.unknown(**v.diagnostics)


# -- nuclearity -----------------------------------------------------------------


def identity_element(T) -> TensorElement:
    """``u = sum_a δ_a ⊗ t_a`` in ``T^d ⊗ T``; its hat map is the identity of ``T``."""
    return TensorElement(DualSystem(T), T, np.eye(T.dim, dtype=complex))


def nuclearity_test(
    T,
    eps: float = DEFAULT_EPS,
    k_max: int | None = None,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> ConeVerdict:
    """Search for an approximate factorization of the identity of ``T`` through ``M_k``.

    ``Member`` carries a :class:`FactorizationPair` (the CP maps of the
    factorization). ``Unknown`` is never evidence against nuclearity.
    """
    if k_max is None:
        k_max = T.ambient_dim ** 2
    u = identity_element(T)
    v = max_cone_membership(u, eps=eps, k_max=k_max, tol=tol, seed=seed)
    diag = dict(v.diagnostics)
    if not v.is_member:
        return ConeVerdict.unknown(**diag)
    pair = pair_from_certificate(v.certificate)
    errs = pair.composition_errors()
    diag.update(k=pair.k, composition_error_on_dual_basis=errs.tolist())
    return ConeVerdict.member(pair, **diag)
