"""Membership in the minimal and maximal tensor cones.

The minimal cone is concrete positivity of the spatial realization. The
maximal cone is decided at a fixed ``eps > 0``:

1. witness phase: the smallest eigenvalue of the realization of
   ``u + eps·1⊗1`` is the minimum of ``tr(W ·)`` over density matrices ``W``;
   a value below ``-tol`` is a sound non-membership witness because every
   state on the ambient algebra restricts to a positive functional on the
   maximal tensor product.
2. see-saw: for sizes ``k = 1..k_max`` alternately solve for ``P`` with ``Q``
   fixed and for ``Q`` with ``P`` fixed in ``sum p_ij ⊗ q_ij = u + eps·1⊗1``.
   Each half step is a small SDP minimizing the l1 equation residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import conic, linalg
from .errors import NotHermitian, PreconditionViolated, SizeMismatch
from .opsys import SystemMatrix, amplify, choi_values, dual_functionals, realize
from .tensor import MaxConeCertificate, MaxConeWitness, SchurDecomposition, TensorElement, block_matrix
from .verdict import ConeVerdict

DEFAULT_EPS = 1e-6
DEFAULT_TOL = 1e-6
RESTARTS = 5
MAX_ROUNDS = 40
RHO = 1e-6


# -- verdict log ----------------------------------------------------------------

_VERDICT_LOG: dict = {}
_MEMBERS: dict = {}


def _log_key(u: TensorElement, eps: float):
    return (hash(u.left), hash(u.right), u.level, np.round(u.coeffs, 10).tobytes(), float(eps))


def record_verdict(u: TensorElement, eps: float, verdict: ConeVerdict) -> None:
    """Remember verified definitive verdicts so contradictions can be detected."""
    if verdict.is_unknown:
        return
    key = _log_key(u, eps)
    _VERDICT_LOG.setdefault(key, set()).add(verdict.status.value)
    if verdict.is_member:
        _MEMBERS.setdefault(key, (u, eps))


def verdict_conflicts() -> list:
    return [k for k, v in _VERDICT_LOG.items() if len(v) > 1]


def logged_members() -> list:
    """``(u, eps)`` for every element certified in the maximal cone so far."""
    return list(_MEMBERS.values())


def verdict_log_size() -> int:
    return len(_VERDICT_LOG)


def clear_verdict_log() -> None:
    _VERDICT_LOG.clear()
    _MEMBERS.clear()


# -- minimal cone ---------------------------------------------------------------


def min_cone_membership(u: TensorElement, tol: float = DEFAULT_TOL) -> ConeVerdict:
    """Positivity of the realization of ``u`` in ``M_n(M_dS ⊗ M_dT)``."""
    u.check_hermitian(max(tol, 1e-12))
    lam, v = linalg.min_eigenpair(u.realize())
    if lam >= -tol:
        return ConeVerdict.member(lam, min_eigenvalue=lam)
    W = np.outer(v, v.conj())
    return ConeVerdict.nonmember(MaxConeWitness(u, 0.0, W, lam), min_eigenvalue=lam)


# -- see-saw --------------------------------------------------------------------


def _hermitian_units(k: int) -> list:
    out = []
    for i in range(k):
        for j in range(i, k):
            e = linalg.matrix_unit(k, i, j)
            if i == j:
                out.append(e)
            else:
                out.append((e + e.T) / np.sqrt(2))
                out.append(1j * (e - e.T) / np.sqrt(2))
    return out


class _Side:
    """One factor of the see-saw.

    The variable is a PSD matrix ``X``: the realization of ``P`` for a
    concrete system (kept inside ``M_k(S)`` by hard constraints) or the Choi
    matrix of ``P`` for a dual system. ``values(X)`` returns the coefficient
    array ``(k, k, m)``.
    """

    def __init__(self, system, k: int):
        self.system = system
        self.k = k
        if system.is_dual:
            S = system.primal
            self.K = dual_functionals(S, k)
            self.hard = np.zeros((0, k * S.ambient_dim, k * S.ambient_dim), dtype=complex)
        else:
            S = system
            Kc = np.einsum("ac,cxy->axy", S.gram_inv, S.basis)
            self.K = np.array([[[np.kron(linalg.matrix_unit(k, j, i), Kc[a]) for a in range(S.dim)]
                                for j in range(k)] for i in range(k)])
            comp = S.complement
            self.hard = np.array([np.kron(h, g) for h in _hermitian_units(k) for g in comp]).reshape(
                -1, k * S.ambient_dim, k * S.ambient_dim)
        self.d = S.ambient_dim
        self.N = k * self.d

    def values(self, X) -> np.ndarray:
        return np.einsum("ijaxy,yx->ija", self.K, X)

    def matrix(self, X) -> SystemMatrix:
        return SystemMatrix(self.system, self.values(X))

    def unit(self) -> np.ndarray:
        if self.system.is_dual:
            return np.eye(self.N, dtype=complex) / self.d
        return np.eye(self.N, dtype=complex)

    def project_psd(self, X) -> np.ndarray | None:
        """Move ``X`` into the feasible set, shifting by the unit if needed."""
        if not self.system.is_dual:
            X = realize(self.matrix(X))
        X = linalg.hermitian_part(X)
        lam = linalg.min_eigenvalue(X)
        if lam < 0:
            X = X - lam * np.eye(self.N)
        return X

    def matrix_units(self) -> np.ndarray | None:
        """``[E_ij]`` (concrete, projected) or the Choi matrix of the identity
        (dual); ``None`` when the projection is not positive."""
        d = self.d
        if self.system.is_dual:
            v = np.eye(d, dtype=complex).reshape(-1)
            return np.outer(v, v)
        r = np.zeros((d, d, d, d), dtype=complex)
        for i in range(d):
            for j in range(d):
                r[i, :, j, :] = linalg.matrix_unit(d, i, j)
        X = realize(SystemMatrix.from_realization(self.system, r.reshape(d * d, d * d), d))
        return X if linalg.min_eigenvalue(X) >= -1e-12 else None

    def random(self, rng) -> np.ndarray:
        G = rng.normal(size=(self.N, self.N)) + 1j * rng.normal(size=(self.N, self.N))
        X = self.project_psd(G @ G.conj().T)
        return X / np.real(np.trace(X))


def _half_step(side: _Side, other: np.ndarray, target: np.ndarray, feas_tol: float):
    """Minimize ``sum |sum_ij other_ijb value_ija - target_ab| + rho tr X`` over ``X``."""
    m_s, m_o = target.shape
    rows = m_s * m_o
    # solve a unit-scale problem and undo the scaling afterwards
    so = max(float(np.linalg.norm(other)), 1e-300)
    st = max(float(np.linalg.norm(target)), 1e-300)
    other, target = other / so, target / st
    A = np.einsum("ijb,ijaxy->abxy", other, side.K).reshape(rows, side.N, side.N)
    A = (A + np.conj(np.swapaxes(A, 1, 2))) / 2
    h = side.hard.shape[0]
    m = rows + h
    stacks = [np.concatenate([A, side.hard])]
    for sign in (1.0, -1.0):
        for j in range(rows):
            s = np.zeros((m, 1, 1), dtype=complex)
            s[j] = sign
            stacks.append(s)
    b = np.concatenate([np.real(target).reshape(-1), np.zeros(h)])
    C = [RHO * np.eye(side.N, dtype=complex)] + [np.ones((1, 1), dtype=complex)] * (2 * rows)
    p = conic.ConicProblem((side.N,) + (1,) * (2 * rows), tuple(stacks), b, tuple(C))
    sol = conic.solve(p, feas_tol=feas_tol)
    X = sol.block_values[0]
    # an unverified iterate is still a usable see-saw point: certificates are checked independently
    if not np.all(np.isfinite(X)):
        return None
    return side.project_psd(X * (st / so))


def _assemble(Pv, Qv) -> np.ndarray:
    return np.einsum("ija,ijb->ab", Pv, Qv)


@dataclass
class _Run:
    k: int
    start: str
    XP: np.ndarray | None
    XQ: np.ndarray | None
    residual: float
    rounds: int


def _seesaw(left: _Side, right: _Side, target, start: str, X0, first: str, tol: float,
            feas_tol: float) -> _Run:
    XP, XQ = (X0, None) if first == "P" else (None, X0)
    best = _Run(left.k, start, None, None, np.inf, 0)
    history = []
    for rnd in range(MAX_ROUNDS):
        if XQ is None or rnd > 0 or first == "P":
            XQ = _half_step(right, left.values(XP), target.T, feas_tol)
            if XQ is None:
                break
        XP = _half_step(left, right.values(XQ), target, feas_tol)
        if XP is None:
            break
        Pv, Qv = left.values(XP), right.values(XQ)
        if min(np.linalg.norm(Pv), np.linalg.norm(Qv)) <= 1e-12 * max(np.linalg.norm(target), 1.0):
            # a factor collapsed to zero; the other half step would be degenerate
            break
        # balance the two factors
        a = np.sqrt(max(np.linalg.norm(Qv), 1e-300) / max(np.linalg.norm(Pv), 1e-300))
        XP, XQ = XP * a, XQ / a
        res = float(np.linalg.norm(_assemble(left.values(XP), right.values(XQ)) - target))
        history.append(res)
        if res < best.residual:
            best = _Run(left.k, start, XP, XQ, res, rnd + 1)
        if res <= tol * 1e-2:
            break
        if len(history) > 3 and history[-1] > 0.95 * history[-4]:
            break
    return best


def _starts(u_eps: TensorElement, k_max: int, restarts: int) -> list:
    """Initial points in the order they are tried: ``(k, label, side)``.

    Structured starts of every size come first, then per size the sketch
    and the seeded random restarts."""
    S, T = u_eps.left, u_eps.right
    out = [(1, "unit-P", "P"), (1, "unit-Q", "Q")]
    if S.ambient_dim <= k_max:
        out.append((S.ambient_dim, "units-P", "P"))
    if T.ambient_dim <= k_max:
        out.append((T.ambient_dim, "units-Q", "Q"))
    for k in range(1, k_max + 1):
        if not S.is_dual and not T.is_dual:
            out.append((k, "sketch", "Q"))
        for r in range(restarts):
            out.append((k, f"random-{r}", "Q" if r % 2 == 0 else "P"))
    return out


def _sketch(side: _Side, u_eps: TensorElement, k: int, rng) -> np.ndarray:
    """Compression of the realization of ``u_eps`` by ``V ⊗ I`` projected to ``M_k(T)^+``."""
    dS, dT = u_eps.left.ambient_dim, u_eps.right.ambient_dim
    R = u_eps.realize()
    V = np.eye(dS, k, dtype=complex) if k <= dS else rng.normal(size=(dS, k)) + 0j
    L = np.kron(V, np.eye(dT))
    return side.project_psd(L.conj().T @ R @ L)


def _certificate(u: TensorElement, eps: float, left: _Side, right: _Side, run: _Run) -> MaxConeCertificate:
    P = left.matrix(run.XP)
    Q = right.matrix(run.XQ)
    return MaxConeCertificate(
        u, P, Q, eps,
        left_choi=run.XP if left.system.is_dual else None,
        right_choi=run.XQ if right.system.is_dual else None,
        diagnostics={"start": run.start, "rounds": run.rounds},
    )


def _witness_value(u_eps: TensorElement):
    lam, v = linalg.min_eigenpair(u_eps.realize())
    return lam, np.outer(v, v.conj())


def max_cone_membership(
    u: TensorElement,
    eps: float = DEFAULT_EPS,
    k_max: int | None = None,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    restarts: int = RESTARTS,
) -> ConeVerdict:
    """Decide ``u + eps·(1⊗1)`` in the maximal cone at level one.

    Returns ``Member`` with a :class:`MaxConeCertificate`, ``NonMember`` with a
    :class:`MaxConeWitness`, or ``Unknown`` with the best residual, the witness
    value and the size ceiling used.
    """
    if u.level != 1:
        return max_cone_membership_level(u, eps=eps, k_max=k_max, tol=tol, seed=seed, restarts=restarts)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    u.check_hermitian(max(tol, 1e-12))
    S, T = u.left, u.right
    if k_max is None:
        k_max = S.ambient_dim * T.ambient_dim
    u_eps = u + eps * TensorElement.unit(S, T)
    target = np.real(u_eps.coeffs[0, 0])
    diag: dict = {"eps": eps, "k_max": k_max, "tol": tol}

    concrete = not (S.is_dual or T.is_dual)
    witness_value = None
    if concrete:
        witness_value, W = _witness_value(u_eps)
        diag["witness_value"] = witness_value
        if witness_value < -tol:
            w = MaxConeWitness(u, eps, W, witness_value)
            if w.verify(tol):
                v = ConeVerdict.nonmember(w, **diag)
                record_verdict(u, eps, v)
                return v

    rng = np.random.default_rng(seed)
    sides: dict = {}

    def side(system, k):
        key = (system is S, k)
        if key not in sides:
            sides[key] = _Side(system, k)
        return sides[key]

    feas_tol = min(1e-9, tol * 1e-3)
    best: _Run | None = None
    tried = 0
    for k, label, first in _starts(u_eps, k_max, restarts):
        ls, rs = side(S, k), side(T, k)
        start_side = ls if first == "P" else rs
        if label.startswith("units"):
            X0 = start_side.matrix_units()
            if X0 is None:
                continue
        elif label.startswith("unit"):
            X0 = start_side.unit()
        elif label == "sketch":
            X0 = _sketch(rs, u_eps, k, rng)
        else:
            X0 = start_side.random(rng)
        tried += 1
        run = _seesaw(ls, rs, target, label, X0, first, tol, feas_tol)
        if run.XP is None:
            continue
        if best is None or run.residual < best.residual:
            best = run
        if run.residual <= tol:
            cert = _certificate(u, eps, ls, rs, run)
            chk = cert.check(tol)
            if chk.passed:
                v = ConeVerdict.member(cert, k=k, residual=chk.residual, starts_tried=tried, **diag)
                record_verdict(u, eps, v)
                return v
    diag.update(best_residual=None if best is None else best.residual, starts_tried=tried)
    if witness_value is not None and abs(witness_value) <= tol:
        diag["tie"] = True
    return ConeVerdict.unknown(**diag)


# -- higher levels --------------------------------------------------------------


def _level_shuffle(n: int, dS: int, dT: int) -> np.ndarray:
    """Permutation taking index ``(i, x, y)`` of ``M_n(M_dS ⊗ M_dT)`` to ``(x, i, y)``."""
    return np.kron(linalg.canonical_shuffle(n, dS), np.eye(dT))


def lift_to_level_one(U: TensorElement):
    """Rewrite ``U ∈ M_n(S ⊗ T)`` as an element of ``S ⊗ M_n(T)``."""
    n, T = U.level, U.right
    if T.is_dual:
        raise TypeError("the right factor must be a concrete system")
    Tn = amplify(T, n)
    dT = T.ambient_dim
    c = np.zeros((1, 1, U.left.dim, Tn.dim), dtype=complex)
    for a in range(U.left.dim):
        m = np.einsum("rsb,bxy->rxsy", U.coeffs[:, :, a, :], T.basis).reshape(n * dT, n * dT)
        c[0, 0, a] = Tn.coords(m)
    return TensorElement(U.left, Tn, c)


def max_cone_membership_level(
    U: TensorElement,
    eps: float = DEFAULT_EPS,
    k_max: int | None = None,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    restarts: int = RESTARTS,
) -> ConeVerdict:
    """Membership of ``U + eps·(I_n ⊗ 1 ⊗ 1)`` in the maximal cone at level ``n``.

    ``U`` is identified with an element of ``S ⊗ M_n(T)`` and decided at
    level one; certificates and witnesses are translated back.
    """
    n = U.level
    if n == 1:
        return max_cone_membership(U, eps=eps, k_max=k_max, tol=tol, seed=seed, restarts=restarts)
    U.check_hermitian(max(tol, 1e-12))
    S, T = U.left, U.right
    u1 = lift_to_level_one(U)
    if k_max is None:
        k_max = S.ambient_dim * T.ambient_dim
    v = max_cone_membership(u1, eps=eps, k_max=k_max, tol=tol, seed=seed, restarts=restarts)
    diag = dict(v.diagnostics, level=n)
    if v.is_member:
        c = v.certificate
        k = c.k
        P = c.P.kron_scalar(linalg.all_ones(n))
        if c.Q.system.is_dual:
            raise TypeError("the right factor must be a concrete system")
        Q = SystemMatrix.from_realization(T, realize(c.Q), k * n)
        A = np.kron(np.ones((1, k)), np.eye(n))
        choi = None if c.left_choi is None else _amplified_choi(c.left_choi, S.ambient_dim, k, n)
        cert = MaxConeCertificate(U, P, Q, eps, A, left_choi=choi)
        chk = cert.check(tol)
        if chk.passed:
            out = ConeVerdict.member(cert, **dict(diag, residual=chk.residual))
            record_verdict(U, eps, out)
            return out
        return ConeVerdict.unknown(**dict(diag, level_certificate_failed=True))
    if v.is_nonmember:
        w = v.witness
        if not (S.is_dual or T.is_dual):
            V = _level_shuffle(n, S.ambient_dim, T.ambient_dim)
            W = V.T @ w.W @ V
            wl = MaxConeWitness(U, eps, W, float(np.real(np.trace(W @ (U + eps * TensorElement.unit(S, T, n)).realize()))))
            if wl.verify(tol):
                out = ConeVerdict.nonmember(wl, **diag)
                record_verdict(U, eps, out)
                return out
        return ConeVerdict.unknown(**diag)
    return ConeVerdict.unknown(**diag)


def _amplified_choi(choi, d: int, k: int, n: int) -> np.ndarray:
    """Choi matrix of ``x -> Phi(x) ⊗ J_n`` from that of ``Phi: M_d -> M_k``."""
    c4 = linalg.as_matrix(choi).reshape(d, k, d, k)
    J = np.ones((n, n))
    return np.einsum("piqj,rs->pirqjs", c4, J).reshape(d * k * n, d * k * n)


# -- operator system norm -------------------------------------------------------


@dataclass
class NormBracket:
    """``lo <= norm <= hi``; ``upper_certificate`` proves ``hi`` and
    ``lower_witness`` (when bisection moved ``lo``) proves ``lo``."""

    lo: float
    hi: float
    diagnostics: dict = field(default_factory=dict)
    upper_certificate: MaxConeCertificate | None = None
    lower_witness: MaxConeWitness | None = None

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi


def norm_block(U: TensorElement, r: float) -> TensorElement:
    """``[[r·1, U], [U^*, r·1]]`` at level ``2n``."""
    one = TensorElement.unit(U.left, U.right, U.level) * r
    return block_matrix([[one, U], [U.adjoint(), one]])


def osy_max_norm(
    U: TensorElement,
    tol: float = 1e-4,
    eps: float | None = None,
    k_max: int | None = None,
    seed: int = 0,
    max_steps: int = 60,
) -> NormBracket:
    """Bracket the maximal operator system norm of ``U`` by bisection.

    Membership of the ``2n`` block at ``r`` with shift ``eps`` gives the upper
    bound ``r + eps``; a witness at ``r`` gives the lower bound ``r``. The
    initial lower bound is the norm of the spatial realization, which never
    exceeds the maximal norm.
    """
    eps = tol / 4 if eps is None else eps
    mtol = min(DEFAULT_TOL, eps / 4)
    lo = linalg.operator_norm(U.realize())
    diag: dict = {"eps": eps, "unknown_at": [], "evaluations": 0}

    def test(r):
        diag["evaluations"] += 1
        return max_cone_membership_level(norm_block(U, r), eps=eps, k_max=k_max, tol=mtol, seed=seed)

    out = NormBracket(lo, np.inf, diag)
    r = lo
    for _ in range(max_steps):
        v = test(r)
        if v.is_member:
            out.hi, out.upper_certificate = r + eps, v.certificate
            break
        if v.is_nonmember and r >= out.lo:
            out.lo, out.lower_witness = r, v.witness
        elif v.is_unknown:
            diag["unknown_at"].append(r)
        r = max(2 * r, r + tol, 1e-3)
    if not np.isfinite(out.hi):
        diag["bracket_met"] = False
        return out

    steps = 0
    while out.hi - out.lo > tol and steps < max_steps:
        steps += 1
        mid = (out.lo + out.hi - eps) / 2 if out.hi - eps > out.lo else (out.lo + out.hi) / 2
        v = test(mid)
        if v.is_member and mid + eps < out.hi:
            out.hi, out.upper_certificate = mid + eps, v.certificate
        elif v.is_nonmember and mid > out.lo:
            out.lo, out.lower_witness = mid, v.witness
        elif v.is_unknown:
            diag["unknown_at"].append(mid)
            break
    diag["bracket_met"] = out.hi - out.lo <= tol
    return out


# -- complete contractivity of the Schur product --------------------------------


@dataclass
class ContractionReport:
    passed: bool
    residual: float
    norm_upper_bound: float
    certificate: MaxConeCertificate
    element: TensorElement


def schur_contraction_check(dec: SchurDecomposition, tol: float = 1e-9) -> ContractionReport:
    """Explicit certificate that ``[[I, U], [U^*, I]]`` is in the maximal cone
    for ``U = A (X ∘ Y) B`` with contractive ``A``, ``B``, ``X``, ``Y``.

    The certificate is the Schur product of ``[[I, X], [X^*, I]]`` and
    ``[[I, Y], [Y^*, I]]`` compressed by ``A ⊕ B^*``, plus the scalar pad
    ``(I - AA^*) ⊕ (I - B^*B)``.
    """
    A, B = linalg.as_matrix(dec.A), linalg.as_matrix(dec.B)
    X, Y = dec.X, dec.Y
    S, T = X.system, Y.system
    norms = {
        "A": linalg.operator_norm(A),
        "B": linalg.operator_norm(B),
        "X": linalg.operator_norm(realize(X)),
        "Y": linalg.operator_norm(realize(Y)),
    }
    bad = {k: v for k, v in norms.items() if v > 1 + 1e-12}
    if bad:
        raise PreconditionViolated(f"inputs must be contractions, got norms {bad}")
    n, k = A.shape
    if B.shape != (k, n):
        raise SizeMismatch(f"B must be {k} x {n}, got {B.shape}")

    def dilation(Z: SystemMatrix) -> SystemMatrix:
        sys = Z.system
        c = np.zeros((2 * k, 2 * k, sys.dim), dtype=complex)
        c[:k, :k] = sys.identity(k).coeffs
        c[k:, k:] = sys.identity(k).coeffs
        c[:k, k:] = Z.coeffs
        c[k:, :k] = Z.adjoint().coeffs
        return SystemMatrix(sys, c)

    U = dec.assemble()
    target = block_matrix([[TensorElement.unit(S, T, n), U], [U.adjoint(), TensorElement.unit(S, T, n)]])
    Ap = np.zeros((2 * n, 2 * k), dtype=complex)
    Ap[:n, :k] = A
    Ap[n:, k:] = B.conj().T
    main = MaxConeCertificate(target, dilation(X), dilation(Y), 0.0, Ap)
    pad = np.zeros((2 * n, 2 * n), dtype=complex)
    pad[:n, :n] = np.eye(n) - A @ A.conj().T
    pad[n:, n:] = np.eye(n) - B.conj().T @ B
    L = linalg.psd_sqrt_factor(pad)
    r = L.shape[1]
    P = main.P.direct_sum(S.identity(r))
    Q = main.Q.direct_sum(T.identity(r))
    cert = MaxConeCertificate(target, P, Q, 0.0, np.hstack([Ap, L]))
    chk = cert.check(tol)
    return ContractionReport(chk.passed, chk.residual, 1.0 + chk.residual, cert, U)
