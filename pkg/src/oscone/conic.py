"""Small dense semidefinite programs over Hermitian blocks.

Problems have the standard primal form::

    minimize    sum_b Re tr(C_b X_b)
    subject to  sum_b Re tr(A_ib X_b) = b_i      (i = 1..m)
                X_b PSD (Hermitian, complex)

Blocks of size 1 are plain nonnegative scalars and are handled as one
vectorized linear cone internally. The engine is an infeasible primal-dual
interior-point method with the HKM search direction and a Mehrotra
predictor-corrector step. Pure feasibility problems (no objective) go through
an elastic reformulation whose dual yields a Farkas certificate when the
constraints cannot be met.

Nothing returned by :func:`solve` is trusted downstream: every Feasible or
Optimal status has already passed :func:`verify`, which recomputes residuals
and eigenvalues from the problem data alone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import Malformed

DEFAULT_FEAS_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000
INACCURATE_SCORE = 1e-8


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class ConicProblem:
    """Block-diagonal SDP data.

    ``A[b]`` has shape ``(m, n_b, n_b)`` and stacks the coefficient matrix of
    every constraint on block ``b``; ``C`` is ``None`` for feasibility
    problems.
    """

    block_dims: tuple
    A: tuple
    b: np.ndarray
    C: tuple | None = None

    def __post_init__(self):
        dims = tuple(int(n) for n in self.block_dims)
        object.__setattr__(self, "block_dims", dims)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        object.__setattr__(self, "b", b)
        if any(n < 1 for n in dims):
            raise Malformed("block dimensions must be positive")
        if len(self.A) != len(dims):
            raise Malformed(f"{len(self.A)} constraint stacks for {len(dims)} blocks")
        stacks = []
        for n, a in zip(dims, self.A):
            a = np.asarray(a, dtype=complex)
            if a.shape != (b.size, n, n):
                raise Malformed(f"constraint stack of shape {a.shape}, expected {(b.size, n, n)}")
            stacks.append(a)
        object.__setattr__(self, "A", tuple(stacks))
        if self.C is not None:
            if len(self.C) != len(dims):
                raise Malformed("objective must give one matrix per block")
            cs = []
            for n, c in zip(dims, self.C):
                c = np.asarray(c, dtype=complex)
                if c.shape != (n, n):
                    raise Malformed(f"objective block of shape {c.shape}, expected {(n, n)}")
                cs.append(c)
            object.__setattr__(self, "C", tuple(cs))

    @classmethod
    def from_constraints(cls, block_dims, constraints, objective=None):
        """Build from a list of ``(coefficient matrices per block, rhs)`` pairs.

        A coefficient entry may be ``None`` (zero) and the per-block
        container may be a dict keyed by block index.
        """
        dims = [int(n) for n in block_dims]
        m = len(constraints)
        A = [np.zeros((m, n, n), dtype=complex) for n in dims]
        b = np.zeros(m)
        for i, (coeffs, rhs) in enumerate(constraints):
            items = coeffs.items() if isinstance(coeffs, dict) else enumerate(coeffs)
            for blk, mat in items:
                if mat is None:
                    continue
                mat = np.asarray(mat, dtype=complex).reshape(dims[blk], dims[blk])
                A[blk][i] = mat
            if abs(np.imag(rhs)) > 0:
                raise Malformed("right-hand sides must be real")
            b[i] = float(np.real(rhs))
        C = None
        if objective is not None:
            C = []
            items = objective.items() if isinstance(objective, dict) else enumerate(objective)
            C = [np.zeros((n, n), dtype=complex) for n in dims]
            for blk, mat in items:
                if mat is not None:
                    C[blk] = np.asarray(mat, dtype=complex).reshape(dims[blk], dims[blk])
        return cls(tuple(dims), tuple(A), b, None if C is None else tuple(C))

    @property
    def n_constraints(self) -> int:
        return self.b.size

    def check_hermitian(self, tol: float = 1e-10) -> None:
        for a in self.A:
            if a.size and np.max(np.abs(a - np.conj(np.swapaxes(a, 1, 2)))) > tol:
                raise Malformed("constraint coefficient matrices must be Hermitian")
        for c in self.C or ():
            if np.max(np.abs(c - c.conj().T)) > tol:
                raise Malformed("objective matrices must be Hermitian")

    def apply(self, blocks) -> np.ndarray:
        """Constraint values ``[sum_b Re tr(A_ib X_b)]_i``."""
        out = np.zeros(self.n_constraints)
        for a, x in zip(self.A, blocks):
            out += np.real(np.einsum("ixy,yx->i", a, x))
        return out

    def objective(self, blocks) -> float | None:
        if self.C is None:
            return None
        return float(sum(np.real(np.trace(c @ x)) for c, x in zip(self.C, blocks)))

    def adjoint_apply(self, y) -> list:
        return [np.einsum("i,ixy->xy", y, a) for a in self.A]


@dataclass
class ConicSolution:
    status: Status
    block_values: list
    objective_value: float | None
    max_constraint_residual: float
    min_block_eigenvalue: float
    dual: np.ndarray | None = None
    farkas: np.ndarray | None = None
    trace_bound: float | None = None
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in (Status.OPTIMAL, Status.FEASIBLE)


@dataclass(frozen=True)
class VerificationReport:
    max_constraint_residual: float
    min_block_eigenvalue: float
    feas_tol: float
    passed: bool


def verify(p: ConicProblem, s: ConicSolution, feas_tol: float = DEFAULT_FEAS_TOL) -> VerificationReport:
    """Recompute residuals and block spectra of ``s`` against ``p`` from scratch."""
    blocks = [np.asarray(x, dtype=complex) for x in s.block_values]
    if len(blocks) != len(p.block_dims):
        raise Malformed("solution has the wrong number of blocks")
    for n, x in zip(p.block_dims, blocks):
        if x.shape != (n, n):
            raise Malformed(f"block of shape {x.shape}, expected {(n, n)}")
    herm_dev = max((float(np.max(np.abs(x - x.conj().T))) for x in blocks), default=0.0)
    res = float(np.max(np.abs(p.apply(blocks) - p.b))) if p.n_constraints else 0.0
    lam = min(float(np.linalg.eigvalsh((x + x.conj().T) / 2)[0]) for x in blocks)
    passed = res <= feas_tol and lam >= -feas_tol and herm_dev <= feas_tol
    return VerificationReport(res, lam, feas_tol, passed)


def verify_farkas(p: ConicProblem, y, feas_tol: float = DEFAULT_FEAS_TOL) -> bool:
    """Check an infeasibility certificate.

    ``y`` certifies that no PSD point with total trace below ``1/feas_tol``
    meets the constraints when ``b.y == 1`` and every block of ``sum_i y_i A_i``
    has largest eigenvalue at most ``feas_tol``: any feasible ``X`` would give
    ``1 = <sum y A, X> <= feas_tol * tr X``.
    """
    y = np.asarray(y, dtype=float)
    if abs(float(p.b @ y) - 1.0) > 1e-9:
        return False
    for s in p.adjoint_apply(y):
        h = (s + s.conj().T) / 2
        if float(np.linalg.eigvalsh(h)[-1]) > feas_tol:
            return False
    return True


# -- interior-point engine ---------------------------------------------------


def _sym(m):
    return (m + m.conj().T) / 2


class _Data:
    """Problem data split into matrix blocks (n > 1) and one linear block."""

    def __init__(self, dims, A, b, C):
        self.dims = dims
        self.b = b
        self.m = b.size
        self.sdp = [i for i, n in enumerate(dims) if n > 1]
        self.lp = [i for i, n in enumerate(dims) if n == 1]
        self.As = [A[i] for i in self.sdp]
        self.Asf = [a.reshape(self.m, -1) for a in self.As]
        self.Cs = [C[i] for i in self.sdp]
        if self.lp:
            self.Al = np.real(np.concatenate([A[i].reshape(self.m, 1) for i in self.lp], axis=1))
            self.cl = np.real(np.array([C[i][0, 0] for i in self.lp]))
        else:
            self.Al = np.zeros((self.m, 0))
            self.cl = np.zeros(0)
        self.nu = sum(dims[i] for i in self.sdp) + len(self.lp)
        self.normb = np.linalg.norm(b)
        self.normC = np.sqrt(sum(np.linalg.norm(c) ** 2 for c in self.Cs) + self.cl @ self.cl)

    def A_op(self, Xs, xl):
        out = self.Al @ xl
        for af, x in zip(self.Asf, Xs):
            out = out + np.real(af @ x.T.reshape(-1))
        return out

    def AT_op(self, y):
        return [np.einsum("i,ixy->xy", y, a) for a in self.As], self.Al.T @ y

    def unsplit(self, Xs, xl):
        blocks = [None] * len(self.dims)
        for i, x in zip(self.sdp, Xs):
            blocks[i] = x
        for j, i in enumerate(self.lp):
            blocks[i] = np.array([[xl[j]]], dtype=complex)
        return blocks


def _max_step(X, dX):
    """Largest alpha with X + alpha dX PSD (inf if unbounded)."""
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    Li = sla.solve_triangular(L, np.eye(L.shape[0]), lower=True)
    lam = np.linalg.eigvalsh(_sym(Li @ dX @ Li.conj().T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_lp(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    with np.errstate(over="ignore", divide="ignore"):
        return float(np.min(-x[neg] / dx[neg]))


def _ipm(d: _Data, tol: float, max_iter: int):
    """Mehrotra predictor-corrector with the HKM direction.

    Returns ``(Xs, xl, y, Zs, zl, info)``; ``info['converged']`` reports
    whether the relative residuals and gap all fell below ``tol``.
    """
    m = d.m
    nrmA = max([np.linalg.norm(af, axis=1).max() for af in d.Asf if af.size] + [np.abs(d.Al).max(initial=0.0)] + [1.0])
    xi = max(10.0, np.sqrt(d.nu), max(1.0, d.normb) * np.sqrt(d.nu) / nrmA)
    eta = max(10.0, np.sqrt(d.nu), nrmA, d.normC)
    Xs = [xi * np.eye(d.dims[i], dtype=complex) for i in d.sdp]
    Zs = [eta * np.eye(d.dims[i], dtype=complex) for i in d.sdp]
    xl = np.full(len(d.lp), xi)
    zl = np.full(len(d.lp), eta)
    y = np.zeros(m)

    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        return _ipm_loop(d, tol, max_iter, Xs, xl, y, Zs, zl)


def _ipm_loop(d: _Data, tol: float, max_iter: int, Xs, xl, y, Zs, zl):
    m = d.m
    info = {"converged": False, "iterations": 0}
    best = None
    since_best = 0

    for it in range(max_iter):
        ATy_s, ATy_l = d.AT_op(y)
        rp = d.b - d.A_op(Xs, xl)
        Rd = [c - a - z for c, a, z in zip(d.Cs, ATy_s, Zs)]
        rdl = d.cl - ATy_l - zl
        gap = sum(np.real(np.trace(x @ z)) for x, z in zip(Xs, Zs)) + xl @ zl
        mu = gap / d.nu
        pobj = sum(np.real(np.trace(c @ x)) for c, x in zip(d.Cs, Xs)) + d.cl @ xl
        dobj = d.b @ y
        pinf = np.linalg.norm(rp) / (1 + d.normb)
        dinf = np.sqrt(sum(np.linalg.norm(r) ** 2 for r in Rd) + rdl @ rdl) / (1 + d.normC)
        relgap = abs(gap) / (1 + abs(pobj) + abs(dobj))
        score = max(pinf, dinf, relgap)
        if best is None or score < 0.5 * best[0]:
            since_best = 0
        else:
            since_best += 1
        if best is None or score < best[0]:
            best = (score, [x.copy() for x in Xs], xl.copy(), y.copy(), [z.copy() for z in Zs], zl.copy())
        info.update(iterations=it, pinf=pinf, dinf=dinf, relgap=relgap, pobj=pobj, dobj=dobj)
        if score < tol:
            info["converged"] = True
            break
        if not np.isfinite(score) or abs(dobj) > 1e12 or abs(pobj) > 1e12:
            break
        if since_best > 25 or not gap > 1e-300:
            info["stalled"] = True
            break

        try:
            Zinv = [np.linalg.inv(z) for z in Zs]
            M = np.zeros((m, m))
            for a, af, x, zi in zip(d.As, d.Asf, Xs, Zinv):
                G = x @ a @ zi
                M += np.real(af @ np.swapaxes(G, 1, 2).reshape(m, -1).T)
            if d.lp:
                if np.any(zl <= 0) or not np.all(np.isfinite(xl / zl)):
                    break
                M += (d.Al * (xl / zl)) @ d.Al.T
            M = (M + M.T) / 2
            Mfac = sla.cho_factor(M + 1e-14 * np.trace(M) / max(m, 1) * np.eye(m))
        except (np.linalg.LinAlgError, sla.LinAlgError, ValueError):
            # singular or non-finite Schur complement: keep the best iterate
            break

        def direction(sig_mu, corr_s, corr_l):
            H = [
                _sym((sig_mu * np.eye(x.shape[0]) - cs) @ zi) - x - _sym(x @ r @ zi)
                for x, zi, r, cs in zip(Xs, Zinv, Rd, corr_s)
            ]
            hl = (sig_mu - corr_l) / zl - xl - xl * rdl / zl
            dy = sla.cho_solve(Mfac, rp - d.A_op(H, hl))
            ATdy_s, ATdy_l = d.AT_op(dy)
            dZ = [r - a for r, a in zip(Rd, ATdy_s)]
            dX = [h + _sym(x @ a @ zi) for h, x, a, zi in zip(H, Xs, ATdy_s, Zinv)]
            dzl = rdl - ATdy_l
            dxl = hl + xl / zl * ATdy_l
            return dX, dxl, dy, dZ, dzl

        zero_s = [np.zeros_like(x) for x in Xs]
        zero_l = np.zeros_like(xl)
        dX, dxl, dy, dZ, dzl = direction(0.0, zero_s, zero_l)
        ap = min([1.0, _max_step_lp(xl, dxl)] + [_max_step(x, dx) for x, dx in zip(Xs, dX)])
        ad = min([1.0, _max_step_lp(zl, dzl)] + [_max_step(z, dz) for z, dz in zip(Zs, dZ)])
        gap_aff = sum(
            np.real(np.trace((x + ap * dx) @ (z + ad * dz))) for x, dx, z, dz in zip(Xs, dX, Zs, dZ)
        ) + (xl + ap * dxl) @ (zl + ad * dzl)
        sigma = min(1.0, max(0.0, gap_aff / gap)) ** 3 if gap > 0 else 0.0
        corr_s = [dx @ dz for dx, dz in zip(dX, dZ)]
        corr_l = dxl * dzl
        dX, dxl, dy, dZ, dzl = direction(sigma * mu, corr_s, corr_l)

        gamma = 0.9 + 0.09 * min(1.0, 1.0 - sigma) if it > 0 else 0.9
        ap = min([1.0, gamma * _max_step_lp(xl, dxl)] + [gamma * _max_step(x, dx) for x, dx in zip(Xs, dX)])
        ad = min([1.0, gamma * _max_step_lp(zl, dzl)] + [gamma * _max_step(z, dz) for z, dz in zip(Zs, dZ)])
        if ap <= 1e-12 and ad <= 1e-12:
            break
        Xs = [_sym(x + ap * dx) for x, dx in zip(Xs, dX)]
        xl = xl + ap * dxl
        y = y + ad * dy
        Zs = [_sym(z + ad * dz) for z, dz in zip(Zs, dZ)]
        zl = zl + ad * dzl

    if best is not None:
        info["best_score"] = best[0]
        if not info["converged"]:
            _, Xs, xl, y, Zs, zl = best
    return Xs, xl, y, Zs, zl, info


def _independent_rows(p: ConicProblem, tol: float):
    """Pivoted QR on the real-embedded constraint rows.

    Returns ``(keep, farkas)`` where ``farkas`` is a normalized certificate if
    a dependent row has an inconsistent right-hand side.
    """
    m = p.n_constraints
    if m == 0:
        return np.arange(0), None
    rows = np.concatenate(
        [np.concatenate([a.real.reshape(m, -1), a.imag.reshape(m, -1)], axis=1) for a in p.A], axis=1
    )
    _, R, piv = sla.qr(rows.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > 1e-10 * scale))
    keep = np.sort(piv[:rank])
    drop = np.setdiff1d(np.arange(m), keep)
    if drop.size == 0:
        return keep, None
    coef, *_ = np.linalg.lstsq(rows[keep].T, rows[drop].T, rcond=None)
    mismatch = p.b[drop] - coef.T @ p.b[keep]
    worst = int(np.argmax(np.abs(mismatch)))
    if abs(mismatch[worst]) > tol * (1 + np.abs(p.b).max()):
        y = np.zeros(m)
        y[drop[worst]] = 1.0
        y[keep] = -coef[:, worst]
        y /= float(p.b @ y)
        return keep, y
    return keep, None


def _subproblem(p: ConicProblem, keep, C):
    return _Data(p.block_dims, [a[keep] for a in p.A], p.b[keep], C)


def _finish(p, blocks, status, obj, y=None, farkas=None, trace_bound=None, iterations=0, diag=None, feas_tol=DEFAULT_FEAS_TOL):
    blocks = [_sym(np.asarray(x, dtype=complex)) for x in blocks]
    sol = ConicSolution(status, blocks, obj, 0.0, 0.0, y, farkas, trace_bound, iterations, diag or {})
    rep = verify(p, sol, feas_tol)
    sol.max_constraint_residual = rep.max_constraint_residual
    sol.min_block_eigenvalue = rep.min_block_eigenvalue
    if sol.ok and not rep.passed:
        sol.status = Status.INDETERMINATE
        sol.diagnostics["verification_failed"] = True
    return sol


def _elastic(p: ConicProblem, keep, feas_tol, max_iter, rho_scale=0.1):
    """Minimize the l1 constraint violation plus a small trace penalty."""
    m = keep.size
    dims = list(p.block_dims) + [1] * (2 * m)
    A = [a[keep] for a in p.A]
    eye = np.eye(m)
    for sign in (1.0, -1.0):
        for j in range(m):
            A.append((sign * eye[:, j]).reshape(m, 1, 1).astype(complex))
    rho = rho_scale * feas_tol
    C = [rho * np.eye(n, dtype=complex) for n in p.block_dims] + [np.ones((1, 1), dtype=complex)] * (2 * m)
    d = _Data(dims, A, p.b[keep], C)
    Xs, xl, y, _, _, info = _ipm(d, min(1e-11, feas_tol * 1e-3), max_iter)
    blocks = d.unsplit(Xs, xl)[: len(p.block_dims)]
    y_full = np.zeros(p.n_constraints)
    y_full[keep] = y
    return blocks, y_full, info


def solve(
    p: ConicProblem,
    feas_tol: float = DEFAULT_FEAS_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
) -> ConicSolution:
    """Solve ``p`` and return a verified solution or an honest status.

    The engine is deterministic; ``seed`` is accepted for interface
    uniformity and does not influence the iterates.
    """
    if feas_tol <= 0:
        raise ValueError("feas_tol must be positive")
    p.check_hermitian()
    iters = min(max_iter, 200)
    keep, farkas = _independent_rows(p, feas_tol)
    zero_blocks = [np.zeros((n, n), dtype=complex) for n in p.block_dims]
    if farkas is not None:
        return _finish(p, zero_blocks, Status.INFEASIBLE, p.objective(zero_blocks), farkas=farkas,
                       trace_bound=np.inf, feas_tol=feas_tol, diag={"reason": "inconsistent equalities"})

    if p.C is not None:
        d = _subproblem(p, keep, p.C)
        Xs, xl, y, _, _, info = _ipm(d, min(1e-10, feas_tol * 1e-2), iters)
        blocks = d.unsplit(Xs, xl)
        y_full = np.zeros(p.n_constraints)
        y_full[keep] = y
        if not info["converged"] and info.get("best_score", np.inf) <= INACCURATE_SCORE:
            # stalled close to the optimum, typically at a rank-deficient solution
            info["converged"] = True
            info["inaccurate"] = True
        sol = _finish(p, blocks, Status.OPTIMAL if info["converged"] else Status.INDETERMINATE,
                      p.objective(blocks), y=y_full, iterations=info["iterations"], diag=info, feas_tol=feas_tol)
        if sol.ok or info["converged"]:
            return sol
        # fall through: decide feasibility of the constraint set alone
        status_if_feasible = Status.INDETERMINATE
    else:
        status_if_feasible = Status.FEASIBLE

    blocks, y, info = _elastic(p, keep, feas_tol, iters)
    sol = _finish(p, blocks, status_if_feasible, p.objective(blocks), y=y,
                  iterations=info["iterations"], diag=info, feas_tol=feas_tol)
    if sol.ok:
        return sol
    # The trace penalty rho caps the Farkas ratio at rho / (b.y), so a small
    # violation margin may need a smaller penalty before the certificate checks.
    for rho_scale in (None, 1e-4, 1e-7):
        if rho_scale is not None:
            _, y, _ = _elastic(p, keep, feas_tol, iters, rho_scale)
        g = float(p.b @ y)
        if not g > feas_tol:
            break
        cert = y / g
        if verify_farkas(p, cert, feas_tol):
            lam = max(float(np.linalg.eigvalsh(_sym(s))[-1]) for s in p.adjoint_apply(cert))
            sol.status = Status.INFEASIBLE
            sol.farkas = cert
            sol.trace_bound = np.inf if lam <= 0 else 1.0 / lam
            break
    return sol
