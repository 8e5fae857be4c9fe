"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line."""

import json
import time

import numpy as np
import pytest

from helpers import SMALL, max_entangled, random_element, random_matrix, random_psd, report, units_matrix
from oscone import factorization as fz
from oscone import linalg
from oscone import membership as mb
from oscone import serialize as sz
from oscone.opsys import builtin_system, level_positive
from oscone.tensor import (
    DFormCertificate,
    MaxConeCertificate,
    SchurDecomposition,
    TensorElement,
    compress_kron,
    decompose_as_schur,
    kron_as_schur,
    normal_form_level1,
    schur_product,
    tensor_kron,
)

M2 = builtin_system("Mn:2")
C2 = builtin_system("Cn:2")


def systems(rng):
    return builtin_system(rng.choice(SMALL)), builtin_system(rng.choice(SMALL))


def cert_member(rng, S, T, k=2):
    P, Q = random_psd(rng, S, k), random_psd(rng, T, k)
    return schur_product(P, Q).compress(np.ones((1, k)))


def test_criterion_01_schur_compression_identity():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        S, T = systems(rng)
        n = int(rng.integers(1, 4))
        X, Y = random_matrix(rng, S, n), random_matrix(rng, T, n)
        worst = max(worst, compress_kron(X, Y).distance(schur_product(X, Y)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 10
    report(1, ok, f"200 instances, max distance {worst:.1e} (<= 1e-12), {dt:.2f} s (< 10 s)")
    assert ok


def test_criterion_02_schur_decomposition():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(200):
        S, T = systems(rng)
        P = random_element(rng, S, T, int(rng.integers(1, 4)))
        worst = max(worst, decompose_as_schur(P).assemble().distance(P))
    ok = worst <= 1e-12
    report(2, ok, f"200 elements, max reassembly error {worst:.1e} (<= 1e-12)")
    assert ok


def test_criterion_03_kron_as_schur_and_all_ones():
    rng = np.random.default_rng(3)
    worst, positive = 0.0, True
    for _ in range(100):
        S, T = systems(rng)
        X = random_psd(rng, S, int(rng.integers(1, 4)))
        Y = random_psd(rng, T, int(rng.integers(1, 4)))
        X2, Y2 = kron_as_schur(X, Y)
        positive &= level_positive(X2).is_member and level_positive(Y2).is_member
        worst = max(worst, schur_product(X2, Y2).distance(tensor_kron(X, Y)))
    spectra = True
    for k in range(1, 9):
        J = linalg.all_ones(k)
        # exact eigenvectors: the ones vector for k, and e_1 - e_j for 0
        ones = np.ones(k)
        spectra &= np.array_equal(J @ ones, k * ones)
        for j in range(1, k):
            v = np.zeros(k)
            v[0], v[j] = 1, -1
            spectra &= np.array_equal(J @ v, np.zeros(k))
        lam = np.linalg.eigvalsh(J)
        spectra &= np.allclose(lam, [0] * (k - 1) + [k], atol=1e-12)
    ok = positive and worst <= 1e-12 and spectra
    report(3, ok, f"100 PSD pairs positive={positive}, max error {worst:.1e} (<= 1e-12), "
                  f"J_k spectra exact for k <= 8: {spectra}")
    assert ok


def test_criterion_04_dform_sform_equivalence():
    rng = np.random.default_rng(4)
    worst, all_ok = 0.0, True
    for _ in range(100):
        S, T = systems(rng)
        k, m = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        P, Q = random_psd(rng, S, k), random_psd(rng, T, m)
        A = rng.normal(size=(1, k * m)) + 1j * rng.normal(size=(1, k * m))
        u = tensor_kron(P, Q).compress(A)
        dform = DFormCertificate(u, P, Q, 0.0, A)
        sform = normal_form_level1(A, P, Q)
        back = sform.to_dform()
        n = int(rng.integers(1, 3))
        An = rng.normal(size=(n, k * m))
        lifted = DFormCertificate(tensor_kron(P, Q).compress(An), P, Q, 0.0, An).to_schur()
        for c in (dform, sform, back, lifted):
            all_ok &= c.verify(1e-10)
            worst = max(worst, c.residual)
    ok = all_ok and worst <= 1e-10
    report(4, ok, f"100 instances, D-form <-> S-form certificates verify: {all_ok}, max residual {worst:.1e} (<= 1e-10)")
    assert ok


def _shifted_element(rng, lam_target):
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    H = (g + g.conj().T) / 2
    H /= linalg.operator_norm(H)
    H += (lam_target - np.linalg.eigvalsh(H)[0]) * np.eye(4)
    return TensorElement.from_realization(M2, M2, H)


def test_criterion_05_full_algebra_oracle():
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    member_ok, nonmember_ok, unknown = 0, 0, 0
    worst_res, worst_k, worst_w = 0.0, 0, -np.inf
    for _ in range(50):
        u = _shifted_element(rng, rng.uniform(0.05, 0.5))
        v = mb.max_cone_membership(u, eps=1e-6)
        unknown += v.is_unknown
        if v.is_member:
            res = v.certificate.residual
            worst_res, worst_k = max(worst_res, res), max(worst_k, v.certificate.k)
            member_ok += res <= 1e-6 and v.certificate.k <= 4 and v.certificate.verify(1e-6)
    for _ in range(50):
        u = _shifted_element(rng, -rng.uniform(0.05, 0.5))
        v = mb.max_cone_membership(u, eps=1e-6)
        unknown += v.is_unknown
        if v.is_nonmember:
            worst_w = max(worst_w, v.witness.pairing_value)
            nonmember_ok += v.witness.pairing_value <= -0.04 and v.witness.verify()
    dt = time.perf_counter() - t0
    ok = member_ok == 50 and nonmember_ok == 50 and unknown == 0 and dt < 300
    report(5, ok, f"Member {member_ok}/50 (max residual {worst_res:.1e}, max k {worst_k}), "
                  f"NonMember {nonmember_ok}/50 (max witness value {worst_w:.3f}), Unknown {unknown}, {dt:.1f} s")
    assert ok


def test_criterion_06_max_entangled_certificate():
    P = units_matrix(M2, 2)
    cert = MaxConeCertificate(max_entangled(), P, P, 0.0)
    entry = json.loads(json.dumps(sz.certificate_to_dict(cert, 1e-12)))
    passed, info = sz.check_entry(entry)
    ok = passed and info["residual"] <= 1e-12
    report(6, ok, f"explicit P = Q = [E_ij] certificate verifies: {passed}, residual {info['residual']:.1e} (<= 1e-12)")
    assert ok


def _contraction(rng, S, k):
    X = random_matrix(rng, S, k)
    return X * (rng.uniform(0.2, 1.0) / linalg.operator_norm(X.realize()))


def _scalar_contraction(rng, r, c):
    A = rng.normal(size=(r, c)) + 1j * rng.normal(size=(r, c))
    return A * (rng.uniform(0.2, 1.0) / linalg.operator_norm(A))


def test_criterion_07_schur_product_contraction():
    rng = np.random.default_rng(7)
    worst, passed = 0.0, 0
    for _ in range(100):
        S, T = systems(rng)
        n, k = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        dec = SchurDecomposition(_scalar_contraction(rng, n, k), _contraction(rng, S, k),
                                 _contraction(rng, T, k), _scalar_contraction(rng, k, n))
        rep = mb.schur_contraction_check(dec)
        passed += rep.passed and rep.certificate.verify(1e-9)
        worst = max(worst, rep.norm_upper_bound)
    ok = passed == 100 and worst <= 1 + 1e-6
    report(7, ok, f"{passed}/100 contraction certificates verify, max norm bound {worst:.12f} (<= 1 + 1e-6)")
    assert ok


def test_criterion_08_factorization_pipeline():
    rng = np.random.default_rng(8)
    epsilons = (1e-1, 1e-2, 1e-3)
    n_ok, total, worst_excess, worst_recon = 0, 0, -np.inf, -np.inf
    for S in (C2, M2):
        ctx = fz.TripleNormContext(S)
        unit = np.abs(S.unit_coeffs)  # |δ_a(1)| for the dual basis
        for _ in range(20):
            total += 1
            u = cert_member(rng, S, S)
            errs, good = [], True
            for eps in epsilons:
                pair = fz.factor_through_matrices(u, eps=eps)
                e = pair.composition_errors()
                excess = np.max(e - (eps * (1 + unit) + 1e-5))
                worst_excess = max(worst_excess, excess)
                good &= excess <= 0 and pair.check()
                errs.append(np.max(e))
                v = fz.reconstruct_membership(pair, u, ctx)
                good &= v.is_member
                if v.is_member:
                    worst_recon = max(worst_recon, v.certificate.epsilon - eps)
                    good &= v.certificate.epsilon <= eps + 1e-5
            good &= errs[0] > errs[1] > errs[2]
            n_ok += bool(good)
    ok = n_ok == total
    report(8, ok, f"{n_ok}/{total} elements: bound slack {-worst_excess:.1e}, monotone in eps, "
                  f"max eps' - eps {worst_recon:.1e} (<= 1e-5)")
    assert ok


def test_criterion_09_nuclearity():
    t0 = time.perf_counter()
    lines, all_ok = [], True
    for name in ("Mn:2", "Mn:3", "Cn:2", "Cn:3", "span{I}"):
        T = builtin_system(name)
        v = fz.nuclearity_test(T, eps=1e-6)
        good = v.is_member
        if good:
            pair = v.certificate
            err = float(np.max(pair.composition_errors()))
            entry = json.loads(json.dumps(sz.pair_to_dict(pair, 1e-6)))
            rechecked, _ = sz.check_entry(entry)
            good = pair.k <= T.ambient_dim ** 2 and pair.residual <= 1e-6 and err <= 1e-5 and rechecked
            lines.append(f"{name}: k={pair.k} res={pair.residual:.1e} err={err:.1e}")
        else:
            lines.append(f"{name}: {v.status.value}")
        all_ok &= good
    dt = time.perf_counter() - t0
    ok = all_ok and dt < 600
    report(9, ok, "; ".join(lines) + f"; {dt:.1f} s (< 600 s)")
    assert ok


def test_criterion_10_symmetry():
    rng = np.random.default_rng(10)
    agree, worst = 0, 0.0
    for i in range(50):
        S, T = systems(rng)
        if i % 2 == 0:
            u = cert_member(rng, S, T)
        else:
            u = random_element(rng, S, T)
            u = TensorElement(S, T, u.coeffs.real)
            u = u + (-0.1 - linalg.min_eigenvalue(u.realize())) * TensorElement.unit(S, T)
        v = mb.max_cone_membership(u)
        sv = mb.max_cone_membership(u.swap())
        moved = fz.swap_verdict(v)
        good = v.status is sv.status is moved.status and not v.is_unknown
        if good and v.is_member:
            good = moved.certificate.verify(1e-6)
            worst = max(worst, abs(moved.certificate.residual - v.certificate.residual))
        elif good:
            good = moved.witness.verify()
            worst = max(worst, abs(moved.witness.recompute() - v.witness.pairing_value))
        agree += good
    ok = agree == 50 and worst <= 1e-10
    report(10, ok, f"{agree}/50 verdicts preserved by swap, transformed evidence re-verifies, max difference {worst:.1e} (<= 1e-10)")
    assert ok


def test_criterion_11_consistency():
    # runs after the criteria above in this module; the conftest session hook
    # repeats both checks over the whole suite
    conflicts = mb.verdict_conflicts()
    members = mb.logged_members()
    outside = 0
    concrete = 0
    for u, eps in members:
        if u.left.is_dual or u.right.is_dual:
            continue
        concrete += 1
        shifted = u + eps * TensorElement.unit(u.left, u.right, u.level)
        outside += not mb.min_cone_membership(shifted, tol=1e-6).is_member
    ok = not conflicts and outside == 0 and concrete > 0
    report(11, ok, f"{mb.verdict_log_size()} logged inputs, {len(conflicts)} conflicts, "
                   f"{outside}/{concrete} max members outside the min cone")
    assert ok
