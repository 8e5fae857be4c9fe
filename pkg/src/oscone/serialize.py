"""JSON forms of elements, certificates and witnesses, and their offline check.

Complex numbers are ``[re, im]`` pairs; matrices use the literal format of
:mod:`oscone.linalg`. :func:`check_entry` re-verifies a serialized
certificate or witness from its stored data with plain linear algebra.
"""

from __future__ import annotations

import numpy as np

from . import linalg
from .errors import Malformed
from .factorization import FactorizationPair
from .opsys import SystemMatrix, resolve_system, system_ref
from .tensor import MaxConeCertificate, MaxConeWitness, TensorElement


def _pairs(a) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [_pairs(x) for x in a]


def _unpairs(obj, shape: tuple, where: str) -> np.ndarray:
    out = np.zeros(shape, dtype=complex)

    def walk(o, idx):
        depth = len(idx)
        path = where + "".join(f"[{i}]" for i in idx)
        if depth == len(shape):
            if not (isinstance(o, (list, tuple)) and len(o) == 2 and all(isinstance(t, (int, float)) for t in o)):
                raise Malformed(f"{path}: expected [re, im], got {o!r}")
            out[idx] = complex(o[0], o[1])
            return
        if not isinstance(o, (list, tuple)) or len(o) != shape[depth]:
            n = len(o) if isinstance(o, (list, tuple)) else type(o).__name__
            raise Malformed(f"{path}: expected {shape[depth]} entries, got {n}")
        for i, x in enumerate(o):
            walk(x, idx + (i,))

    walk(obj, ())
    return out


def _literal(m) -> dict | None:
    return None if m is None else linalg.matrix_to_literal(m)


def _from_literal(obj, where: str):
    if obj is None:
        return None
    try:
        return linalg.matrix_from_literal(obj)
    except ValueError as exc:
        raise Malformed(f"{where}: {exc}") from None


def _field(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise Malformed(f"{where}: missing field {key!r}")
    return obj[key]


# -- elements -------------------------------------------------------------------


def element_to_dict(u: TensorElement) -> dict:
    return {
        "left": system_ref(u.left),
        "right": system_ref(u.right),
        "level": u.level,
        "coeffs": _pairs(u.coeffs),
    }


def element_from_dict(obj, where: str = "element") -> TensorElement:
    left = resolve_system(_field(obj, "left", where))
    right = resolve_system(_field(obj, "right", where))
    n = _field(obj, "level", where)
    if not isinstance(n, int) or n < 1:
        raise Malformed(f"{where}.level: expected a positive integer, got {n!r}")
    c = _unpairs(_field(obj, "coeffs", where), (n, n, left.dim, right.dim), where + ".coeffs")
    return TensorElement(left, right, c)


def matrix_to_dict(X: SystemMatrix) -> dict:
    return {"system": system_ref(X.system), "size": X.size, "coeffs": _pairs(X.coeffs)}


def matrix_from_dict(obj, where: str) -> SystemMatrix:
    S = resolve_system(_field(obj, "system", where))
    k = _field(obj, "size", where)
    if not isinstance(k, int) or k < 1:
        raise Malformed(f"{where}.size: expected a positive integer, got {k!r}")
    return SystemMatrix(S, _unpairs(_field(obj, "coeffs", where), (k, k, S.dim), where + ".coeffs"))


# -- certificates and witnesses -------------------------------------------------


def certificate_to_dict(c: MaxConeCertificate, tol: float) -> dict:
    return {
        "type": "max-cone-certificate",
        "element": element_to_dict(c.element),
        "epsilon": float(c.epsilon),
        "P": matrix_to_dict(c.P),
        "Q": matrix_to_dict(c.Q),
        "A": linalg.matrix_to_literal(c.A),
        "left_choi": _literal(c.left_choi),
        "right_choi": _literal(c.right_choi),
        "residual": float(c.residual),
        "tol": float(tol),
    }


def certificate_from_dict(obj, where: str = "certificate") -> MaxConeCertificate:
    return MaxConeCertificate(
        element_from_dict(_field(obj, "element", where), where + ".element"),
        matrix_from_dict(_field(obj, "P", where), where + ".P"),
        matrix_from_dict(_field(obj, "Q", where), where + ".Q"),
        float(_field(obj, "epsilon", where)),
        _from_literal(_field(obj, "A", where), where + ".A"),
        left_choi=_from_literal(obj.get("left_choi"), where + ".left_choi"),
        right_choi=_from_literal(obj.get("right_choi"), where + ".right_choi"),
    )


def witness_to_dict(w: MaxConeWitness, tol: float) -> dict:
    return {
        "type": "witness",
        "element": element_to_dict(w.element),
        "epsilon": float(w.epsilon),
        "W": linalg.matrix_to_literal(w.W),
        "pairing_value": float(w.pairing_value),
        "tol": float(tol),
    }


def witness_from_dict(obj, where: str = "witness") -> MaxConeWitness:
    return MaxConeWitness(
        element_from_dict(_field(obj, "element", where), where + ".element"),
        float(_field(obj, "epsilon", where)),
        _from_literal(_field(obj, "W", where), where + ".W"),
        float(_field(obj, "pairing_value", where)),
    )


def min_certificate_to_dict(u: TensorElement, min_eigenvalue: float, tol: float) -> dict:
    return {
        "type": "min-cone-certificate",
        "element": element_to_dict(u),
        "min_eigenvalue": float(min_eigenvalue),
        "tol": float(tol),
    }


def pair_to_dict(pair: FactorizationPair, tol: float) -> dict:
    return {
        "type": "factorization-pair",
        "k": pair.k,
        "epsilon": float(pair.epsilon),
        "certificate": certificate_to_dict(pair.certificate, tol),
        "composition_error_on_dual_basis": [float(e) for e in pair.composition_errors()],
        "error_bounds": [float(e) for e in pair.error_bounds()],
        "tol": float(tol),
    }


def check_entry(obj, where: str = "entry") -> tuple[bool, dict]:
    """Re-verify one serialized certificate or witness; returns ``(ok, details)``."""
    kind = _field(obj, "type", where)
    tol = float(_field(obj, "tol", where))
    if kind == "max-cone-certificate":
        c = certificate_from_dict(obj, where)
        chk = c.check(tol)
        return chk.passed, {"residual": chk.residual, "min_eigenvalue_left": chk.min_eigenvalue_left,
                            "min_eigenvalue_right": chk.min_eigenvalue_right}
    if kind == "witness":
        w = witness_from_dict(obj, where)
        val = w.recompute()
        return w.verify(tol), {"pairing_value": val}
    if kind == "factorization-pair":
        c = certificate_from_dict(_field(obj, "certificate", where), where + ".certificate")
        pair = FactorizationPair(c.element, c.P, c.Q, c.epsilon, c.left_choi)
        errs = pair.composition_errors()
        return pair.check(tol), {"composition_error_on_dual_basis": errs.tolist(), "residual": pair.residual}
    if kind == "min-cone-certificate":
        u = element_from_dict(_field(obj, "element", where), where + ".element")
        lam = linalg.min_eigenvalue(u.realize())
        ok = u.is_hermitian(tol) and lam >= -tol and abs(lam - float(obj["min_eigenvalue"])) <= tol
        return ok, {"min_eigenvalue": lam}
    raise Malformed(f"{where}.type: unknown entry type {kind!r}")
