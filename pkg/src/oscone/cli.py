"""Command-line interface.

Every command prints one JSON report to standard output. Exit codes: 0 for a
definitive answer, 2 for ``Unknown`` (or an unmet norm bracket), 1 for input
or solver errors and for failed verification.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, linalg
from . import factorization as fz
from . import membership as mb
from . import serialize as sz
from .errors import OsconeError
from .opsys import builtin_system, resolve_system, system_ref, system_to_dict
from .tensor import TensorElement, decompose_as_schur

EXIT_OK, EXIT_ERROR, EXIT_UNKNOWN = 0, 1, 2
BUILTIN_ELEMENTS = ("unit", "max-entangled")


def default_tol() -> float:
    env = os.environ.get("OSCONE_TOL")
    if env is None:
        return mb.DEFAULT_TOL
    tol = float(env)
    if tol <= 0:
        raise ValueError("OSCONE_TOL must be positive")
    return tol


def _positive(kind):
    def parse(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text}")
        return v

    return parse


def _nonnegative_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def dumps(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2)


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(_jsonable(obj), sort_keys=True).encode()).hexdigest()


# -- inputs ---------------------------------------------------------------------


def load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise OsconeError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise OsconeError(f"{path}: {exc.strerror}") from None


def builtin_element(name: str, left, right, scale: float = 1.0) -> TensorElement:
    if name == "unit":
        return TensorElement.unit(left, right) * scale
    if name == "max-entangled":
        d = left.ambient_dim
        if right.ambient_dim != d:
            raise OsconeError("max-entangled needs factors of equal matrix size")
        r = np.zeros((d, d, d, d), dtype=complex)
        for i in range(d):
            for j in range(d):
                r[i, i, j, j] = 1.0
        return TensorElement.from_realization(left, right, r.reshape(d * d, d * d)) * scale
    raise OsconeError(f"unknown built-in element {name!r}; choose from {', '.join(BUILTIN_ELEMENTS)}")


def _system_arg(text: str):
    if text.endswith(".json"):
        return resolve_system(load_json(text))
    try:
        return builtin_system(text)
    except KeyError as exc:
        raise OsconeError(str(exc)) from None


def element_inputs(args) -> list[tuple[TensorElement, dict]]:
    """Elements named by ``--input`` (one or more files) or ``--element``."""
    out = []
    if args.input:
        for path in args.input:
            obj = load_json(path)
            out.append((sz.element_from_dict(obj, path), {"path": path, "sha256": _digest(obj)}))
        return out
    left, right = _system_arg(args.left), _system_arg(args.right)
    u = builtin_element(args.element, left, right, args.scale)
    desc = {"element": args.element, "scale": args.scale, "left": system_ref(left), "right": system_ref(right)}
    return [(u, {"builtin": desc, "sha256": _digest(desc)})]


# -- commands -------------------------------------------------------------------


def _report(command: str, params: dict, inputs, body: dict) -> dict:
    rep = {"command": command, "version": __version__, "params": params, "inputs": inputs}
    rep.update(body)
    return rep


def _verdict_body(v) -> dict:
    return {"verdict": v.status.value, "certificates": [], "witnesses": [], "diagnostics": dict(v.diagnostics)}


def run_membership(u: TensorElement, p: dict) -> tuple[dict, int]:
    tol = p["tol"]
    if p["cone"] == "min":
        v = mb.min_cone_membership(u, tol=tol)
        body = _verdict_body(v)
        if v.is_member:
            body["certificates"].append(sz.min_certificate_to_dict(u, v.certificate, tol))
        else:
            body["witnesses"].append(sz.witness_to_dict(v.witness, tol))
    else:
        v = mb.max_cone_membership_level(u, eps=p["eps"], k_max=p["kmax"], tol=tol, seed=p["seed"])
        body = _verdict_body(v)
        if v.is_member:
            body["certificates"].append(sz.certificate_to_dict(v.certificate, tol))
        elif v.is_nonmember:
            body["witnesses"].append(sz.witness_to_dict(v.witness, tol))
    body["element"] = sz.element_to_dict(u)
    return body, EXIT_UNKNOWN if v.is_unknown else EXIT_OK


def run_norm(u: TensorElement, p: dict) -> tuple[dict, int]:
    b = mb.osy_max_norm(u, tol=p["norm_tol"], k_max=p["kmax"], seed=p["seed"])
    body = {"lo": b.lo, "hi": b.hi, "certificates": [], "witnesses": [], "diagnostics": dict(b.diagnostics)}
    inner_tol = min(mb.DEFAULT_TOL, b.diagnostics["eps"] / 4)
    if b.upper_certificate is not None:
        body["certificates"].append(sz.certificate_to_dict(b.upper_certificate, inner_tol))
    if b.lower_witness is not None:
        body["witnesses"].append(sz.witness_to_dict(b.lower_witness, inner_tol))
    body["element"] = sz.element_to_dict(u)
    return body, EXIT_OK if b.diagnostics.get("bracket_met") else EXIT_UNKNOWN


def run_factorize(u: TensorElement, p: dict) -> tuple[dict, int]:
    try:
        pair = fz.factor_through_matrices(u, eps=p["eps"], k_max=p["kmax"], tol=p["tol"], seed=p["seed"])
    except OsconeError as exc:
        if type(exc).__name__ == "NotInMaxCone":
            return {"verdict": "Unknown", "diagnostics": {"reason": str(exc)}, "certificates": []}, EXIT_UNKNOWN
        raise
    entry = sz.pair_to_dict(pair, p["tol"])
    body = {
        "verdict": "Member",
        "k": pair.k,
        "epsilon": pair.epsilon,
        "composition_error_on_dual_basis": entry["composition_error_on_dual_basis"],
        "certificate": entry["certificate"],
        "certificates": [entry],
        "diagnostics": {"amplification": pair.amplification, "residual": pair.residual},
        "element": sz.element_to_dict(u),
    }
    return body, EXIT_OK


def run_schur(u: TensorElement, p: dict) -> tuple[dict, int]:
    dec = decompose_as_schur(u)
    return {
        "k": dec.k,
        "A": linalg.matrix_to_literal(dec.A),
        "B": linalg.matrix_to_literal(dec.B),
        "X": sz.matrix_to_dict(dec.X),
        "Y": sz.matrix_to_dict(dec.Y),
        "residual": dec.assemble().distance(u),
        "element": sz.element_to_dict(u),
    }, EXIT_OK


def run_realize(u: TensorElement, p: dict) -> tuple[dict, int]:
    r = u.realize()
    return {
        "realization": linalg.matrix_to_literal(r),
        "min_eigenvalue": linalg.min_eigenvalue(r) if u.is_hermitian(p["tol"]) else None,
        "element": sz.element_to_dict(u),
    }, EXIT_OK


ELEMENT_COMMANDS = {
    "membership": run_membership,
    "norm": run_norm,
    "factorize": run_factorize,
    "schur": run_schur,
    "realize": run_realize,
}


def _run_one(command: str, element_obj: dict, params: dict) -> tuple[dict, int]:
    """Worker entry point; elements travel as JSON dicts."""
    u = sz.element_from_dict(element_obj)
    return ELEMENT_COMMANDS[command](u, params)


def cmd_elements(args, params) -> tuple[dict, int]:
    items = element_inputs(args)
    jobs = [(args.command, sz.element_to_dict(u), params) for u, _ in items]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_run_one, *zip(*jobs)))
    else:
        results = [_run_one(*j) for j in jobs]
    inputs = [meta for _, meta in items]
    if len(results) == 1:
        body, code = results[0]
        return _report(args.command, params, inputs, body), code
    codes = [c for _, c in results]
    code = EXIT_ERROR if EXIT_ERROR in codes else EXIT_UNKNOWN if EXIT_UNKNOWN in codes else EXIT_OK
    return _report(args.command, params, inputs, {"results": [b for b, _ in results]}), code


def cmd_define(args, params) -> tuple[dict, int]:
    S = _system_arg(args.system)
    body = {"system": system_to_dict(S), "dim": S.dim, "ambient_dim": S.ambient_dim}
    return _report("define", params, [{"system": args.system, "sha256": _digest(system_to_dict(S))}], body), EXIT_OK


def cmd_nuclearity(args, params) -> tuple[dict, int]:
    T = _system_arg(args.system)
    v = fz.nuclearity_test(T, eps=params["eps"], k_max=params["kmax"], tol=params["tol"], seed=params["seed"])
    body = {"verdict": v.status.value, "certificates": [], "diagnostics": dict(v.diagnostics)}
    if v.is_member:
        body["certificates"].append(sz.pair_to_dict(v.certificate, params["tol"]))
        body["cpap"] = {"k": v.certificate.k, "epsilon": v.certificate.epsilon}
    inputs = [{"system": args.system, "sha256": _digest(system_to_dict(T))}]
    return _report("nuclearity", params, inputs, body), EXIT_OK if v.is_member else EXIT_UNKNOWN


def verify_report(report: dict) -> tuple[bool, list]:
    """Re-check every certificate and witness in a report (recursing into batches)."""
    details = []
    ok = True
    blocks = report.get("results", [report])
    for bi, block in enumerate(blocks):
        for key in ("certificates", "witnesses"):
            for i, entry in enumerate(block.get(key, [])):
                where = f"results[{bi}].{key}[{i}]" if "results" in report else f"{key}[{i}]"
                passed, info = sz.check_entry(entry, where)
                ok = ok and passed
                details.append({"entry": where, "passed": passed, **info})
    return ok, details


def cmd_verify(args, params) -> tuple[dict, int]:
    report = load_json(args.report)
    ok, details = verify_report(report)
    body = {"verified": ok, "checks": details}
    inputs = [{"path": args.report, "sha256": _digest(report)}]
    return _report("verify", {}, inputs, body), EXIT_OK if ok else EXIT_ERROR


# -- parser ---------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors, so they exit 1 rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--eps", type=_positive(float), default=mb.DEFAULT_EPS)
    common.add_argument("--tol", type=_positive(float), default=None,
                        help="default from OSCONE_TOL or 1e-6")
    common.add_argument("--kmax", type=_positive(int), default=None)
    common.add_argument("--seed", type=_nonnegative_int, default=0)
    common.add_argument("--jobs", type=_positive(int), default=1)

    elem = _Parser(add_help=False)
    elem.add_argument("--input", action="append", help="tensor element JSON file (repeatable)")
    elem.add_argument("--element", choices=BUILTIN_ELEMENTS, default="unit")
    elem.add_argument("--scale", type=float, default=1.0)
    elem.add_argument("--left", default="Mn:2")
    elem.add_argument("--right", default="Mn:2")

    p = _Parser(prog="oscone", description="Tensor cones of finite-dimensional operator systems.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("define", parents=[common], help="print a system's basis")
    d.add_argument("system")
    sub.add_parser("realize", parents=[common, elem], help="spatial realization of an element")
    sub.add_parser("schur", parents=[common, elem], help="Schur decomposition of an element")
    m = sub.add_parser("membership", parents=[common, elem], help="cone membership with certificate")
    m.add_argument("--cone", choices=("min", "max"), required=True)
    n = sub.add_parser("norm", parents=[common, elem], help="bracket the maximal operator system norm")
    n.add_argument("--norm-tol", type=_positive(float), default=1e-4)
    sub.add_parser("factorize", parents=[common, elem], help="factorization through matrix algebras")
    nu = sub.add_parser("nuclearity", parents=[common], help="search for an identity factorization")
    nu.add_argument("system")
    v = sub.add_parser("verify", parents=[common], help="re-check a report offline")
    v.add_argument("report")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        tol = args.tol if args.tol is not None else default_tol()
        params = {"eps": args.eps, "tol": tol, "kmax": args.kmax, "seed": args.seed}
        if args.command == "membership":
            params["cone"] = args.cone
        if args.command == "norm":
            params["norm_tol"] = args.norm_tol
        if args.command == "define":
            report, code = cmd_define(args, params)
        elif args.command == "nuclearity":
            report, code = cmd_nuclearity(args, params)
        elif args.command == "verify":
            report, code = cmd_verify(args, params)
        else:
            report, code = cmd_elements(args, params)
    except (OsconeError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        print(dumps({"command": args.command, "error": msg, "version": __version__}))
        print(f"oscone: error: {msg}", file=sys.stderr)
        return EXIT_ERROR
    report["wall_time"] = time.perf_counter() - t0
    print(dumps(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
