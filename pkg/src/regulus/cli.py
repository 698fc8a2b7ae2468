"""Batch command-line front end.

Reads a JSON system file, dispatches one operation per subcommand, and prints
a JSON report on stdout.  Exit codes: 0 success, 1 domain error (reported as
a JSON error object, never a stack trace), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from fractions import Fraction

from . import closure
from .control import term_control, term_evaluator, verify_control
from .engine import EngineOptions, regularize
from .numeric import DEFAULTS, Box, find_zero, flat_probe
from .terms import Scalar, Term, TermError, parse, partial, to_source
from .witness import FunctionSystem, grad, is_regular_at, jacobian, q_witness

COMMANDS = ("diff", "grad", "jac", "qwitness", "augment", "verify-regular",
            "find-zero", "regularize", "control", "verify-control",
            "flat-probe")


class CliError(Exception):
    """Domain-level failure carrying a kind tag for the JSON error object."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def _scalar_to_json(v: Scalar):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else str(v)
    return float(v)


def _parse_scalar(text: str) -> Scalar:
    text = text.strip()
    if "/" in text:
        return Fraction(text)
    try:
        return Fraction(int(text))
    except ValueError:
        return float(text)


def _parse_point(text: str):
    return tuple(_parse_scalar(part) for part in text.split(","))


def _parse_box(text: str, n: int) -> Box:
    pairs = text.split(",")
    if len(pairs) == 1:
        pairs = pairs * n
    if len(pairs) != n:
        raise CliError("usage", f"--box needs 1 or {n} lo:hi pairs")
    lows, highs = [], []
    for pair in pairs:
        try:
            lo, hi = pair.split(":")
            lows.append(float(lo))
            highs.append(float(hi))
        except ValueError:
            raise CliError("usage", f"bad box interval {pair!r}") from None
    return Box(tuple(lows), tuple(highs))


def _load_system_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CliError("io", f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError("format", f"{path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict) or "n" not in data:
        raise CliError("format", f"{path} must be an object with a field 'n'")
    return data


def _parse_term(source: str) -> Term:
    try:
        return parse(source)
    except TermError as exc:
        raise CliError("parse", str(exc)) from None


def _system_from_file(data: dict) -> FunctionSystem:
    sources = data.get("functions") or []
    if not sources:
        raise CliError("format", "system file has no functions")
    n = int(data["n"])
    return FunctionSystem(n, tuple(_parse_term(s) for s in sources))


def _function_by_index(system: FunctionSystem, index: int) -> Term:
    if not (1 <= index <= system.size):
        raise CliError("usage",
                       f"--fn {index} out of range 1..{system.size}")
    return system.functions[index - 1]


def _tolerances(args, file_options: dict) -> dict:
    out = {
        "tol_res": DEFAULTS.tol_res,
        "tol_reg": DEFAULTS.tol_reg,
        "tol_nonflat": DEFAULTS.tol_nonflat,
        "max_order": 8,
    }
    for key in out:
        if key in file_options:
            out[key] = file_options[key]
    if args.tol_res is not None:
        out["tol_res"] = args.tol_res
    if args.tol_reg is not None:
        out["tol_reg"] = args.tol_reg
    if getattr(args, "tol_nonflat", None) is not None:
        out["tol_nonflat"] = args.tol_nonflat
    if args.max_order is not None:
        out["max_order"] = args.max_order
    return out


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("REGULUS_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError("usage", f"REGULUS_SEED is not an integer: {env!r}")
    return 0


def _sample_points(box: Box, count: int, seed: int):
    rng = random.Random(seed)
    return [tuple(rng.uniform(lo, hi)
                  for lo, hi in zip(box.lower, box.upper))
            for _ in range(count)]


# ---------------------------------------------------------------------------
# Command handlers: each returns the "result" object for the report
# ---------------------------------------------------------------------------


def _cmd_diff(args, data, system):
    f = _function_by_index(system, args.fn)
    return {"term": to_source(partial(f, args.wrt))}


def _cmd_grad(args, data, system):
    f = _function_by_index(system, args.fn)
    return {"terms": [to_source(g) for g in grad(f, system.dim)]}


def _cmd_jac(args, data, system):
    return {"rows": [[to_source(entry) for entry in row]
                     for row in jacobian(system)]}


def _cmd_qwitness(args, data, system):
    return {"term": to_source(q_witness(system))}


def _cmd_augment(args, data, system):
    bigger = closure.augment(system)
    return {"n": bigger.dim,
            "functions": [to_source(f) for f in bigger.functions]}


def _cmd_verify_regular(args, data, system, tols):
    if args.point is None:
        raise CliError("usage", "verify-regular needs --point")
    point = _parse_point(args.point)
    verdict = is_regular_at(system, point, tol_res=tols["tol_res"],
                            tol_reg=tols["tol_reg"])
    return {
        "regular": verdict.regular,
        "residual": _scalar_to_json(verdict.residual),
        "witness_value": _scalar_to_json(verdict.witness_value),
        "tol_res": float(verdict.tol_res),
        "tol_reg": float(verdict.tol_reg),
    }


def _cmd_find_zero(args, data, system, tols):
    f = _target_term(args, data, system)
    box = _box_for(args, data, system.dim)
    zeros = find_zero(f, box, args.grid or 9, tol=tols["tol_res"])
    return {"zeros": [list(z) for z in zeros]}


def _target_term(args, data, system) -> Term:
    if getattr(args, "target", None):
        return _parse_term(args.target)
    if data.get("target"):
        return _parse_term(data["target"])
    if system is not None and system.size == 1:
        return system.functions[0]
    raise CliError("usage", "no target: pass --target or put one in the file")


def _box_for(args, data, n: int) -> Box:
    if getattr(args, "box", None):
        return _parse_box(args.box, n)
    opts = data.get("options") or {}
    if "box" in opts:
        return _parse_box(opts["box"], n)
    return Box.cube(n, 2.0)


def _cmd_regularize(args, data, tols):
    n = int(data["n"])
    f = None
    if getattr(args, "target", None):
        f = _parse_term(args.target)
    elif data.get("target"):
        f = _parse_term(data["target"])
    elif data.get("functions"):
        f = _parse_term(data["functions"][0])
    if f is None:
        raise CliError("usage", "regularize needs a target function")
    box = _box_for(args, data, n)
    half = max(abs(v) for v in box.lower + box.upper)
    options = EngineOptions(
        max_order=tols["max_order"],
        tol_res=tols["tol_res"],
        tol_reg=tols["tol_reg"],
        tol_nonflat=tols["tol_nonflat"],
        box_half_width=half,
        grid_per_dim=args.grid or 9,
        seed=_seed(args),
    )
    result = regularize(f, n, options)
    return result.to_json_dict()


def _cmd_control(args, data, system):
    f = _target_term(args, data, system) if args.fn is None \
        else _function_by_index(system, args.fn)
    order = args.order if args.order is not None else 4
    cert = term_control(f, system.dim, order_cap=order)
    omega = cert.omega
    return {
        "omega": to_source(omega) if isinstance(omega, Term) else "<callable>",
        "coefficients": [_scalar_to_json(c) for c in cert.coeffs],
        "exponents": list(cert.exps),
    }


def _cmd_verify_control(args, data, system, tols):
    f = _target_term(args, data, system) if args.fn is None \
        else _function_by_index(system, args.fn)
    order = args.order if args.order is not None else 4
    count = args.samples if args.samples is not None else 100
    box = _box_for(args, data, system.dim)
    cert = term_control(f, system.dim, order_cap=order)
    samples = _sample_points(box, count, _seed(args))
    report = verify_control(term_evaluator(f), cert, samples, order,
                            system.dim)
    return report.to_json_dict()


def _cmd_flat_probe(args, data, system, tols):
    f = _target_term(args, data, system) if args.fn is None \
        else _function_by_index(system, args.fn)
    if args.point is None:
        raise CliError("usage", "flat-probe needs --point")
    point = _parse_point(args.point)
    order = args.order if args.order is not None else 6
    flat = flat_probe(f, point, order, tol=tols["tol_nonflat"])
    return {"flat": flat, "order": order,
            "tol": float(tols["tol_nonflat"])}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regulus",
        description="Symbolic-numeric toolkit for regular zero sets")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("system_file", help="JSON system file")
        p.add_argument("--target", help="target function (term grammar)")
        p.add_argument("--tol-res", dest="tol_res", type=float)
        p.add_argument("--tol-reg", dest="tol_reg", type=float)
        p.add_argument("--tol-nonflat", dest="tol_nonflat", type=float)
        p.add_argument("--max-order", dest="max_order", type=int)
        p.add_argument("--box", help="lo:hi[,lo:hi...]")
        p.add_argument("--grid", type=int)
        p.add_argument("--order", type=int, help="derivative order cap")
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--fn", type=int, help="1-based function index")
        p.add_argument("--wrt", type=int, help="1-based variable index")
        p.add_argument("--point", help="comma-separated coordinates")
    return parser


def run(argv) -> tuple[int, dict]:
    """Dispatch a parsed command line; returns (exit code, report object)."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    echoed = {"system_file": args.system_file}
    for key in ("target", "fn", "wrt", "point", "box", "grid", "order",
                "samples", "seed", "tol_res", "tol_reg", "tol_nonflat",
                "max_order"):
        value = getattr(args, key, None)
        if value is not None:
            echoed[key.replace("_", "-")] = value
    report = {"command": args.command, "inputs": echoed}
    try:
        data = _load_system_file(args.system_file)
        file_options = data.get("options") or {}
        tols = _tolerances(args, file_options)
        system = None
        if data.get("functions"):
            try:
                system = _system_from_file(data)
            except CliError:
                raise
        if args.command == "diff":
            if args.fn is None or args.wrt is None:
                raise CliError("usage", "diff needs --fn and --wrt")
            result = _cmd_diff(args, data, _need_system(system))
        elif args.command == "grad":
            if args.fn is None:
                raise CliError("usage", "grad needs --fn")
            result = _cmd_grad(args, data, _need_system(system))
        elif args.command == "jac":
            result = _cmd_jac(args, data, _need_system(system))
        elif args.command == "qwitness":
            result = _cmd_qwitness(args, data, _need_system(system))
        elif args.command == "augment":
            result = _cmd_augment(args, data, _need_system(system))
        elif args.command == "verify-regular":
            result = _cmd_verify_regular(args, data, _need_system(system), tols)
        elif args.command == "find-zero":
            result = _cmd_find_zero(args, data, system, tols)
        elif args.command == "regularize":
            result = _cmd_regularize(args, data, tols)
        elif args.command == "control":
            result = _cmd_control(args, data, _need_system_or_target(args, data, system))
        elif args.command == "verify-control":
            result = _cmd_verify_control(
                args, data, _need_system_or_target(args, data, system), tols)
        else:
            assert args.command == "flat-probe"
            result = _cmd_flat_probe(
                args, data, _need_system_or_target(args, data, system), tols)
    except CliError as exc:
        report["error"] = {"kind": exc.kind, "message": str(exc)}
        code = 2 if exc.kind == "usage" else 1
        return code, report
    except Exception as exc:  # domain errors from the library
        report["error"] = {"kind": type(exc).__name__, "message": str(exc)}
        partial_trace = getattr(exc, "trace", ())
        if partial_trace:
            report["error"]["trace"] = [dict(r) for r in partial_trace]
        return 1, report
    report["result"] = result
    return 0, report


def _need_system(system):
    if system is None:
        raise CliError("format", "this command needs 'functions' in the file")
    return system


def _need_system_or_target(args, data, system):
    if system is not None:
        return system
    # Allow target-only files for control / flat-probe style commands.
    n = int(data["n"])
    f = _target_term(args, data, None)
    return FunctionSystem(n, (f,))


def main(argv=None) -> int:
    code, report = run(sys.argv[1:] if argv is None else argv)
    sys.stdout.write(json.dumps(report, indent=2, sort_keys=False) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
