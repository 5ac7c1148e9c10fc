"""Command-line interface: ``breadthone {msb1,refine,verify} SYSTEM [POINT]``.

Exit codes: 0 success, 1 usage or input error, 2 the root is not breadth
one, 3 refinement or verification failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from fractions import Fraction
from importlib import metadata
from pathlib import Path
from typing import Sequence

import numpy as np

from .dualspace import DEFAULT_MAX_MU, DEFAULT_TOL, construct_dual_basis, msb1
from .errors import (BreadthNotOne, BreadthOneError, MultiplicityCapExceeded, ParseError,
                     RefinementError, VerificationFailure)
from .pipeline import certify, refine_point
from .poly import PolySystem, parse_system
from .refine import DEFAULT_ITERS
from .verify import INFLATE_EPS, MAX_INFLATE

EXIT_OK, EXIT_USAGE, EXIT_BREADTH, EXIT_FAILED = 0, 1, 2, 3
REGULAR_MESSAGE = "root is regular; use plain verification"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which we reserve
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# -- input ------------------------------------------------------------------------

def parse_point(text: str, exact: bool = False) -> list:
    """Whitespace/comma separated numbers; ``a+bj`` gives complex entries."""
    tokens = text.replace(",", " ").split()
    out = []
    for tok in tokens:
        try:
            if "j" in tok:
                out.append(complex(tok))
            elif exact:
                out.append(Fraction(tok))
            else:
                out.append(float(tok))
        except ValueError as exc:
            raise ParseError(f"bad coordinate {tok!r} in point") from exc
    if exact and any(isinstance(v, complex) for v in out):
        raise ParseError("--exact needs rational coordinates")
    return out


def _load(args) -> tuple[PolySystem, list, str]:
    raw = Path(args.system).read_bytes()
    F = parse_system(raw.decode("utf-8"))
    if args.point is not None and args.point_file is not None:
        raise ParseError("give the point either inline (--point) or as a file, not both")
    if args.point is not None:
        text = args.point
    elif args.point_file is not None:
        text = Path(args.point_file).read_text()
    else:
        raise ParseError("a point is required (POINT file or --point)")
    x = parse_point(text, exact=getattr(args, "exact", False))
    if len(x) != F.nvars:
        raise ParseError(f"point has {len(x)} coordinates, system has {F.nvars} variables")
    return F, x, hashlib.sha256(raw).hexdigest()


# -- formatting -------------------------------------------------------------------

def _num(v):
    """JSON-friendly scalar; floats keep ``repr`` precision (exact round trip)."""
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else v.numerator
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    return str(v)


def _text(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _vec(a) -> str:
    return "(" + ", ".join(_text(v) for v in a) + ")"


def _box(I) -> list[list[float]]:
    return [[float(lo), float(hi)] for lo, hi in zip(I.lo, I.hi)]


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


# -- commands -----------------------------------------------------------------------

def cmd_msb1(args) -> int:
    F, x, _ = _load(args)
    ms = msb1(F, x, tol=args.tol, max_mu=args.max_mu, exact=args.exact)
    names = F.names
    if ms.mu == 1:
        if args.json:
            _emit({"mu": 1, "regular": True, "message": REGULAR_MESSAGE}, args.out)
        else:
            print("mu = 1")
            print(REGULAR_MESSAGE)
        return EXIT_OK
    basis = construct_dual_basis(ms) if args.basis else None
    if args.json:
        payload = {
            "mu": ms.mu,
            "t": ms.t + 1,
            "exchanged_variable": names[ms.t],
            "a": [[_num(v) for v in a] for a in ms.a_vecs],
            "exact": ms.exact,
        }
        if basis is not None:
            payload["basis"] = [lam.to_string() for lam in basis.lambdas]
        _emit(payload, args.out)
        return EXIT_OK
    print(f"mu = {ms.mu}")
    print(f"t = {ms.t + 1} (exchanged variable {names[ms.t]})")
    for k, a in enumerate(ms.a_vecs, start=2):
        print(f"a_{k} = {_vec(a)}")
    if basis is not None:
        print("dual basis (d_i differentiates in " + ", ".join(names) + "):")
        for k, lam in enumerate(basis.lambdas, start=1):
            print(f"  L{k} = {lam.to_string()}")
    return EXIT_OK


def cmd_refine(args) -> int:
    F, x, _ = _load(args)
    state, ms = refine_point(F, x, tol=args.tol, iters=args.iters, mu=args.mu)
    if args.json:
        _emit({
            "mu": state.mu,
            "mu_confirmed": ms.mu,
            "t": state.t + 1,
            "x": [_num(v) for v in state.x],
            "a": [[_num(v) for v in a] for a in state.a_vecs],
            "residual_history": [float(r) for r in state.history],
            "sweeps": state.iteration,
        }, args.out)
        return EXIT_OK
    print(f"mu = {state.mu} (confirmed at refined point: {ms.mu})")
    print(f"sweeps = {state.iteration}")
    print("residual history: " + ", ".join(f"{r:.3e}" for r in state.history))
    print("x = " + _vec(state.x))
    for k, a in enumerate(state.a_vecs, start=2):
        print(f"a_{k} = {_vec(a)}")
    return EXIT_OK


def cmd_verify(args) -> int:
    F, x, digest = _load(args)
    options = {
        "tol": args.tol, "iters": args.iters, "mu": args.mu,
        "inflate_eps": args.inflate_eps, "max_inflate": args.max_inflate,
    }
    payload: dict = {"system_hash": digest, "tool_version": tool_version(), "options": options}
    try:
        res = certify(F, x, tol=args.tol, iters=args.iters, mu=args.mu,
                      inflate_eps=args.inflate_eps, max_inflate=args.max_inflate)
    except (RefinementError, VerificationFailure, MultiplicityCapExceeded) as exc:
        stage = getattr(exc, "stage", "refine" if isinstance(exc, RefinementError) else "msb1")
        payload.update(verified=False, failure_reason=str(exc), stage=stage)
        _emit(payload, args.out)
        return EXIT_FAILED
    payload["mu"] = res.mu
    payload["timings"] = {k: round(v, 6) for k, v in res.timings.items()}
    if res.certificate is None:
        box = res.regular.box
        payload.update(verified=True, regular=True, message=REGULAR_MESSAGE,
                       X=_box(box), B=[], A=[], pivot=None,
                       residual=res.regular.newton_residual,
                       iterations=res.regular.iterations)
    else:
        cert = res.certificate
        payload.update(
            verified=True,
            pivot={"row": cert.pivot.row + 1, "col": cert.pivot.col + 1},
            X=_box(cert.X), B=_box(cert.B), A=_box(cert.A),
            residual=cert.midpoint_residual(),
            iterations=cert.iterations_used,
            sigma_min=cert.sigma_min,
            max_width=cert.max_width(),
        )
    _emit(payload, args.out)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="breadthone", description="Multiplicity structure, refinement and "
                "verified inclusions for breadth-one singular roots of polynomial systems.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("system", help="system file ('vars:' line, then one 'f:' line per equation)")
        sp.add_argument("point_file", nargs="?", help="file with the point coordinates")
        sp.add_argument("--point", help='inline point, e.g. "1.0 2.0"')
        sp.add_argument("--tol", type=float, default=DEFAULT_TOL, help="corank/consistency tolerance")
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--out", help="write the output to this file")

    sp = sub.add_parser("msb1", help="multiplicity and dual-space parameters")
    common(sp)
    sp.add_argument("--exact", action="store_true", help="rational arithmetic, exact zero tests")
    sp.add_argument("--basis", action="store_true", help="also print the closed dual basis")
    sp.add_argument("--max-mu", type=int, default=DEFAULT_MAX_MU)
    sp.set_defaults(func=cmd_msb1)

    sp = sub.add_parser("refine", help="refine an approximate singular root")
    common(sp)
    sp.add_argument("--iters", type=int, default=DEFAULT_ITERS, help="maximum refinement sweeps")
    sp.add_argument("--mu", type=int, help="use this multiplicity instead of estimating it")
    sp.set_defaults(func=cmd_refine)

    sp = sub.add_parser("verify", help="refine and certify; prints a JSON certificate")
    common(sp)
    sp.add_argument("--iters", type=int, default=DEFAULT_ITERS)
    sp.add_argument("--mu", type=int)
    sp.add_argument("--inflate-eps", type=float, default=INFLATE_EPS)
    sp.add_argument("--max-inflate", type=int, default=MAX_INFLATE)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BreadthNotOne as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BREADTH
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RefinementError, VerificationFailure, MultiplicityCapExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (BreadthOneError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
