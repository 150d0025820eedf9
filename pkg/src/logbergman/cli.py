"""Command-line entry point: ``logbergman <command> ...``.

Commands write CSV or JSON atomically (temp file + rename).  Exit codes:
0 success, 1 invalid input or I/O failure, 2 a ``check`` failed under --strict.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import asymptotics as asy
from .exceptions import LogBergmanError
from .geometry import LinearSubvariety, _unit, distance_to_subvariety, point_at_distance
from .kernels import dim_sections, ratio_rho, remainder_Rk, sandwich_check
from .sections import build_basis, extension_norm, restriction_operator, split_by_subvariety
from .zeros_mc import EnsembleSpec, default_threads, empirical_density

SCHEMA_VERSION = asy.SCHEMA_VERSION
CHECKS = ("main1", "main2", "cor1", "cor2", "sandwich", "restriction", "spanning")


class UsageError(Exception):
    """Bad flags or input files; reported on stderr with exit code 1."""


# -- formatting and I/O ---------------------------------------------------------


def fmt(x) -> str:
    return format(float(x), ".17g")


def _write_atomic(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    target = Path(path)
    directory = target.parent if str(target.parent) else Path(".")
    if not directory.is_dir():
        raise UsageError(f"output directory does not exist: {directory}")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _json_text(payload: dict) -> str:
    # json writes floats with repr, which round-trips like '.17g'
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    return json.dumps(asy._jsonable(payload), indent=2) + "\n"


# -- argument helpers -------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0 or math.isinf(v):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {v}")
    return v


def _int_list(text: str) -> list:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("k values must be positive")
    return vals


def _grid(text: str) -> np.ndarray:
    """'start,stop,count' -> linspace."""
    try:
        a, b, n = text.split(",")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be start,stop,count: {text!r}")
    if n < 1 or b < a:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}")
    return np.linspace(a, b, n)


def _load_subvariety(args) -> LinearSubvariety:
    path = getattr(args, "subvariety", None)
    if path is None:
        codim = getattr(args, "codim", None) or 1
        if codim > args.N:
            raise UsageError(f"--codim {codim} exceeds --N {args.N}")
        return LinearSubvariety.coordinate_model(args.N, codim)
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"subvariety file not found: {path}")
    try:
        V = LinearSubvariety.load(p)
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"malformed subvariety file {path}: {exc}")
    if V.N != args.N:
        raise UsageError(f"subvariety in {path} lives in CP^{V.N}, but --N is {args.N}")
    return V


def _threads(args) -> int:
    return args.threads if getattr(args, "threads", None) else default_threads()


# -- commands -----------------------------------------------------------------------


def cmd_kernel(args) -> int:
    V = _load_subvariety(args)
    N, k = args.N, args.k
    Nk = float(dim_sections(N, k))
    rng = np.random.default_rng(args.seed)
    pts = _unit(point_at_distance(V, args.r_grid, rng))
    header = [f"z{i}_{part}" for i in range(N + 1) for part in ("re", "im")]
    header += ["r", "rho_k", "rho_kV", "ratio", "remainder_Rk", "P_k_to_nearest", "upper", "lower"]
    rows = []
    for Z in pts:
        r = float(distance_to_subvariety(Z, V))
        ratio = float(ratio_rho(N, k, V, Z))
        rem = float(remainder_Rk(N, k, V, Z)) if np.sin(r) >= 1e-10 else math.nan
        sw = sandwich_check(N, k, V, Z, C=args.beta_C)
        P = math.sqrt(max(0.0, 1.0 - sw.upper))
        coords = [float(c) for z in Z for c in (z.real, z.imag)]
        rows.append(coords + [r, Nk, Nk * ratio, ratio, rem, P, sw.upper, sw.lower])
    _write_atomic(args.out, _csv_text(header, rows))
    return 0


def cmd_restriction(args) -> int:
    V = _load_subvariety(args)
    op = restriction_operator(split_by_subvariety(build_basis(args.N, args.k), V))
    payload = {"N": args.N, "k": args.k, "codim": V.codim,
               "sigmas": op.singular_values.tolist(), "extension_norm": extension_norm(op),
               "restriction_norm_sq": op.sigma_max_sq, "dim_perp": op.dim_perp}
    _write_atomic(args.out, _json_text(payload))
    return 0


def _ensemble_V(args):
    if args.subvariety is None:
        return ((1.0, 0.0),)
    args.N = 1
    return _load_subvariety(args)


def cmd_zeros_sample(args) -> int:
    spec = EnsembleSpec(k=args.k, V=_ensemble_V(args), trials=args.trials, master_seed=args.seed)
    m = empirical_density(spec, threads=_threads(args))
    rows = [[float(a), float(b), float(c), float(e)]
            for a, b, c, e in zip(m.bin_edges[:-1], m.bin_edges[1:], m.counts, m.stderr)]
    _write_atomic(args.out, _csv_text(["u_lo", "u_hi", "mean_count", "stderr"], rows))
    return 0


def cmd_zeros_compare(args) -> int:
    spec = EnsembleSpec(k=args.k, V=_ensemble_V(args), trials=args.trials, master_seed=args.seed)
    m = empirical_density(spec, threads=_threads(args))
    rep = asy.compare_empirical(m)
    _write_atomic(args.out, _json_text(rep.to_dict()))
    return 2 if args.strict and not rep.passed else 0


def run_check(name: str, args) -> asy.CheckReport:
    N = args.N
    V = _load_subvariety(args) if name != "cor2" else None
    ks = args.k_list
    if name == "main1":
        return asy.check_main1(N, ks or (16, 64, 256, 1024), V, seed=args.seed)
    if name == "main2":
        return asy.check_main2(N, ks or (64, 128, 256, 512, 1024), V, seed=args.seed)
    if name == "cor1":
        return asy.check_cor1(N, ks or (64, 256, 1024), V, seed=args.seed)
    if name == "cor2":
        return asy.check_cor2(k=(ks or [400])[-1])
    if name == "sandwich":
        return asy.check_sandwich(N, ks or (10, 100), V, C=args.beta_C, seed=args.seed)
    if name == "restriction":
        return asy.check_restriction(N, V, ks or (16, 32, 64, 128, 256, 512))
    if name == "spanning":
        return asy.check_spanning(N, (ks or [4])[-1], V, seed=args.seed)
    raise UsageError(f"unknown check {name!r}")


def cmd_check(args) -> int:
    rep = run_check(args.name, args)
    _write_atomic(args.out, _json_text(rep.to_dict()))
    return 2 if args.strict and not rep.passed else 0


def cmd_scaling_limit(args) -> int:
    k = args.k
    u = args.u_grid
    lim = asy.scaling_limit_density(u)
    resc = asy.rescaled_conditional_density(k, u)
    t = np.tan(u / math.sqrt(k)) ** 2
    raw = asy.conditional_raw_density(k, t) * (1 + t) ** 2 / k
    rows = [[float(a), float(b), float(c), float(d), float(abs(c - b) / b)]
            for a, b, c, d in zip(u, lim, resc, raw)]
    header = ["u", "limit_density", "rescaled_density", "rescaled_density_raw", "relative_gap"]
    _write_atomic(args.out, _csv_text(header, rows))
    return 0


def cmd_report(args) -> int:
    checks = {}
    ok = True
    saved = args.k_list
    for name in CHECKS:
        args.k_list = saved if name in ("main1", "main2", "cor1") else None
        if name in ("spanning",) and args.N < 2:
            continue
        rep = run_check(name, args)
        checks[name] = rep.to_dict()
        ok &= rep.passed
    k = args.k
    prof = asy.conditional_density(k)
    density = {
        "k": k,
        "normalized": {"smooth_mass": prof.smooth_mass, "delta_mass": prof.delta_mass_at_zero,
                       "total_mass": prof.total_mass,
                       "density_at_0": float(asy.conditional_smooth_density(k, 0.0))},
        "raw": {"smooth_mass": prof.raw_smooth_mass, "total_mass": prof.raw_smooth_mass + 1.0,
                "density_at_0": float(asy.conditional_raw_density(k, 0.0))},
    }
    _write_atomic(args.out, _json_text({"N": args.N, "all_passed": ok, "checks": checks,
                                        "conditional_density": density}))
    return 2 if args.strict and not ok else 0


# -- parser --------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, k: bool = True) -> None:
    p.add_argument("--N", type=_positive_int, default=1, help="projective dimension")
    if k:
        p.add_argument("--k", type=_positive_int, default=20, help="line bundle power")
    p.add_argument("--subvariety", help="LinearSubvariety JSON file")
    p.add_argument("--codim", type=_positive_int, default=None,
                   help="codimension of the default coordinate subvariety")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logbergman", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", help="kernel values along a normal geodesic of V (CSV)")
    _common(p)
    p.add_argument("--r-grid", type=_grid, default=_grid("0,1.5,31"), help="start,stop,count")
    p.add_argument("--beta-C", type=_positive_float, default=1.0)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("restriction", help="restriction operator spectrum (JSON)")
    _common(p)
    p.set_defaults(func=cmd_restriction)

    p = sub.add_parser("zeros", help="Monte Carlo zeros of conditional sections on CP^1")
    zsub = p.add_subparsers(dest="zeros_command", required=True)
    for name, func in (("sample", cmd_zeros_sample), ("compare", cmd_zeros_compare)):
        q = zsub.add_parser(name)
        _common(q)
        q.add_argument("--trials", type=_positive_int, default=1000)
        q.add_argument("--threads", type=_positive_int, default=None)
        q.add_argument("--strict", action="store_true")
        q.set_defaults(func=func)

    p = sub.add_parser("check", help="numerical check of an asymptotic statement (JSON)")
    p.add_argument("name", choices=CHECKS)
    _common(p, k=False)
    p.add_argument("--k-list", type=_int_list, default=None)
    p.add_argument("--beta-C", type=_positive_float, default=1.0)
    p.add_argument("--strict", action="store_true", help="exit 2 when the check fails")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("scaling-limit", help="rescaled density against the limit profile (CSV)")
    p.add_argument("--k", type=_positive_int, default=400)
    p.add_argument("--u-grid", type=_grid, default=_grid("0.1,3,59"))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_scaling_limit)

    p = sub.add_parser("report", help="run every check and aggregate (JSON)")
    _common(p)
    p.add_argument("--k-list", type=_int_list, default=None)
    p.add_argument("--beta-C", type=_positive_float, default=1.0)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, LogBergmanError, OverflowError, OSError, ValueError) as exc:
        print(f"logbergman: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
