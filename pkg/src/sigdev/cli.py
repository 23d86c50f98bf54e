"""Command-line front end.

Exit codes: 0 success, 2 bad input or usage, 3 level cap / level insufficient,
4 series tail too large, 5 estimator failure or not an axis signature.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import (
    EmptyPath,
    InvalidPath,
    InvalidSignature,
    LevelCapExceeded,
    LevelInsufficient,
    NotAxisSignature,
    SigdevError,
    TailTooLarge,
)
from .hyperbolic import SweepRow, develop_exact, develop_from_signature, develop_ode_path, write_sweep_csv
from .inversion import (
    ESTIMATOR_FAILURE,
    InversionConfig,
    axis_invert,
    axis_path_to_dict,
    default_inversion_precision,
    invert_piecewise_linear,
)
from .numerics import required_precision
from .paths import (
    PiecewisePath,
    axis_to_piecewise,
    gen_alpha_beta,
    path_from_dict,
    random_axis_path,
    random_piecewise_path,
    save_path,
)
from .signature import signature_of_path
from .tensor import ts_exp_segment, ts_mul, is_unit, save_signature, signature_from_dict

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_LEVEL = 3
EXIT_TAIL = 4
EXIT_ESTIMATOR = 5


class InputError(Exception):
    pass


def parse_lambda_grid(text: str) -> list[float]:
    """'a:b:step' (inclusive of b), a comma list, or a single value."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(v) for v in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            a, b, step = parts
            if step <= 0 or b < a:
                raise ValueError
            n = int(math.floor((b - a) / step + 1e-9))
            return [a + k * step for k in range(n + 1)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"bad lambda grid {text!r}; expected a:b:step, a list, or a value") from None


def _read_json(file: str) -> dict:
    try:
        return json.loads(Path(file).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{file}: {exc}") from exc


def _load_path(file: str) -> PiecewisePath:
    return path_from_dict(_read_json(file))


def cmd_sig(args) -> int:
    path = _load_path(args.path_file)
    bits = args.precision_bits or default_inversion_precision(args.level)
    x = signature_of_path(path, args.level, bits)
    save_signature(x, args.out)
    return EXIT_OK


def cmd_develop(args) -> int:
    data = _read_json(args.input)
    is_sig = isinstance(data, dict) and "coeffs" in data
    grid = parse_lambda_grid(args.lambda_grid)
    if not grid or any(v < 0 for v in grid):
        raise InputError("lambda grid must be nonempty and nonnegative")
    if args.route == "series" and not is_sig:
        raise InputError("the series route needs a signature file")
    if args.route in ("exact", "ode") and is_sig:
        raise InputError(f"the {args.route} route needs a path file")

    rows = []
    if args.route == "series":
        x = signature_from_dict(data, precision=args.precision_bits or "auto")
        for lam in grid:
            try:
                point, tail = develop_from_signature(x, lam, tail_fraction=args.tail_fraction)
            except TailTooLarge as exc:
                print(f"error: series tail too large at lambda={lam:g}: {exc}", file=sys.stderr)
                return EXIT_TAIL
            rows.append(SweepRow(lam, point, tail, "series", point.precision))
        dim = x.dimension
    else:
        path = path_from_dict(data)
        dim = path.dimension
        if args.route == "exact":
            # one precision for the whole sweep, set by its largest lambda L
            bits = args.precision_bits or required_precision(max(grid) * path.total_length)
            for lam in grid:
                rows.append(SweepRow(lam, develop_exact(path, lam, bits), 0.0, "exact", bits))
        else:
            for lam in grid:
                steps = max(2, math.ceil(args.steps_per_unit * max(lam * path.total_length, 1.0)))
                rows.append(SweepRow(lam, develop_ode_path(path, lam, steps), 0.0, "ode", None))
    write_sweep_csv(rows, args.out, dim)
    return EXIT_OK


def cmd_invert(args) -> int:
    data = _read_json(args.sig_file)
    x = signature_from_dict(data)
    if args.mode == "axis":
        try:
            a = axis_invert(x, args.eps_zero)
        except NotAxisSignature as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ESTIMATOR
        Path(args.out).write_text(json.dumps({"mode": "axis", **axis_path_to_dict(a)}, indent=1))
        return EXIT_OK
    config = InversionConfig()
    if args.config:
        try:
            config = InversionConfig.from_dict(_read_json(args.config))
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad config: {exc}") from exc
    report = invert_piecewise_linear(x, config)
    out = {"mode": "piecewise", **report.to_dict()}
    Path(args.out).write_text(json.dumps(out, indent=1))
    if report.terminated_by == ESTIMATOR_FAILURE:
        print(f"error: estimator failure: {report.failure}", file=sys.stderr)
        return EXIT_ESTIMATOR
    return EXIT_OK


def _beta_name(out: str) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + "_beta" + (p.suffix or ".json")))


def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.family == "axis":
        a = random_axis_path(rng, args.n, args.d)
        save_path(axis_to_piecewise(a, args.d), args.out)
    elif args.family == "random-pl":
        p = random_piecewise_path(rng, args.n, args.d, (args.min_length, args.max_length), args.min_angle)
        save_path(p, args.out)
    else:
        alpha, beta = gen_alpha_beta(args.n, args.d)
        save_path(alpha, args.out)
        save_path(beta, args.out_beta or _beta_name(args.out))
    return EXIT_OK


def cmd_trivial_search(args) -> int:
    """Experimental: brute-force lattice paths whose signature is trivial up to a level."""
    d = args.d
    steps = [(i, s) for i in range(1, d + 1) for s in (1.0, -1.0)]
    for n in range(2, args.max_steps + 1, 2):
        for combo in itertools.product(steps, repeat=n):
            # cheap filter: the path must close up
            net = [0.0] * d
            for i, s in combo:
                net[i - 1] += s
            if any(net) or any(a[0] == b[0] and a[1] == -b[1] for a, b in zip(combo, combo[1:])):
                continue
            x = None
            for i, s in combo:
                e = [0.0] * d
                e[i - 1] = s
                seg = ts_exp_segment(e, args.level, "exact")
                x = seg if x is None else ts_mul(x, seg)
            if is_unit(x):
                print(json.dumps({"steps": n, "path": [[i, s] for i, s in combo]}))
                return EXIT_OK
    print("no path found", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sigdev", description="Path signatures, hyperbolic development and inversion.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sig", help="signature of a path file")
    p.add_argument("path_file")
    p.add_argument("--level", "-N", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--precision-bits", type=int, default=None)
    p.set_defaults(func=cmd_sig)

    p = sub.add_parser("develop", help="lambda sweep of the hyperbolic development")
    p.add_argument("input", help="path file (exact, ode) or signature file (series)")
    p.add_argument("--lambda-grid", required=True, help="a:b:step, comma list, or single value")
    p.add_argument("--route", choices=["exact", "series", "ode"], default="exact")
    p.add_argument("--out", required=True)
    p.add_argument("--precision-bits", type=int, default=None)
    p.add_argument("--tail-fraction", type=float, default=1e-3)
    p.add_argument("--steps-per-unit", type=float, default=100.0, help="ODE steps per unit of lambda L")
    p.set_defaults(func=cmd_develop)

    p = sub.add_parser("invert", help="recover a path from a signature file")
    p.add_argument("sig_file")
    p.add_argument("--mode", choices=["axis", "piecewise"], default="piecewise")
    p.add_argument("--config", default=None, help="JSON file with inversion settings")
    p.add_argument("--eps-zero", type=float, default=1e-9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("gen", help="generate a test path")
    p.add_argument("--family", choices=["axis", "random-pl", "alpha-beta"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=3, help="pieces, segments, or alpha/beta depth")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--min-angle", type=float, default=20.0)
    p.add_argument("--min-length", type=float, default=0.4)
    p.add_argument("--max-length", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--out-beta", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("trivial-search", help="[experimental] shortest lattice loop with trivial truncated signature")
    p.add_argument("--level", type=int, default=2)
    p.add_argument("--max-steps", type=int, default=8)
    p.add_argument("--d", type=int, default=2)
    p.set_defaults(func=cmd_trivial_search)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, EmptyPath, InvalidPath, InvalidSignature) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (LevelCapExceeded, LevelInsufficient) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LEVEL
    except TailTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TAIL
    except SigdevError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
