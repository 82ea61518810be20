"""Command-line entry point ``nct``.

Exit codes: 0 success, 1 validation failure or numerical failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


# --------------------------------------------------------------------------
# helpers


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("NCT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"NCT_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _fmt(v, digits) -> str:
    if isinstance(v, float):
        return repr(v) if digits is None else f"{v:.{digits}g}"
    return str(v)


def _spec(args, strict: bool = True):
    from .ifs import load_spec

    return load_spec(args.spec, strict=strict, grid_resolution=getattr(args, "grid", None))


def _emit_text(args, text: str):
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _parse_scales(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--scales expects MIN:MAX exponents, got {text!r}") from None
    if not (2 <= lo < hi <= 12):
        raise UsageError("--scales needs 2 <= MIN < MAX <= 12")
    return lo, hi


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--range expects LO:HI, got {text!r}") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise UsageError(f"--range {text!r} is empty")
    return lo, hi


def _positive(name, v):
    if v is not None and not v > 0:
        raise UsageError(f"{name} must be positive")


# --------------------------------------------------------------------------
# subcommands


def cmd_validate(args):
    from .ifs import validate

    rep = validate(_spec(args, strict=False), args.family)
    header = ["check", "description", "result", "worst", "margin", "map", "x", "y", "value"]
    _emit_text(args, _csv(rep.to_rows(), header))
    if not rep.passed:
        raise ValidationFailure(f"family {rep.family}: {', '.join(c.name for c in rep.failures())}")


def cmd_pressure(args):
    from .pressure import pressure_approx

    spec = _spec(args)
    est = pressure_approx(spec, args.s, args.depth, workers=_threads(args), cap=args.cap)
    _emit_text(args, _fmt(est.value, args.digits) + "\n")


def cmd_s0(args):
    from .pressure import root_s0_detail

    spec = _spec(args)
    r = root_s0_detail(spec, args.depth, args.tol, guess=args.guess, workers=_threads(args), cap=args.cap)
    _emit_text(args, _fmt(r.s0, args.digits) + "\n")


def cmd_lyapunov(args):
    from .ergodic import summarize
    from .symbolic import BernoulliWeights

    spec = _spec(args)
    p = BernoulliWeights(tuple(float(v) for v in args.weights.split(","))) if args.weights else None
    s = summarize(spec, p, args.samples, args.depth, args.seed, workers=_threads(args))
    d = args.digits
    rows = [["h", _fmt(s.h, d), ""], ["chi1", _fmt(s.chi1, d), _fmt(s.se_chi1, d)],
            ["chi2", _fmt(s.chi2, d), _fmt(s.se_chi2, d)], ["dimL", _fmt(s.dimL, d), ""]]
    _emit_text(args, _csv(rows, ["quantity", "value", "stderr"]))


def _cloud(args, spec):
    from .geometry import sample_attractor

    return sample_attractor(spec, args.depth, args.mode, args.samples, args.seed, cap=args.cap)


def cmd_attractor(args):
    from .geometry import render_ppm

    if not args.out:
        raise UsageError("attractor needs --out PATH for the PPM image")
    if args.size < 16:
        raise UsageError("--size must be at least 16")
    spec = _spec(args)
    render_ppm(_cloud(args, spec), args.size, args.size, args.out)


def cmd_boxdim(args):
    from .geometry import box_dimension

    lo, hi = _parse_scales(args.scales)
    spec = _spec(args)
    est = box_dimension(_cloud(args, spec), lo, hi)
    _emit_text(args, est.to_csv())
    summary = f"slope={_fmt(est.slope, args.digits)} residual={_fmt(est.residual, args.digits)}"
    if est.warning:
        summary += f" warning: {est.warning}"
    print(summary, file=sys.stdout if args.out else sys.stderr)


def cmd_foliation_check(args):
    import numpy as np

    from . import foliation as fol
    from .symbolic import random_tailed_words

    spec = _spec(args)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0]))
    words = random_tailed_words(rng, args.samples, spec.n, 24)
    pts = rng.random((args.samples, 2))
    inv = max(fol.check_bundle_invariance(spec, w, x, y, args.tol) for w, (x, y) in zip(words, pts))
    leaf_res, ratios, ok = [], [], True
    leaves = min(args.samples, args.leaves)
    for k in range(leaves):
        x0 = float(pts[k, 0])
        span = (0.0, x0) if args.left else (0.0, 1.0)
        a0 = (x0, float(pts[k, 1]))
        a1 = (x0, float(np.clip(pts[k, 1] + 0.05, 0, 1)))
        leaf_res.append(fol.check_leaf_invariance(spec, words[k], a0, None, args.step, args.tol, span))
        g = fol.check_gronwall(spec, words[k], a0, a1, args.step, args.tol, span)
        ratios.append(g.ratio / g.bound * (1 + 1e-3))
        ok &= g.passed
    d = args.digits
    rows = [["bundle_invariance", _fmt(float(inv), d), _fmt(10 * args.tol, d), "PASS" if inv <= 10 * args.tol else "FAIL"],
            ["leaf_invariance", _fmt(max(leaf_res, default=0.0), d), _fmt(1e-5, d),
             "PASS" if max(leaf_res, default=0.0) <= 1e-5 else "FAIL"],
            ["gronwall_ratio_over_bound", _fmt(max(ratios, default=0.0), d), _fmt(1.0 + 1e-3, d),
             "PASS" if ok else "FAIL"]]
    _emit_text(args, _csv(rows, ["check", "worst", "bound", "result"]))
    if any(r[3] == "FAIL" for r in rows):
        raise ValidationFailure("foliation checks failed")


def cmd_transversality(args):
    from .transversality import ValidationFailedError, verify_transversality

    spec = _spec(args)
    try:
        rep = verify_transversality(spec, args.family, args.samples, args.seed, pairs=args.pairs,
                                    leaves=args.leaves, step=args.step)
    except ValidationFailedError as exc:
        raise ValidationFailure(str(exc)) from None
    _emit_text(args, _csv(rep.to_rows(), ["name", "bound", "worst", "margin", "result"]))
    if not rep.passed:
        raise ValidationFailure("transversality inequalities failed")


def cmd_sweep(args):
    import numpy as np

    from .ifs import SpecError, validate

    lo, hi = _parse_range(args.range)
    if args.steps < 2:
        raise UsageError("--steps must be at least 2")
    base = _spec(args)
    if not 1 <= args.map <= base.n:
        raise UsageError(f"--map must lie in 1..{base.n}")
    values = np.linspace(lo, hi, args.steps)
    rows, prev, kept = [], None, []
    for v in values:
        t = (base.t1 if args.coord == 1 else base.t2).copy()
        t[args.map - 1] = v
        try:
            spec = base.with_translations(t1=t, strict=True) if args.coord == 1 else base.with_translations(t2=t)
            rep = validate(spec, "G")
            if not rep.passed:
                raise SpecError(", ".join(c.name for c in rep.failures()))
        except SpecError as exc:
            print(f"skipped t={v!r}: {exc}", file=sys.stderr)
            continue
        q = _quantity(args, spec, prev)
        prev = q
        kept.append((float(v), q))
        rows.append([_fmt(float(v), args.digits), _fmt(q, args.digits)])
    _emit_text(args, _csv(rows, ["t", args.quantity]))
    lip = max((abs(b[1] - a[1]) / (b[0] - a[0]) for a, b in zip(kept, kept[1:])), default=0.0)
    print(f"lipschitz={_fmt(lip, args.digits)}", file=sys.stderr)


def _quantity(args, spec, prev):
    if args.quantity == "s0":
        from .pressure import root_s0

        return root_s0(spec, args.depth, args.tol, guess=prev, workers=_threads(args), cap=args.cap)
    from .ergodic import summarize

    s = summarize(spec, None, args.samples, None, args.seed, workers=_threads(args))
    return s.chi1 if args.quantity == "chi1" else s.dimL


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    from .symbolic import ENUMERATION_CAP

    p = argparse.ArgumentParser(prog="nct", description="Dimension toolkit for planar triangular iterated function systems.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def common(sp, seed=False):
        sp.add_argument("--spec", required=True, help="preset name (example-a, example-b, affine-test) or JSON path")
        sp.add_argument("--out", help="write output here instead of standard output")
        sp.add_argument("--digits", type=int, help="significant digits for printed numbers (default: full precision)")
        sp.add_argument("--threads", type=int, help="worker threads (default: NCT_THREADS, else all cores)")
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        return sp

    def cap(sp):
        sp.add_argument("--cap", type=int, default=ENUMERATION_CAP,
                        help=f"maximum number of enumerated words (default {ENUMERATION_CAP})")

    sp = common(sub.add_parser("validate", help="sample a condition family"))
    sp.add_argument("--family", default="G", choices=["G", "A", "B", "T"], help="condition family (default G)")
    sp.add_argument("--grid", type=int, help="grid resolution for derivative bounds (default 64)")
    sp.set_defaults(func=cmd_validate)

    sp = common(sub.add_parser("pressure", help="finite-level pressure P_n(s)"))
    sp.add_argument("--s", type=float, required=True, help="exponent s >= 0")
    sp.add_argument("--depth", type=int, default=6, help="word length n (default 6)")
    cap(sp)
    sp.set_defaults(func=cmd_pressure)

    sp = common(sub.add_parser("s0", help="root of the finite-level pressure"))
    sp.add_argument("--depth", type=int, default=6, help="word length n (default 6)")
    sp.add_argument("--tol", type=float, default=1e-8, help="bracket width (default 1e-8)")
    sp.add_argument("--guess", type=float, help="warm-start guess for the root")
    cap(sp)
    sp.set_defaults(func=cmd_s0)

    sp = common(sub.add_parser("lyapunov", help="entropy, Lyapunov exponents and dimension"), seed=True)
    sp.add_argument("--samples", type=int, default=100_000, help="Monte Carlo words (default 100000)")
    sp.add_argument("--depth", type=int, help="projection depth (default: smallest n with rho^n < 1e-8)")
    sp.add_argument("--weights", help="comma-separated Bernoulli weights (default uniform)")
    sp.set_defaults(func=cmd_lyapunov)

    for name, helptext in (("attractor", "render the attractor as a PPM image"),
                           ("boxdim", "box-counting dimension estimate")):
        sp = common(sub.add_parser(name, help=helptext), seed=True)
        sp.add_argument("--depth", type=int, default=5, help="word length in full mode (default 5)")
        sp.add_argument("--mode", choices=["full", "chaos"], default="full", help="point generation (default full)")
        sp.add_argument("--samples", type=int, default=1_000_000, help="points in chaos mode (default 1000000)")
        cap(sp)
        if name == "attractor":
            sp.add_argument("--size", type=int, default=1024, help="image width and height in pixels (default 1024)")
            sp.set_defaults(func=cmd_attractor)
        else:
            sp.add_argument("--scales", default="3:8", help="dyadic exponents MIN:MAX (default 3:8)")
            sp.set_defaults(func=cmd_boxdim)

    sp = common(sub.add_parser("foliation-check", help="bundle, leaf and Gronwall residuals"), seed=True)
    sp.add_argument("--samples", type=int, default=100, help="random bundle queries (default 100)")
    sp.add_argument("--leaves", type=int, default=10, help="leaf pairs to integrate (default 10)")
    sp.add_argument("--step", type=float, default=1e-3, help="leaf step (default 1e-3)")
    sp.add_argument("--tol", type=float, default=1e-10, help="series tolerance (default 1e-10)")
    sp.add_argument("--left", action="store_true", help="integrate leaves only to the left of the anchor")
    sp.set_defaults(func=cmd_foliation_check)

    sp = common(sub.add_parser("transversality", help="sampled transversality inequalities"), seed=True)
    sp.add_argument("--family", required=True, choices=["A", "B"], help="condition family")
    sp.add_argument("--samples", type=int, default=10_000, help="bundle queries (default 10000)")
    sp.add_argument("--pairs", type=int, default=1000, help="word pairs (default 1000)")
    sp.add_argument("--leaves", type=int, default=20, help="sampled leaves (default 20)")
    sp.add_argument("--step", type=float, default=1e-3, help="leaf step (default 1e-3)")
    sp.set_defaults(func=cmd_transversality)

    sp = common(sub.add_parser("sweep", help="quantity along a translation sweep"), seed=True)
    sp.add_argument("--map", type=int, default=1, help="map index i of t_{i,k} (default 1)")
    sp.add_argument("--coord", type=int, choices=[1, 2], default=2, help="coordinate k of t_{i,k} (default 2)")
    sp.add_argument("--range", required=True, help="parameter values LO:HI")
    sp.add_argument("--steps", type=int, default=11, help="grid points (default 11)")
    sp.add_argument("--quantity", choices=["s0", "chi1", "dimL"], default="s0", help="output column (default s0)")
    sp.add_argument("--depth", type=int, default=6, help="pressure depth for s0 (default 6)")
    sp.add_argument("--tol", type=float, default=1e-8, help="root tolerance (default 1e-8)")
    sp.add_argument("--samples", type=int, default=100_000, help="Monte Carlo words for chi1/dimL (default 100000)")
    cap(sp)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    from .expr import ExprError
    from .ifs import SpecError
    from .symbolic import EnumerationCapError

    try:
        for name in ("tol", "step"):
            _positive(f"--{name}", getattr(args, name, None))
        for name in ("samples", "depth"):
            v = getattr(args, name, None)
            if v is not None and v < (1 if name == "samples" else 0):
                raise UsageError(f"--{name} is out of range")
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"nct: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationFailure as exc:
        print(f"nct: validation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except SpecError as exc:
        print(f"nct: invalid system: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ExprError, EnumerationCapError, FileNotFoundError, ValueError) as exc:
        print(f"nct: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError, OSError) as exc:
        print(f"nct: error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
