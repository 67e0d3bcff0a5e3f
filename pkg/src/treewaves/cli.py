"""Command-line interface.

Subcommands cover the library surface: covariance profiles, ball and path
samples, wave-identity verification, conditioned Gibbs runs, survival
estimates, rate curves, the critical threshold, and its rigorous bracket.

Outputs are deterministic for fixed (seed, flags): no timestamps, floats
printed with 17 significant digits and '.' as the decimal separator, fixed key
order, '\n' line endings.  Tables are CSV with a '#'-prefixed metadata block
(d, lambda, seed, tool version); summaries are JSON with "schema_version": 1.

Exit codes: 0 success, 2 invalid parameters, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .conditioned import (
    DEFAULT_BURNIN,
    DEFAULT_THIN,
    _gibbs_run_matrix,
    batch_means_ess,
    build_gibbs_plan,
)
from .errors import ValidationError
from .levelset import (
    critical_threshold,
    expdec_alpha,
    haggstrom_alpha,
    survival_direct,
    survival_smc,
    transfer_rate,
)
from .sampler import (
    sample_ball_dense,
    sample_ball_recursive,
    sample_path,
    sample_scale,
    verify_eigen_residual,
    verify_sphere_sums,
)
from .spectral import SpectralPoint, build_profile
from .tree import canonical_path

SCHEMA_VERSION = 1
TOOL = f"treewaves {__version__}"
EIGEN_RESIDUAL_RTOL = 1e-8


def _fmt(value) -> str:
    """Render one scalar for CSV output."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _json_text(obj, indent: int = 0) -> str:
    """JSON with floats at 17 significant digits and insertion-order keys."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return '"nan"' if math.isnan(v) else ('"inf"' if v > 0 else '"-inf"')
        return f"{v:.17g}"
    if isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [f'{inner}{_json_text(str(k))}: {_json_text(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(rows) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            return "[]"
        rows = [f"{inner}{_json_text(v, indent + 1)}" for v in items]
        return "[\n" + ",\n".join(rows) + f"\n{pad}]"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _meta_lines(args, extra: dict | None = None) -> list[str]:
    meta = {
        "schema_version": SCHEMA_VERSION,
        "tool": TOOL,
        "d": args.d,
        "lambda": getattr(args, "lam", 0.0),
        "seed": getattr(args, "seed", 0),
    }
    if extra:
        meta.update(extra)
    return [f"# {k}={_fmt(v)}" for k, v in meta.items()]


def _csv_text(args, extra_meta: dict, header: list[str], rows: list[list]) -> str:
    lines = _meta_lines(args, extra_meta)
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _summary(args, payload: dict) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool": TOOL,
        "d": args.d,
        "lambda": getattr(args, "lam", 0.0),
        "seed": getattr(args, "seed", 0),
    }
    doc.update(payload)
    return doc


def _rng(args) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(args.seed))


def _point(args) -> SpectralPoint:
    return SpectralPoint(args.d, args.lam)


def _add_common(sub: argparse.ArgumentParser, seed: bool = True) -> None:
    sub.add_argument("--d", type=int, required=True, help="tree degree, >= 3")
    sub.add_argument(
        "--lambda", dest="lam", type=float, required=True,
        help="eigenvalue, |lambda| <= 2 sqrt(d-1)",
    )
    if seed:
        sub.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    sub.add_argument("--out", default=None, help="output path (default: stdout)")


def _cmd_profile(args) -> int:
    profile = build_profile(_point(args), args.n)
    rows = [[n, float(profile.phi[n])] for n in range(profile.n_max + 1)]
    text = _csv_text(args, {"big_phi": profile.big_phi}, ["n", "phi"], rows)
    _emit(text, args.out)
    return 0


def _cmd_sample_ball(args) -> int:
    profile = build_profile(_point(args), max(2, 2 * args.radius))
    rng = _rng(args)
    draw = sample_ball_dense if args.sampler == "dense" else sample_ball_recursive
    sample = draw(profile, args.radius, rng)
    rows = [
        [v.to_string(), v.depth, float(sample.values[i])]
        for i, v in enumerate(sample.ball.vertices)
    ]
    text = _csv_text(args, {"sampler": sample.sampler, "radius": args.radius},
                     ["vertex", "depth", "value"], rows)
    _emit(text, args.out)
    return 0


def _cmd_sample_path(args) -> int:
    profile = build_profile(_point(args), max(2, args.n - 1))
    rng = _rng(args)
    sample = sample_path(profile, args.n, rng)
    verts = canonical_path(args.d, args.n)
    rows = [
        [v.to_string(), v.depth, float(sample.values[i])] for i, v in enumerate(verts)
    ]
    text = _csv_text(args, {"sampler": "path", "n": args.n},
                     ["vertex", "depth", "value"], rows)
    _emit(text, args.out)
    return 0


def _cmd_verify(args) -> int:
    profile = build_profile(_point(args), max(2, 2 * args.radius))
    rng = _rng(args)
    samplers = ["dense", "recursive"] if args.sampler == "both" else [args.sampler]
    results = []
    all_pass = True
    for name in samplers:
        draw = sample_ball_dense if name == "dense" else sample_ball_recursive
        worst_eigen = 0.0
        worst_sphere = 0.0
        scale = 0.0
        for _ in range(args.reps):
            sample = draw(profile, args.radius, rng)
            worst_eigen = max(worst_eigen, verify_eigen_residual(sample))
            worst_sphere = max(worst_sphere, verify_sphere_sums(sample))
            scale = max(scale, sample_scale(sample))
        tol = EIGEN_RESIDUAL_RTOL * scale
        ok = worst_eigen <= tol and worst_sphere <= tol
        all_pass = all_pass and ok
        results.append(
            {
                "sampler": name,
                "max_eigen_residual": worst_eigen,
                "max_sphere_residual": worst_sphere,
                "scale": scale,
                "tolerance": tol,
                "pass": ok,
            }
        )
    doc = _summary(
        args,
        {"radius": args.radius, "reps": args.reps, "results": results, "pass": all_pass},
    )
    _emit(_json_text(doc) + "\n", args.out)
    return 0


def _cmd_gibbs(args) -> int:
    profile = build_profile(_point(args), 4)
    plan = build_gibbs_plan(profile, args.n)
    rng = _rng(args)
    mat = _gibbs_run_matrix(
        plan, args.alpha, args.sweeps, args.burnin, args.thin, rng, args.chains
    )
    chains, kept, n = mat.shape
    if kept == 0:
        raise ValidationError("no retained sweeps: raise sweeps or lower burnin/thin")
    center = (n + 1) // 2
    series = mat[:, :, center - 1].reshape(-1)
    ess = batch_means_ess(series)
    if args.tail_grid:
        grid = [float(tok) for tok in args.tail_grid.split(",")]
    else:
        grid = [args.alpha + off for off in (0.5, 1.0, 1.5, 2.0)]
    tail = []
    for x in grid:
        p = float(np.mean(series >= x))
        se = math.sqrt(max(p * (1.0 - p), 0.0) / ess) if ess > 0 else float("nan")
        tail.append({"x": x, "p_hat": p, "stderr": se})
    if args.out_chain is not None:
        header = ["sweep", "coordinate", "value"]
        if chains > 1:
            header = ["chain", "sweep", "coordinate", "value"]
        rows = []
        for c in range(chains):
            for t in range(kept):
                sweep = args.burnin + (t + 1) * args.thin
                for k in range(n):
                    row = [sweep, k + 1, float(mat[c, t, k])]
                    if chains > 1:
                        row = [c] + row
                    rows.append(row)
        text = _csv_text(
            args,
            {"n": n, "alpha": args.alpha, "sweeps": args.sweeps,
             "burnin": args.burnin, "thin": args.thin, "chains": chains},
            header, rows,
        )
        _emit(text, args.out_chain)
    doc = _summary(
        args,
        {
            "n": n,
            "alpha": args.alpha,
            "sweeps": args.sweeps,
            "burnin": args.burnin,
            "thin": args.thin,
            "chains": chains,
            "retained": chains * kept,
            "center_coordinate": center,
            "center_mean": float(series.mean()),
            "ess": ess,
            "tail": tail,
        },
    )
    _emit(_json_text(doc) + "\n", args.out)
    return 0


def _cmd_survival(args) -> int:
    profile = build_profile(_point(args), max(2, args.n - 1))
    rng = _rng(args)
    if args.method == "direct":
        est = survival_direct(profile, args.n, args.alpha, args.reps, rng)
    else:
        est = survival_smc(profile, args.n, args.alpha, args.particles, rng, args.batches)
    doc = _summary(
        args,
        {
            "n": est.n,
            "alpha": est.alpha,
            "method": est.method,
            "reps": est.reps,
            "p_hat": est.p_hat,
            "stderr": est.stderr,
            "collapsed": est.collapsed,
        },
    )
    _emit(_json_text(doc) + "\n", args.out)
    return 0


def _parse_alpha_grid(args) -> list[float]:
    if args.alphas:
        return [float(tok) for tok in args.alphas.split(",")]
    if args.alpha_steps < 2:
        raise ValidationError("--alpha-steps must be >= 2")
    if not args.alpha_max > args.alpha_min:
        raise ValidationError("--alpha-max must exceed --alpha-min")
    return list(np.linspace(args.alpha_min, args.alpha_max, args.alpha_steps))


def _cmd_rate(args) -> int:
    profile = build_profile(_point(args), 2)
    grid = _parse_alpha_grid(args)
    rows = []
    for alpha in grid:
        r = transfer_rate(profile, alpha, args.m, args.u_max_offset)
        r_coarse = transfer_rate(profile, alpha, max(16, args.m // 2), args.u_max_offset)
        rows.append([alpha, r, abs(r - r_coarse)])
    text = _csv_text(
        args,
        {"m": args.m, "u_max_offset": args.u_max_offset},
        ["alpha", "r", "stderr_or_tol"],
        rows,
    )
    _emit(text, args.out)
    return 0


def _cmd_threshold(args) -> int:
    profile = build_profile(_point(args), 2)
    lo = haggstrom_alpha(profile)
    hi = expdec_alpha(profile)
    alpha_c = critical_threshold(profile, args.tol, args.m, args.u_max_offset)
    rate_at = transfer_rate(profile, alpha_c, args.m, args.u_max_offset)
    doc = _summary(
        args,
        {
            "alpha_c": alpha_c,
            "bracket": {"haggstrom": lo, "expdec": hi},
            "rate_at_alpha_c": rate_at,
            "target_rate": 1.0 / (args.d - 1.0),
            "quadrature": {"m": args.m, "u_max_offset": args.u_max_offset},
            "tol": args.tol,
        },
    )
    _emit(_json_text(doc) + "\n", args.out)
    return 0


def _cmd_bounds(args) -> int:
    profile = build_profile(_point(args), 2)
    doc = _summary(
        args,
        {
            "haggstrom_alpha": haggstrom_alpha(profile),
            "expdec_alpha": expdec_alpha(profile),
            "big_phi": profile.big_phi,
        },
    )
    _emit(_json_text(doc) + "\n", args.out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treewaves",
        description="Invariant Gaussian waves on regular trees: samplers and "
        "level-set percolation analysis.",
    )
    parser.add_argument("--version", action="version", version=TOOL)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("profile", help="covariance profile phi(0..n) as CSV")
    _add_common(p, seed=False)
    p.add_argument("--n", type=int, required=True, help="largest distance, >= 2")
    p.set_defaults(func=_cmd_profile)

    p = subs.add_parser("sample-ball", help="one exact ball sample as CSV")
    _add_common(p)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--sampler", choices=["dense", "recursive"], default="dense")
    p.set_defaults(func=_cmd_sample_ball)

    p = subs.add_parser("sample-path", help="one exact path sample as CSV")
    _add_common(p)
    p.add_argument("--n", type=int, required=True, help="number of path vertices")
    p.set_defaults(func=_cmd_sample_path)

    p = subs.add_parser("verify", help="wave identities on repeated ball samples")
    _add_common(p)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--sampler", choices=["dense", "recursive", "both"], default="both")
    p.set_defaults(func=_cmd_verify)

    p = subs.add_parser("gibbs", help="conditioned-path Gibbs run")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--sweeps", type=int, required=True)
    p.add_argument("--burnin", type=int, default=DEFAULT_BURNIN)
    p.add_argument("--thin", type=int, default=DEFAULT_THIN)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--tail-grid", default=None, help="comma list of tail levels")
    p.add_argument("--out-chain", default=None, help="CSV path for retained states")
    p.set_defaults(func=_cmd_gibbs)

    p = subs.add_parser("survival", help="path survival probability estimate")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--method", choices=["direct", "smc"], default="smc")
    p.add_argument("--reps", type=int, default=100_000, help="direct-method draws")
    p.add_argument("--particles", type=int, default=10_000, help="smc particles")
    p.add_argument("--batches", type=int, default=16)
    p.set_defaults(func=_cmd_survival)

    p = subs.add_parser("rate", help="decay-rate curve r(alpha) as CSV")
    _add_common(p)
    p.add_argument("--alphas", default=None, help="comma list of levels")
    p.add_argument("--alpha-min", type=float, default=-1.0)
    p.add_argument("--alpha-max", type=float, default=2.0)
    p.add_argument("--alpha-steps", type=int, default=13)
    p.add_argument("--m", type=int, default=64)
    p.add_argument("--u-max-offset", type=float, default=8.0)
    p.set_defaults(func=_cmd_rate)

    p = subs.add_parser("threshold", help="critical level alpha_c as JSON")
    _add_common(p)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--m", type=int, default=64)
    p.add_argument("--u-max-offset", type=float, default=8.0)
    p.set_defaults(func=_cmd_threshold)

    p = subs.add_parser("bounds", help="rigorous threshold bracket as JSON")
    _add_common(p)
    p.set_defaults(func=_cmd_bounds)

    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime trouble: numerical failures, IO, ...
        print(f"failure: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))
