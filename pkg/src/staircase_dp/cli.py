"""Command-line front end.

Every random draw comes from ``derive_seed(seed, command, shard)`` streams
over a fixed shard layout, so equal arguments give byte-identical output
whatever the thread count.
"""

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from ._rng import map_shards, substream
from ._series import SeriesDivergenceError
from .cost import CostSpec, expected_cost_series, phi
from .dpverify import (
    check_levelset_enlargement,
    check_maximal_decay,
    check_radial_loglip,
    check_staircase_ratios,
    laplace_sandwich_check,
    levelset_grid,
)
from .fuzz import random_dp_step_density
from .norms import NormSpec, norm
from .optimize import find_gamma_star, tradeoff_sweep
from .rearrange import find_mass_matching_y, rearrange_profile
from .staircase import DEFAULT_TAIL_TOL, StaircaseParams, build_band_table, radial_profile, sample

COMMANDS = ("sample", "cost", "optimize", "sweep", "verify", "rearrange-demo")
SAMPLE_SHARDS = 8


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # parse errors become UsageError so they reach the JSON error channel
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise UsageError(f"--{name} must be a positive finite number, got {value!r}")
    return value


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse integer list {text!r}") from None


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--eps", default="1.0", help="privacy level (comma list for sweep)")
    common.add_argument("--delta", type=float, default=1.0, help="sensitivity")
    common.add_argument("--dim", default="1", help="dimension (comma list for sweep)")
    common.add_argument("--p", default="1", help="norm exponent, >= 1 or 'inf'")
    common.add_argument("--gamma", type=float, default=None, help="staircase offset in [0, 1]")
    common.add_argument("--optimize", action="store_true", help="use the cost-optimal gamma")
    common.add_argument("--cost", choices=("power", "threshold", "truncated"), default="power")
    common.add_argument("--q", type=float, default=1.0, help="power cost exponent")
    common.add_argument("--lambda", dest="lam", type=float, default=1.0, help="threshold level")
    common.add_argument("--cap", type=float, default=1.0, help="truncation level")
    common.add_argument("--samples", type=int, default=1000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--tail-tol", type=float, default=DEFAULT_TAIL_TOL)
    common.add_argument("--out", default=None, help="output file (default stdout)")

    parser = _Parser(prog="staircase-dp", description="Staircase noise for epsilon-DP vector queries.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="draw noise vectors (CSV)")
    cost = sub.add_parser("cost", parents=[common], help="expected cost: series and Monte Carlo")
    cost.add_argument("--from-file", default=None, help="sample CSV to average instead of drawing")
    sub.add_parser("optimize", parents=[common], help="cost-optimal gamma")
    sweep = sub.add_parser("sweep", parents=[common], help="staircase vs. Laplace over eps x dim")
    sweep.add_argument("--mc-check", action="store_true", help="cross-check each row by Monte Carlo")
    sub.add_parser("verify", parents=[common], help="DP checks on the staircase density")
    sub.add_parser("rearrange-demo", parents=[common], help="rearrange a random DP step density")
    return parser


def _config(args):
    """Validate arguments into a plain dict (also echoed into output headers)."""
    eps_list = _float_list(args.eps)
    dim_list = _int_list(args.dim)
    if not eps_list or not dim_list:
        raise UsageError("--eps and --dim need at least one value")
    for e in eps_list:
        _positive("eps", e)
    for n in dim_list:
        if n < 1:
            raise UsageError(f"--dim must be a positive integer, got {n}")
    if args.command != "sweep" and (len(eps_list) > 1 or len(dim_list) > 1):
        raise UsageError("comma lists for --eps/--dim are only accepted by sweep")
    _positive("delta", args.delta)
    try:
        NormSpec(args.p, 1)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"--p: {exc}") from None
    if args.gamma is not None and not 0.0 <= args.gamma <= 1.0:
        raise UsageError(f"--gamma must lie in [0, 1], got {args.gamma!r}")
    if args.command in ("sample", "cost", "verify") and args.gamma is None and not args.optimize:
        raise UsageError(f"{args.command} needs --gamma or --optimize")
    if args.samples < 0:
        raise UsageError("--samples must be nonnegative")
    if not 0 <= args.seed < 2**64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    if not 0.0 < args.tail_tol < 1.0:
        raise UsageError("--tail-tol must lie in (0, 1)")
    try:
        if args.cost == "power":
            cost = CostSpec.power(args.q)
        elif args.cost == "threshold":
            cost = CostSpec.threshold(args.lam)
        else:
            cost = CostSpec.truncated(args.cap)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg = {
        "command": args.command,
        "eps": eps_list if args.command == "sweep" else eps_list[0],
        "delta": args.delta,
        "dim": dim_list if args.command == "sweep" else dim_list[0],
        "p": args.p,
        "gamma": args.gamma,
        "optimize": bool(args.optimize),
        "cost": cost.tag,
        "samples": args.samples,
        "seed": args.seed,
        "tail_tol": args.tail_tol,
    }
    return cfg, cost


def _params(cfg, cost):
    nrm = NormSpec(cfg["p"], cfg["dim"])
    if cfg["gamma"] is not None and not cfg["optimize"]:
        gamma = cfg["gamma"]
    else:
        gamma, _ = find_gamma_star(cfg["eps"], cfg["delta"], nrm, cost)
    params = StaircaseParams(cfg["eps"], cfg["delta"], gamma, nrm)
    return params, build_band_table(params, cfg["tail_tol"])


def draw_samples(params, table, seed, count):
    """``count`` draws from fixed shards ``substream(seed, 'sample', i)``, concatenated in order."""
    sizes = [count // SAMPLE_SHARDS + (1 if i < count % SAMPLE_SHARDS else 0) for i in range(SAMPLE_SHARDS)]
    parts = map_shards(
        lambda job: sample(params, table, substream(seed, "sample", job[0]), job[1]),
        list(enumerate(sizes)),
    )
    return np.concatenate(parts) if count else np.empty((0, params.dim))


def _mean_stderr(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return None, None
    mean = math.fsum(values) / values.size
    if values.size < 2:
        return mean, None
    var = math.fsum((values - mean) ** 2) / (values.size - 1)
    return mean, math.sqrt(var / values.size)


def read_sample_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader, None)
        if header is None:
            raise UsageError(f"{path}: no header line")
        for row in reader:
            if row:
                rows.append([float(v) for v in row])
    return np.asarray(rows, dtype=float).reshape(len(rows), len(header))


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def _header(cfg):
    lines = [f"# staircase-dp {__version__}"]
    for key in sorted(cfg):
        val = cfg[key]
        if isinstance(val, list):
            val = ",".join(_fmt(v) for v in val)
        lines.append(f"# {key}={_fmt(val)}")
    return lines


def _csv(cfg, columns, rows):
    buf = io.StringIO()
    for line in _header(cfg):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _emit_table(cfg, fmt, columns, rows):
    if fmt == "json":
        return _json({"config": cfg, "columns": columns, "rows": [list(r) for r in rows]})
    return _csv(cfg, columns, rows)


def _emit_record(cfg, fmt, record):
    if fmt == "csv":
        return _csv(cfg, ["key", "value"], sorted(record.items()))
    return _json({"config": cfg, **record})


def run_sample(cfg, cost, fmt):
    params, table = _params(cfg, cost)
    cfg = {**cfg, "gamma_used": params.gamma}
    x = draw_samples(params, table, cfg["seed"], cfg["samples"])
    columns = [f"x{i}" for i in range(params.dim)]
    return _emit_table(cfg, fmt or "csv", columns, [[float(v) for v in row] for row in x])


def run_cost(cfg, cost, fmt, from_file=None):
    params, table = _params(cfg, cost)
    cfg = {**cfg, "gamma_used": params.gamma}
    series = expected_cost_series(params, table, cost)
    if from_file is not None:
        x = read_sample_csv(from_file)
        if x.shape[1] != params.dim:
            raise UsageError(f"{from_file}: {x.shape[1]} columns, expected {params.dim}")
        cfg["from_file"] = from_file
    else:
        x = draw_samples(params, table, cfg["seed"], cfg["samples"])
    values = np.atleast_1d(phi(cost, norm(params.norm, x))) if len(x) else np.empty(0)
    mean, se = _mean_stderr(values)
    record = {"series": series, "mc_mean": mean, "mc_stderr": se, "mc_samples": int(len(x))}
    return _emit_record(cfg, fmt or "json", record)


def run_optimize(cfg, cost, fmt):
    nrm = NormSpec(cfg["p"], cfg["dim"])
    g, v = find_gamma_star(cfg["eps"], cfg["delta"], nrm, cost)
    return _emit_record(cfg, fmt or "json", {"gamma_star": g, "cost": v})


def run_sweep(cfg, cost, fmt, mc_check=False):
    rows = tradeoff_sweep(
        cfg["eps"], cfg["dim"], p=cfg["p"], cost=cost, mc_check=mc_check, delta=cfg["delta"],
        mc_samples=max(cfg["samples"], 2), seed=cfg["seed"],
    )
    cfg = {**cfg, "mc_check": bool(mc_check)}
    columns = list(rows[0].as_dict()) if rows else []
    return _emit_table(cfg, fmt or "csv", columns, [list(r.as_dict().values()) for r in rows])


def run_verify(cfg, cost, fmt):
    params, table = _params(cfg, cost)
    cfg = {**cfg, "gamma_used": params.gamma}
    report = check_staircase_ratios(params, table, substream(cfg["seed"], "verify"), max(cfg["samples"], 1))
    prof = radial_profile(params, table)
    eps, delta = params.eps, params.delta
    lambdas, hs = levelset_grid(prof, eps)
    checks = {
        "ratio_pairs": report.passed,
        "radial_loglip": check_radial_loglip(prof, eps, delta),
        "maximal_decay": check_maximal_decay(prof, eps, delta),
        "levelset_enlargement": check_levelset_enlargement(prof, eps, delta, lambdas, hs),
        "laplace_sandwich": laplace_sandwich_check(prof, eps, delta, params.norm),
    }
    record = {**json.loads(report.to_json()), "checks": checks}
    return _emit_record(cfg, fmt or "json", record)


def run_rearrange_demo(cfg, cost, fmt):
    eps, delta = cfg["eps"], cfg["delta"]
    f = random_dp_step_density(eps, delta, substream(cfg["seed"], "rearrange-demo"))
    f_star = rearrange_profile(f)
    y, matched = find_mass_matching_y(f_star, 1, eps, delta)
    cfg = {**cfg, "dim": 1, "matched_y": y}
    rows = []
    F = f.abs_cdf()
    for lo, hi, v in zip(*f.segments()):
        rows.append(["before", float(lo), float(hi), float(v), float(F(abs(hi)))])
    for name, prof in (("rearranged", f_star), ("matched", matched)):
        G = prof.cdf(1)
        for lo, hi, v in zip(*prof.segments()):
            rows.append([name, float(lo), float(hi), float(v), float(G(hi))])
    return _emit_table(cfg, fmt or "csv", ["profile", "lo", "hi", "value", "cdf_at_hi"], rows)


def run(argv=None):
    """Parse ``argv``, execute, and return ``(exit_code, stdout_text, stderr_text)``."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), "", ""
    except UsageError as exc:
        return 2, "", json.dumps({"error": "invalid-input", "message": str(exc)}) + "\n"
    try:
        cfg, cost = _config(args)
        fmt = args.format
        if args.command == "sample":
            text = run_sample(cfg, cost, fmt)
        elif args.command == "cost":
            text = run_cost(cfg, cost, fmt, args.from_file)
        elif args.command == "optimize":
            text = run_optimize(cfg, cost, fmt)
        elif args.command == "sweep":
            text = run_sweep(cfg, cost, fmt, args.mc_check)
        elif args.command == "verify":
            text = run_verify(cfg, cost, fmt)
        else:
            text = run_rearrange_demo(cfg, cost, fmt)
    except SeriesDivergenceError as exc:
        return 3, "", json.dumps({"error": "divergence", "message": str(exc)}) + "\n"
    except (UsageError, ValueError, OSError) as exc:
        return 2, "", json.dumps({"error": "invalid-input", "message": str(exc)}) + "\n"
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        return 0, "", ""
    return 0, text, ""


def main(argv=None):
    code, out, err = run(argv)
    if out:
        sys.stdout.write(out)
    if err:
        sys.stderr.write(err)
    return code


if __name__ == "__main__":
    sys.exit(main())
