"""Command-line surface: run configuration, CSV/JSON result persistence,
and the reproducibility shell around the numerical core.

Every command emits a CSV data file plus a JSON metadata sidecar holding
all parameters (seed included); re-running with identical flags reproduces
both byte for byte.  Wall times and timestamps go only to the append-only
run log.  Exit codes: 1 usage, 2 numeric/divergence, 3 oracle mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import secrets
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import estimators, oracle, series
from .geometry import BallSpec
from .mc import (
    estimate_connectivity,
    estimate_two_point,
    estimate_two_point_multi,
    triangle_mc,
)
from .oracle import tiny_graph_arrays
from .stats import EstimateWithCI, binomial_estimate

SCHEMA_VERSION = 1

EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_MISMATCH = 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        raise CliError(message, EXIT_USAGE)


@dataclass
class RunRecord:
    """One appended row of the run log."""

    schema_version: int
    timestamp: str
    d: int
    p: float
    tree_radius: int
    line_halfwidth: int
    samples: int
    base_seed: int
    estimator: str
    estimate: float
    stderr: float
    ci_low: float
    ci_high: float
    wall_millis: int


_LOG_HEADER = [
    "schemaVersion",
    "timestamp",
    "d",
    "p",
    "R",
    "M",
    "samples",
    "baseSeed",
    "estimator",
    "estimate",
    "stderr",
    "ciLow",
    "ciHigh",
    "wallMillis",
]


def fmt(x) -> str:
    """Shortest round-trip decimal representation."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def append_records(log_path: str, records: list[RunRecord]) -> None:
    new = not os.path.exists(log_path)
    with open(log_path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(_LOG_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.schema_version,
                    r.timestamp,
                    r.d,
                    fmt(r.p),
                    r.tree_radius,
                    r.line_halfwidth,
                    r.samples,
                    r.base_seed,
                    r.estimator,
                    fmt(r.estimate),
                    fmt(r.stderr),
                    fmt(r.ci_low),
                    fmt(r.ci_high),
                    r.wall_millis,
                ]
            )


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(x) for x in row])


def write_sidecar(out_path: str, command: str, params: dict) -> None:
    meta = {"schemaVersion": SCHEMA_VERSION, "command": command, "params": params}
    with open(out_path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _record(args, estimator: str, est: EstimateWithCI, wall_ms: int, p=None) -> RunRecord:
    return RunRecord(
        SCHEMA_VERSION,
        time.strftime("%Y-%m-%dT%H:%M:%S"),
        args.d,
        args.p if p is None else p,
        getattr(args, "tree_radius", 0),
        getattr(args, "line_halfwidth", 0),
        getattr(args, "samples", 0),
        args.seed,
        estimator,
        est.estimate,
        est.stderr,
        est.ci_low,
        est.ci_high,
        wall_ms,
    )


def parse_grid(text: str) -> list[float]:
    parts = text.split(":")
    if len(parts) == 1:
        vals = [float(x) for x in text.split(",") if x]
    else:
        if len(parts) != 3:
            raise ValueError("grid must be start:stop:step or comma list")
        start, stop, step = (float(x) for x in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        vals = [round(start + i * step, 10) for i in range(count)]
    if not vals:
        raise ValueError("empty grid")
    return vals


def _common_flags(p: argparse.ArgumentParser, mc: bool = True) -> None:
    p.add_argument("--d", type=int, default=3, help="tree degree (>= 3)")
    p.add_argument("--config", help="key=value file of flag defaults; flags win")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--log", help="run-log CSV path (append-only)")
    if mc:
        p.add_argument("--tree-radius", type=int, default=10)
        p.add_argument("--line-halfwidth", type=int, default=30)
        p.add_argument("--samples", type=int, default=100000)
        p.add_argument("--seed", type=int, default=None, help="base seed; drawn from system entropy when omitted")
        p.add_argument("--threads", type=int, default=None, help="worker count; PERCLAB_THREADS overrides the default")


def build_parser() -> _Parser:
    parser = _Parser(prog="perclab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    parser.sub_action = sub

    p = sub.add_parser("two-point", help="estimate the two-point table on a box")
    _common_flags(p)
    p.add_argument("--p", type=float, required=True)
    p.set_defaults(func=cmd_two_point)

    p = sub.add_parser("alpha-curve", help="tree-direction decay rate over a p grid")
    _common_flags(p)
    p.add_argument("--p-grid", required=True, help="start:stop:step or comma list")
    p.set_defaults(func=cmd_alpha_curve)

    p = sub.add_parser("beta-curve", help="line-direction decay rate over a p grid")
    _common_flags(p)
    p.add_argument("--p-grid", required=True)
    p.set_defaults(func=cmd_beta_curve)

    p = sub.add_parser("chi-tilted", help="tilted susceptibility with tail bound")
    _common_flags(p)
    p.add_argument("--p", type=float, required=True)
    p.set_defaults(func=cmd_chi_tilted)

    p = sub.add_parser("triangle", help="Monte-Carlo triangle diagram on a box")
    _common_flags(p)
    p.add_argument("--p", type=float, required=True)
    p.set_defaults(func=cmd_triangle)

    p = sub.add_parser("triangle-diagnostic", help="saturating/growing triangle report over radii")
    _common_flags(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--radii", default="4,6,8,10,12", help="comma list of tree radii")
    p.add_argument("--line-factor", type=int, default=2, help="line half-width = factor * radius")
    p.add_argument("--saturate-frac", type=float, default=0.4, help="growing iff last increment exceeds this fraction of the first")
    p.set_defaults(func=cmd_triangle_diagnostic)

    p = sub.add_parser("series", help="evaluate the tilt generating function J(r, z)")
    _common_flags(p, mc=False)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--z", type=float, default=1.0)
    p.add_argument("--depth", type=int, default=None, help="also report the enumeration partial sum")
    p.set_defaults(func=cmd_series)

    p = sub.add_parser("pu", help="uniqueness threshold by decay-rate inversion")
    _common_flags(p)
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--bracket", default="0.3:0.95")
    p.set_defaults(func=cmd_pu, tree_radius=9, line_halfwidth=24, samples=20000)

    p = sub.add_parser("pc-proxy", help="finite-size susceptibility-growth proxy for p_c")
    _common_flags(p)
    p.add_argument("--grid", default="0.05:0.90:0.05")
    p.add_argument("--growth-ratio", type=float, default=3.0)
    p.set_defaults(func=cmd_pc_proxy, tree_radius=4, line_halfwidth=8, samples=4000)

    p = sub.add_parser("oracle-check", help="MC vs exhaustive enumeration on the shipped corpus")
    _common_flags(p)
    p.add_argument("--p-list", default="0.3,0.5,0.7")
    p.set_defaults(func=cmd_oracle_check, samples=100000)

    return parser


def _apply_config(parser: _Parser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        subparser = parser.sub_action.choices[args.command]
        defaults = {}
        with open(args.config) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, value = line.partition("=")
                defaults[key.strip().replace("-", "_")] = value.strip()
        for key, value in defaults.items():
            action = next((a for a in subparser._actions if a.dest == key), None)
            if action is None:
                raise CliError(f"unknown config key: {key}", EXIT_USAGE)
            defaults[key] = action.type(value) if action.type else value
        # re-parse so explicit flags win over config values
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and hasattr(args, "seed"):
        args.seed = secrets.randbits(63)
    return args


def _spec(args) -> BallSpec:
    return BallSpec(args.d, args.tree_radius, args.line_halfwidth)


def _out_path(args, default: str) -> str:
    return args.out or default


def _log_path(args, out: str) -> str:
    return args.log or os.path.join(os.path.dirname(os.path.abspath(out)), "runs.csv")


def _params(args, exclude=("func", "config", "log")) -> dict:
    return {k: v for k, v in vars(args).items() if k not in exclude and not callable(v)}


def cmd_two_point(args) -> int:
    spec = _spec(args)
    t0 = time.monotonic()
    table = estimate_two_point(args.p, spec, args.samples, args.seed, args.threads)
    wall = int((time.monotonic() - t0) * 1000)
    rows = []
    for n in range(spec.tree_radius + 1):
        for m in range(spec.line_halfwidth + 1):
            k, trials = table._counts(n, m)
            est = binomial_estimate(k, trials)
            rows.append([n, m, est.estimate, est.stderr, est.ci_low, est.ci_high, k, trials])
    out = _out_path(args, "two_point.csv")
    write_csv(out, ["n", "m", "tau", "stderr", "ci_lo", "ci_hi", "hits", "samples"], rows)
    write_sidecar(out, "two-point", _params(args))
    est = table.estimate(min(1, spec.tree_radius), 0)
    append_records(_log_path(args, out), [_record(args, "two_point", est, wall)])
    print(f"two-point table written to {out} ({len(rows)} orbit rows)")
    return 0


def _curve(args, which: str) -> int:
    try:
        grid = parse_grid(args.p_grid)
        if sorted(grid) != grid:
            raise ValueError("p grid must be ascending")
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE)
    spec = _spec(args)
    target = 1.0 / math.sqrt(args.d - 1) if which == "alpha" else 1.0
    rows, records = [], []
    t0 = time.monotonic()
    tables = estimate_two_point_multi(grid, spec, args.samples, args.seed, args.threads)
    wall = int((time.monotonic() - t0) * 1000) // len(grid)
    for p, table in zip(grid, tables):
        dec = (
            estimators.alpha_hat(table) if which == "alpha" else estimators.beta_hat(table)
        )
        rows.append([p, dec.sup_estimate, dec.regression_estimate, dec.stderr, target])
        est = EstimateWithCI(
            dec.sup_estimate,
            dec.sup_stderr,
            dec.sup_estimate - 3 * dec.sup_stderr,
            dec.sup_estimate + 3 * dec.sup_stderr,
            args.samples,
        )
        records.append(_record(args, f"{which}_sup", est, wall, p=p))
    out = _out_path(args, f"{which}_curve.csv")
    write_csv(out, ["p", f"{which}_sup", f"{which}_reg", "stderr", "target"], rows)
    write_sidecar(out, f"{which}-curve", _params(args))
    append_records(_log_path(args, out), records)
    print(f"{which} curve written to {out} ({len(rows)} grid points)")
    return 0


def cmd_alpha_curve(args) -> int:
    return _curve(args, "alpha")


def cmd_beta_curve(args) -> int:
    return _curve(args, "beta")


def cmd_chi_tilted(args) -> int:
    spec = _spec(args)
    t0 = time.monotonic()
    table = estimate_two_point(args.p, spec, args.samples, args.seed, args.threads)
    chi = estimators.chi_tilted_hat(table)
    wall = int((time.monotonic() - t0) * 1000)
    out = _out_path(args, "chi_tilted.csv")
    write_csv(
        out,
        ["p", "chi_tilted", "stderr", "ci_lo", "ci_hi", "tail_bound", "tail_rate"],
        [[args.p, chi.estimate, chi.stderr, chi.ci_low, chi.ci_high, chi.tail_bound, chi.tail_rate]],
    )
    write_sidecar(out, "chi-tilted", _params(args))
    append_records(_log_path(args, out), [_record(args, "chi_tilted", chi, wall)])
    print(f"chi_tilted = {chi.estimate:.6g} (+- {chi.stderr:.2g}), tail bound {chi.tail_bound:.6g}")
    return 0


def cmd_triangle(args) -> int:
    spec = _spec(args)
    t0 = time.monotonic()
    est = triangle_mc(args.p, spec, args.samples, args.seed, args.threads)
    wall = int((time.monotonic() - t0) * 1000)
    out = _out_path(args, "triangle.csv")
    write_csv(
        out,
        ["p", "R", "M", "samples", "nabla", "stderr", "ci_lo", "ci_hi"],
        [[args.p, spec.tree_radius, spec.line_halfwidth, args.samples, est.estimate, est.stderr, est.ci_low, est.ci_high]],
    )
    write_sidecar(out, "triangle", _params(args))
    append_records(_log_path(args, out), [_record(args, "triangle_mc", est, wall)])
    print(f"nabla = {est.estimate:.6g} (+- {est.stderr:.2g})")
    return 0


def classify_increments(values: list[float], stderrs: list[float], saturate_frac: float) -> tuple[str, list[float]]:
    """Label a truncation-growth sequence as saturating or growing.

    Saturating: increments shrink to the noise floor or decay below the
    stated fraction of the first increment.  Growing: the last increment
    stays above both."""
    incs = [values[i + 1] - values[i] for i in range(len(values) - 1)]
    noise = [
        3.0 * math.sqrt(stderrs[i + 1] ** 2 + stderrs[i] ** 2)
        for i in range(len(values) - 1)
    ]
    if not incs:
        return "saturating", incs
    first, last = incs[0], incs[-1]
    if last <= noise[-1]:
        return "saturating", incs
    if first > 0 and last < saturate_frac * first:
        return "saturating", incs
    return "growing", incs


def cmd_triangle_diagnostic(args) -> int:
    radii = [int(x) for x in args.radii.split(",") if x]
    if not radii or sorted(radii) != radii:
        raise CliError("--radii must be a nonempty increasing list", EXIT_USAGE)
    t0 = time.monotonic()
    ests = []
    for r in radii:
        spec = BallSpec(args.d, r, args.line_factor * r)
        ests.append(triangle_mc(args.p, spec, args.samples, args.seed, args.threads))
    wall = int((time.monotonic() - t0) * 1000)
    values = [e.estimate for e in ests]
    stderrs = [e.stderr for e in ests]
    verdict, incs = classify_increments(values, stderrs, args.saturate_frac)
    rows = []
    for i, (r, e) in enumerate(zip(radii, ests)):
        inc = incs[i - 1] if i >= 1 else 0.0
        rows.append([r, args.line_factor * r, e.estimate, e.stderr, e.ci_low, e.ci_high, inc])
    out = _out_path(args, "triangle_diagnostic.csv")
    write_csv(out, ["radius", "line_halfwidth", "nabla", "stderr", "ci_lo", "ci_hi", "increment"], rows)
    params = _params(args)
    params["verdict"] = verdict
    params["increments"] = incs
    write_sidecar(out, "triangle-diagnostic", params)
    append_records(
        _log_path(args, out),
        [_record(args, f"triangle_diag_R{r}", e, wall) for r, e in zip(radii, ests)],
    )
    print(f"triangle diagnostic at p={args.p}: {verdict}")
    print("increments:", " ".join(f"{x:.4g}" for x in incs))
    return 0


def cmd_series(args) -> int:
    try:
        value = series.j_closed_form(args.d, args.r, args.z)
    except series.SeriesDivergence as exc:
        reason = exc.verdict.reason.value if exc.verdict else "divergent"
        print(f"J({args.r}, {args.z}) diverges: {reason}")
        if args.out:
            write_csv(args.out, ["d", "r", "z", "J", "verdict"], [[args.d, args.r, args.z, math.nan, reason]])
            write_sidecar(args.out, "series", _params(args))
        return EXIT_NUMERIC
    row = [args.d, args.r, args.z, value, "inside"]
    header = ["d", "r", "z", "J", "verdict"]
    if args.depth is not None:
        partial = series.j_enumerate(args.d, args.r, args.z, args.depth)[-1]
        header.append(f"partial_depth_{args.depth}")
        row.append(partial)
        print(f"J = {fmt(value)} (enumeration to depth {args.depth}: {fmt(partial)})")
    else:
        print(f"J = {fmt(value)}")
    if args.out:
        write_csv(args.out, header, [row])
        write_sidecar(args.out, "series", _params(args))
    return 0


def cmd_pu(args) -> int:
    lo, _, hi = args.bracket.partition(":")
    t0 = time.monotonic()
    try:
        th = estimators.p_u_by_alpha_inversion(
            args.d,
            args.tree_radius,
            args.line_halfwidth,
            args.samples,
            args.seed,
            args.tol,
            (float(lo), float(hi)),
            args.threads,
        )
    except estimators.BracketError as exc:
        print(f"bracket failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    wall = int((time.monotonic() - t0) * 1000)
    out = _out_path(args, "pu.csv")
    write_csv(
        out,
        ["p_hat", "bracket_lo", "bracket_hi", "target", "iterations"],
        [[th.p_hat, th.bracket[0], th.bracket[1], th.target, th.iterations]],
    )
    params = _params(args)
    params["probes"] = [list(p) for p in th.probes]
    write_sidecar(out, "pu", params)
    est = EstimateWithCI(th.p_hat, 0.5 * (th.bracket[1] - th.bracket[0]), th.bracket[0], th.bracket[1], args.samples)
    append_records(_log_path(args, out), [_record(args, "p_u_inversion", est, wall, p=th.p_hat)])
    print(f"p_u estimate: {th.p_hat:.4f} in [{th.bracket[0]:.4f}, {th.bracket[1]:.4f}] after {th.iterations} bisections")
    return 0


def cmd_pc_proxy(args) -> int:
    grid = tuple(parse_grid(args.grid))
    t0 = time.monotonic()
    try:
        th = estimators.p_c_proxy(
            args.d,
            grid,
            args.tree_radius,
            args.line_halfwidth,
            args.samples,
            args.seed,
            args.growth_ratio,
            args.threads,
        )
    except estimators.BracketError as exc:
        print(f"proxy failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    wall = int((time.monotonic() - t0) * 1000)
    out = _out_path(args, "pc_proxy.csv")
    write_csv(
        out,
        ["p_hat", "bracket_lo", "bracket_hi", "growth_ratio", "iterations"],
        [[th.p_hat, th.bracket[0], th.bracket[1], th.target, th.iterations]],
    )
    params = _params(args)
    params["probes"] = [list(p) for p in th.probes]
    write_sidecar(out, "pc-proxy", params)
    est = EstimateWithCI(th.p_hat, 0.0, th.bracket[0], th.bracket[1], args.samples)
    append_records(_log_path(args, out), [_record(args, "p_c_proxy", est, wall, p=th.p_hat)])
    print(f"p_c proxy (finite-size, not rigorous): {th.p_hat:.4f}")
    return 0


def cmd_oracle_check(args) -> int:
    p_list = [float(x) for x in args.p_list.split(",") if x]
    rows = []
    failures = 0
    t0 = time.monotonic()
    for graph in oracle.corpus():
        arrays = tiny_graph_arrays(graph)
        exact = {p: oracle.exact_two_point_all(graph, p) for p in p_list}
        for p in p_list:
            hits = estimate_connectivity(arrays, p, args.samples, args.seed, args.threads)
            for v in range(graph.n_vertices):
                est = binomial_estimate(int(hits[v]), args.samples)
                diff = abs(est.estimate - exact[p][v])
                ok = diff <= 3.0 * max(est.stderr, 1e-12)
                failures += not ok
                rows.append([graph.name, p, v, exact[p][v], est.estimate, est.stderr, int(ok)])
    wall = int((time.monotonic() - t0) * 1000)
    out = _out_path(args, "oracle_check.csv")
    write_csv(out, ["graph", "p", "target", "exact", "mc", "sigma", "ok"], rows)
    write_sidecar(out, "oracle-check", _params(args))
    est = EstimateWithCI(float(failures), 0.0, 0.0, 0.0, len(rows))
    append_records(_log_path(args, out), [_record(args, "oracle_check_failures", est, wall, p=math.nan)])
    print(f"oracle check: {len(rows) - failures}/{len(rows)} comparisons within 3 sigma")
    if failures:
        print(f"{failures} mismatches beyond 3 sigma", file=sys.stderr)
        return EXIT_MISMATCH
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, sys.argv[1:] if argv is None else list(argv))
        if not hasattr(args, "p"):
            args.p = math.nan
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except series.SeriesDivergence as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, estimators.InsufficientSignal) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
