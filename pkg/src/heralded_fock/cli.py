"""Command-line interface: every computation, machine-readable output.

Subcommands: detector-response, posterior, herald-stats, qmap, figure,
mc-validate, thresholds.  Output is JSON ({"meta": ..., "data": ...},
self-describing and sufficient to rerun the command) or CSV (header row,
17 significant digits).  Exit codes: 0 success, 2 parameter error,
3 numerical-accuracy error, 4 insufficient Monte-Carlo statistics.

eta may be given as a decimal ("0.66") or as an exact ratio ("33/50");
the ratio form lets small-case detector-response queries run through the
exact rational oracle.  A plain key = value config file can supply
defaults; explicit flags override it.
"""

import argparse
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_G_MAX,
    DEFAULT_GRID_STEPS,
    figure_data,
    grid_axis,
    q_map,
    qmap_to_dict,
    threshold_eta,
)
from .closed_form import cond_moments_multimode
from .detector import DetectorConfig, det_prob, det_prob_exact, det_response_band
from .errors import (
    InfeasibleEventError,
    InsufficientStatisticsError,
    NumericalAccuracyError,
    ThresholdNotFoundError,
    UndefinedQError,
)
from .herald import herald_state, posterior
from .mc import McConfig, simulate_detection, simulate_herald
from .source import DEFAULT_TRUNCATION_EPS, SourceConfig

_EXACT_ORACLE_MAX_BINS = 8
_EXACT_ORACLE_MAX_N = 8


def _parse_eta(text: str) -> tuple[float, Fraction | None]:
    if "/" in text:
        try:
            ratio = Fraction(text)
        except ZeroDivisionError as exc:
            raise ValueError(f"invalid efficiency ratio {text!r}") from exc
        return float(ratio), ratio
    return float(text), None


def _detector(args) -> DetectorConfig:
    eta, ratio = _parse_eta(args.eta)
    return DetectorConfig(args.m, eta, efficiency_ratio=ratio)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    if value is None:
        return ""
    return str(value)


def _emit(args, meta: dict, columns: list[str], rows: list, extra: dict | None = None):
    out = open(args.output, "w", encoding="utf-8", newline="\n") if args.output else sys.stdout
    try:
        if args.format == "csv":
            out.write(",".join(columns) + "\n")
            for row in rows:
                out.write(",".join(_fmt(v) for v in row) + "\n")
        else:
            payload = {"meta": meta, "data": [dict(zip(columns, row)) for row in rows]}
            if extra:
                payload.update(extra)
            json.dump(payload, out, indent=2, allow_nan=True)
            out.write("\n")
    finally:
        if args.output:
            out.close()


def _meta(args, command: str, **params) -> dict:
    return {
        "command": command,
        "version": __version__,
        "parameters": params,
        "format": args.format,
    }


def cmd_detector_response(args) -> int:
    det = _detector(args)
    meta = _meta(args, "detector-response", m=args.m, eta=args.eta, N=args.N,
                 band=args.band)
    if args.band is not None:
        rows = det_response_band(det, args.band)
        _emit(args, meta, ["N", "mean_clicks", "std_clicks"], rows)
        return 0
    exact = (
        det.efficiency_ratio is not None
        and det.bins <= _EXACT_ORACLE_MAX_BINS
        and args.N <= _EXACT_ORACLE_MAX_N
    )
    meta["method"] = "exact-rational" if exact else "analytic"
    rows = []
    for n in range(min(args.N, det.bins) + 1):
        p = float(det_prob_exact(det, n, args.N)) if exact else det_prob(det, n, args.N)
        rows.append((n, p))
    _emit(args, meta, ["n", "p"], rows)
    return 0


def cmd_posterior(args) -> int:
    det = _detector(args)
    src = SourceConfig(args.g, args.mu)
    post = posterior(det, src, args.n_i, eps=args.eps)
    meta = _meta(args, "posterior", m=args.m, eta=args.eta, g=args.g, mu=args.mu,
                 n_i=args.n_i, eps=args.eps)
    meta["tail_bound"] = post.tail_bound
    _emit(args, meta, ["n_s", "p"], list(post.items()))
    return 0


def cmd_herald_stats(args) -> int:
    det = _detector(args)
    src = SourceConfig(args.g, args.mu)
    state = herald_state(det, src, args.n_i, eps=args.eps)
    closed_mean, closed_var = cond_moments_multimode(det, src, args.n_i)
    meta = _meta(args, "herald-stats", m=args.m, eta=args.eta, g=args.g,
                 mu=args.mu, n_i=args.n_i, eps=args.eps)
    meta["tail_bound"] = state.posterior.tail_bound
    columns = [
        "n_i", "ml_estimate", "ml_mse", "cond_mean", "cond_var",
        "closed_mean", "closed_var", "q", "herald_prob",
    ]
    row = (
        state.n_i, state.ml_estimate, state.ml_mse, state.cond_mean,
        state.cond_var, closed_mean, closed_var, state.q, state.herald_prob,
    )
    _emit(args, meta, columns, [row])
    return 0


def cmd_qmap(args) -> int:
    grid = q_map(
        args.m,
        args.mu,
        args.target,
        g_axis=grid_axis(args.g_max, args.steps),
        eta_axis=grid_axis(1.0, args.steps),
        workers=args.threads,
    )
    meta = _meta(args, "qmap", m=args.m, mu=args.mu, target=args.target,
                 steps=args.steps, g_max=args.g_max)
    if args.format == "json":
        payload = {"meta": meta, "data": qmap_to_dict(grid)}
        text = json.dumps(payload, indent=2)
        if args.output:
            with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text + "\n")
        else:
            sys.stdout.write(text + "\n")
        return 0
    rows = []
    for i, eta in enumerate(grid.eta_axis):
        for j, g in enumerate(grid.g_axis):
            c = grid.cells[i][j]
            rows.append((g, eta, int(c.feasible), c.n_i, c.q, c.herald_prob))
    _emit(args, meta, ["g", "eta", "feasible", "n_i", "q", "herald_prob"], rows)
    return 0


def cmd_figure(args) -> int:
    params = {}
    for key in ("eta", "g", "mu", "n_i", "target", "steps", "g_max"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    if "eta" in params:
        params["eta"] = _parse_eta(params["eta"])[0]
    data = figure_data(args.which, **params)
    meta = _meta(args, "figure", which=args.which, **params)
    if args.which in ("fig5", "fig6"):
        payload = {"meta": meta, "data": data}
        text = json.dumps(payload, indent=2)
        if args.output:
            with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text + "\n")
        else:
            sys.stdout.write(text + "\n")
        return 0
    extra = {k: v for k, v in data.items() if k not in ("columns", "rows")}
    _emit(args, meta, data["columns"], data["rows"], extra=extra or None)
    return 0


def cmd_thresholds(args) -> int:
    grid = q_map(
        args.m,
        args.mu,
        args.target,
        g_axis=grid_axis(args.g_max, args.steps),
        eta_axis=grid_axis(1.0, args.steps),
        workers=args.threads,
    )
    eta_star = threshold_eta(grid, args.rate)
    meta = _meta(args, "thresholds", m=args.m, mu=args.mu, target=args.target,
                 rate=args.rate, steps=args.steps, g_max=args.g_max)
    _emit(args, meta, ["target", "mu", "rate", "eta_threshold"],
          [(args.target, args.mu, args.rate, eta_star)])
    return 0


def cmd_mc_validate(args) -> int:
    det = _detector(args)
    src = SourceConfig(args.g, args.mu)
    cfg = McConfig(trials=args.trials, seed=args.seed, det=det, src=src)
    rows = []

    def add(name, analytic, empirical, stderr):
        z = (empirical - analytic) / stderr if stderr > 0 else math.nan
        rows.append((name, analytic, empirical, stderr, z))

    if args.N is not None:
        emp = simulate_detection(cfg, args.N)
        for n in range(emp.masses.size):
            expected = det_prob(det, n, args.N)
            if expected * args.trials >= 10:
                add(f"p_det({n}|{args.N})", expected, float(emp.masses[n]),
                    math.sqrt(expected * (1 - expected) / args.trials))
    if args.n_i is not None:
        emp_post, rate, rate_se = simulate_herald(cfg, args.n_i)
        state = herald_state(det, src, args.n_i)
        add("herald_prob", state.herald_prob, rate, rate_se)
        n_kept = emp_post.trials
        add("cond_mean", state.cond_mean, emp_post.mean(),
            math.sqrt(state.cond_var / n_kept))
        post = state.posterior
        m4 = float(((post.support - state.cond_mean) ** 4) @ post.masses)
        var_of_var = max(m4 - state.cond_var**2, 0.0) / n_kept
        add("cond_var", state.cond_var, emp_post.variance(), math.sqrt(var_of_var))
    if args.N is None and args.n_i is None:
        raise ValueError("mc-validate needs --N (detection) and/or --n-i (herald)")
    meta = _meta(args, "mc-validate", m=args.m, eta=args.eta, g=args.g,
                 mu=args.mu, N=args.N, n_i=args.n_i, trials=args.trials,
                 seed=args.seed)
    _emit(args, meta, ["quantity", "analytic", "empirical", "stderr", "z"], rows)
    return 0


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", default=None, help="destination path (default stdout)")
    p.add_argument("--config", default=None, help="key = value defaults file")
    p.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("HERALD_THREADS", "1")),
        help="worker cap for grid sweeps (env HERALD_THREADS)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="herald",
        description="Heralded photon-number-state statistics (OPA + TMD).",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detector-response", help="TMD click distribution / bands")
    p.add_argument("--m", type=int, required=True, help="splitter stages (M = 2^m)")
    p.add_argument("--eta", required=True, help="efficiency, decimal or ratio")
    p.add_argument("--N", type=int, default=None, help="incident photon number")
    p.add_argument("--band", type=int, default=None, help="emit mean/std for N = 0..BAND")
    _add_common(p)
    p.set_defaults(func=cmd_detector_response)

    p = sub.add_parser("posterior", help="signal photon-number posterior")
    _herald_params(p)
    _add_common(p)
    p.set_defaults(func=cmd_posterior)

    p = sub.add_parser("herald-stats", help="full heralded-state summary")
    _herald_params(p)
    _add_common(p)
    p.set_defaults(func=cmd_herald_stats)

    p = sub.add_parser("qmap", help="Mandel-Q map over (g, eta)")
    _grid_params(p)
    _add_common(p)
    p.set_defaults(func=cmd_qmap)

    p = sub.add_parser("figure", help="datasets behind the result figures")
    p.add_argument("--which", required=True, choices=("fig2", "fig3", "fig4", "fig5", "fig6"))
    p.add_argument("--eta", default=None)
    p.add_argument("--g", type=float, default=None)
    p.add_argument("--mu", type=int, default=None)
    p.add_argument("--n-i", dest="n_i", type=int, default=None)
    p.add_argument("--target", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--g-max", dest="g_max", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("thresholds", help="minimum eta for sub-Poissonian output")
    _grid_params(p)
    p.add_argument("--rate", type=float, default=0.05, help="required herald rate")
    _add_common(p)
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("mc-validate", help="Monte-Carlo cross-checks")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--eta", required=True)
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--mu", type=int, default=1)
    p.add_argument("--N", type=int, default=None, help="check detection at this N")
    p.add_argument("--n-i", dest="n_i", type=int, default=None, help="check herald at this n_i")
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=20260824)
    _add_common(p)
    p.set_defaults(func=cmd_mc_validate)

    return parser


def _herald_params(p: argparse.ArgumentParser):
    p.add_argument("--m", type=int, required=True, help="splitter stages (M = 2^m)")
    p.add_argument("--eta", required=True, help="efficiency, decimal or ratio")
    p.add_argument("--g", type=float, required=True, help="OPA gain per mode")
    p.add_argument("--mu", type=int, default=1, help="mode count")
    p.add_argument("--n-i", dest="n_i", type=int, required=True, help="idler clicks")
    p.add_argument("--eps", type=float, default=DEFAULT_TRUNCATION_EPS)


def _grid_params(p: argparse.ArgumentParser):
    p.add_argument("--m", type=int, required=True, help="splitter stages (M = 2^m)")
    p.add_argument("--mu", type=int, default=1)
    p.add_argument("--target", type=int, required=True, help="target n_s^ml")
    p.add_argument("--steps", type=int, default=DEFAULT_GRID_STEPS)
    p.add_argument("--g-max", dest="g_max", type=float, default=DEFAULT_G_MAX)


def _apply_config(argv: list[str]) -> list[str]:
    """Inject key = value pairs from --config as flags ahead of explicit ones.

    Explicit flags win because argparse takes the last occurrence.
    """
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        return argv
    path = argv[idx + 1]
    injected = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            key = key.strip().replace("_", "-")
            value = value.strip()
            if not key or not value:
                continue
            injected += [f"--{key}", value]
    # Insert after the subcommand token (the first non-flag argument).
    for i, tok in enumerate(argv):
        if not tok.startswith("-"):
            return argv[: i + 1] + injected + argv[i + 1 :]
    return argv + injected


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config(argv)
        parser = build_parser()
        args = parser.parse_args(argv)
        if args.command == "detector-response" and args.N is None and args.band is None:
            raise ValueError("detector-response needs --N or --band")
        return args.func(args)
    except (NumericalAccuracyError, InfeasibleEventError, UndefinedQError) as exc:
        print(f"error: numerical-accuracy: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError, ThresholdNotFoundError) as exc:
        print(f"error: parameter: {exc}", file=sys.stderr)
        return 2
    except InsufficientStatisticsError as exc:
        print(
            f"error: insufficient-statistics: {exc} "
            f"(acceptance_rate={exc.acceptance_rate})",
            file=sys.stderr,
        )
        return 4


if __name__ == "__main__":
    sys.exit(main())
