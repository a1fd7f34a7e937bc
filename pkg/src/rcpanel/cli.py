"""Command-line entry point: ``rcpanel <subcommand> [flags]``.

Exit codes: 0 on success, 2 on usage errors (bad flags or parameters), 1 on
numerical failures.  Any subcommand accepts ``--config FILE``; the section
named after the subcommand supplies flag defaults (``key = value``, keys
spelled like the flags without leading dashes).  Flags given on the command
line win.  ``experiment`` instead reads its whole spec from the
``[experiment]`` section (see :func:`rcpanel.montecarlo.spec_from_config`).
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, estimators, intermediate, limit_laws, montecarlo, stable_dist
from .errors import InvalidParameter, RCPanelError
from .panel_model import read_panel_csv, simulate_panel, write_panel_csv

__all__ = ["build_parser", "main", "render_svg"]

MIXING_GRAMMAR = "beta2:ALPHA,BETA | degenerate:A0"
INNOVATION_GRAMMAR = "gaussian | student:NU | rademacher"
STATISTIC_NAMES = {"cross": "CrossCov", "temporal": "TemporalCov", "iso": "TemporalCov",
                   "mean": "Mean"}
GLOBAL_DEFAULTS = {"seed": 0, "threads": 0, "out": None, "format": "json", "config": None}


# ---------------------------------------------------------------------------
# Flag types


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer in [0, 2^64), got {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"expected an integer in [0, 2^64), got {text!r}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("expected a nonnegative integer")
    return v


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def _mixing(text: str):
    try:
        return montecarlo.parse_mixing(text)
    except (InvalidParameter, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"{exc}; expected {MIXING_GRAMMAR}")


def _innovation(text: str):
    try:
        return montecarlo.parse_innovation(text)
    except (InvalidParameter, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"{exc}; expected {INNOVATION_GRAMMAR}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


# ---------------------------------------------------------------------------
# Parser


def _global_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("global flags")
    g.add_argument("--seed", type=_seed, default=argparse.SUPPRESS,
                   help="root seed, 64-bit unsigned (default 0)")
    g.add_argument("--threads", type=_nonneg_int, default=argparse.SUPPRESS,
                   help="thread budget, 0 = all cores (default 0)")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output path prefix")
    g.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS,
                   help="output format (default json)")
    g.add_argument("--config", default=argparse.SUPPRESS,
                   help="INI file; the section named after the subcommand sets flag defaults")


def _panel_flags(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--N", type=_pos_int, required=required, help="number of rows")
    p.add_argument("--n", type=_pos_int, required=required, help="number of columns")
    p.add_argument("--mixing", type=_mixing, default=montecarlo.parse_mixing("beta2:2,2.5"),
                   help=f"law of a: {MIXING_GRAMMAR} (a^2 ~ Beta(ALPHA, BETA)); default beta2:2,2.5")
    p.add_argument("--innovation", type=_innovation, default=montecarlo.parse_innovation("gaussian"),
                   help=f"innovation law: {INNOVATION_GRAMMAR}; default gaussian")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rcpanel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rcpanel {__version__}")
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", required=True)

    p = sub.add_parser("simulate", help="simulate a panel; writes PREFIX.csv and PREFIX.json")
    _panel_flags(p, True)

    p = sub.add_parser("cov", help="sample covariance gamma_hat(t, s)")
    p.add_argument("--in", dest="input", help="panel CSV written by simulate")
    _panel_flags(p, False)
    p.add_argument("--t", type=int, default=0, help="temporal lag (default 0)")
    p.add_argument("--s", type=int, default=0, help="cross-sectional lag (default 0)")

    p = sub.add_parser("ci", help="confidence interval for gamma(t)")
    p.add_argument("--in", dest="input", help="panel CSV written by simulate")
    _panel_flags(p, False)
    p.add_argument("--t", type=_nonneg_int, default=0, help="temporal lag (default 0)")
    p.add_argument("--level", type=float, default=0.9, help="confidence level (default 0.9)")
    p.add_argument("--mode", choices=estimators.CI_MODES, default="Gaussian")
    p.add_argument("--beta", type=float, help="plug-in tail exponent (needs --psi)")
    p.add_argument("--psi", type=float, help="plug-in psi(1) (needs --beta)")
    p.add_argument("--u0", type=float, default=0.1, help="tail-estimation threshold (default 0.1)")

    p = sub.add_parser("limits", help="regime, normalization and limit law")
    p.add_argument("--statistic", choices=tuple(STATISTIC_NAMES), required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--rho", type=float, required=True, help="growth exponent, N ~ c n^rho")
    p.add_argument("--c", type=float, default=1.0, help="growth constant (default 1)")
    p.add_argument("--psi1", type=float, help="psi(1); fills the scale constants")
    p.add_argument("--mixing", type=_mixing, help=f"mixing law ({MIXING_GRAMMAR}) for "
                   "expectation-valued variances")
    p.add_argument("--t", type=_nonneg_int, default=0, help="temporal lag (default 0)")

    p = sub.add_parser("stable", help="stable law density, cdf, quantile or samples")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--skew", type=float, default=0.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--location", type=float, default=0.0)
    q = p.add_mutually_exclusive_group(required=True)
    q.add_argument("--pdf", type=_floats, metavar="X[,X...]")
    q.add_argument("--cdf", type=_floats, metavar="X[,X...]")
    q.add_argument("--quantile", type=_floats, metavar="P[,P...]")
    q.add_argument("--sample", type=_pos_int, metavar="K")

    p = sub.add_parser("intermediate", help="sample the intermediate Poisson processes")
    p.add_argument("--kind", choices=("cross", "iso"), required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--psi1", type=float, default=1.0)
    p.add_argument("--taus", type=_floats, default=[1.0], help="comma-separated times")
    p.add_argument("--reps", type=_pos_int, default=100)
    p.add_argument("--delta", type=float,
                   help="lower box cutoff; with --xmax, truncates the cross process "
                        "(default: untruncated for 1 < beta < 3/2, else 1e-9)")
    p.add_argument("--xmax", type=float, help="upper box cutoff (default 1e5)")
    p.add_argument("--h", type=float, default=intermediate.DEFAULT_H, help="O-U grid step")
    p.add_argument("--horizon", type=float, help="grid horizon (default max(taus))")

    p = sub.add_parser("experiment", help="Monte Carlo experiment from a config file")
    p.add_argument("--reps", type=_pos_int, help="override the replication count")

    p = sub.add_parser("figure1", help="lag-zero autocovariance density experiment")
    p.add_argument("--beta", type=float, default=2.5, help="default 2.5")
    p.add_argument("--alpha", type=float, default=2.0, help="a^2 ~ Beta(alpha, beta); default 2")
    p.add_argument("--N", type=_pos_int, default=2000, help="default 2000")
    p.add_argument("--n", type=_pos_int, default=500, help="default 500")
    p.add_argument("--reps", type=_pos_int, default=500, help="default 500")

    for sp in sub.choices.values():
        _global_flags(sp)
    parser._rcpanel_subparsers = sub.choices
    return parser


def _config_defaults(parser: argparse.ArgumentParser, argv) -> None:
    """Apply ``[subcommand]`` defaults from ``--config`` before the real parse."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in parser._rcpanel_subparsers), None)
    if known.config is None or command is None or command == "experiment":
        return
    cp = configparser.ConfigParser()
    if not cp.read(known.config):
        parser.error(f"argument --config: cannot read {known.config}")
    if command not in cp:
        return
    sp = parser._rcpanel_subparsers[command]
    actions = {a.dest: a for a in sp._actions}
    values = dict(cp[command])
    unknown = set(values) - set(actions)
    if unknown:
        sp.error(f"argument --config: unknown keys {sorted(unknown)} in [{command}]")
    for key, text in values.items():
        action = actions[key]
        action.required = False
        action.default = action.type(text) if action.type else text


def _parse(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    _config_defaults(parser, argv)
    args = parser.parse_args(argv)
    args.given = {k for k in GLOBAL_DEFAULTS if hasattr(args, k)}
    for k, v in GLOBAL_DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    return args


# ---------------------------------------------------------------------------
# Output helpers


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _dumps(obj) -> str:
    return json.dumps(montecarlo.json_safe(obj), indent=2, default=_json_default)


def _meta(args, params: dict) -> dict:
    return {"version": __version__, "seed": args.seed, "threads": args.threads,
            "command": args.command, "params": params}


def _emit_record(args, record: dict, params: dict) -> None:
    """Print ``record``; with ``--out`` also write it plus a JSON sidecar."""
    if args.format == "csv":
        keys = list(record)
        text = ",".join(keys) + "\n" + ",".join(_csv_cell(record[k]) for k in keys) + "\n"
    else:
        text = _dumps(record) + "\n"
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        if args.format == "csv":
            out.with_name(out.name + ".csv").write_text(text)
            out.with_name(out.name + ".json").write_text(_dumps(_meta(args, params)))
        else:
            out.with_name(out.name + ".json").write_text(
                _dumps({"result": record, **_meta(args, params)}))


def _csv_cell(v) -> str:
    if isinstance(v, (dict, list)):
        return json.dumps(json.dumps(v, default=_json_default))
    return "" if v is None else str(v)


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def render_svg(path, x, series: dict, title: str = "", width: int = 640,
               height: int = 400) -> Path:
    """Minimal line plot of ``series`` (name -> y values) against ``x``."""
    x = np.asarray(x, dtype=float)
    ml, mr, mt, mb = 60, 20, 30, 40
    pw, ph = width - ml - mr, height - mt - mb
    ys = [np.asarray(y, dtype=float) for y in series.values() if len(y) == len(x)]
    finite = np.concatenate([y[np.isfinite(y)] for y in ys]) if ys else np.array([0.0, 1.0])
    x0, x1 = (float(x.min()), float(x.max())) if x.size else (0.0, 1.0)
    y0, y1 = 0.0, float(finite.max()) if finite.size else 1.0
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0
    y1 *= 1.05

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif" font-size="11">',
             f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    if title:
        parts.append(f'<text x="{width / 2}" y="18" text-anchor="middle">{title}</text>')
    for v in np.linspace(x0, x1, 5):
        parts.append(f'<text x="{px(v):.1f}" y="{mt + ph + 16}" text-anchor="middle">{v:.3g}</text>')
    for v in np.linspace(y0, y1, 5):
        parts.append(f'<text x="{ml - 6}" y="{py(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    k = 0
    for name, y in series.items():
        y = np.asarray(y, dtype=float)
        if len(y) != len(x):
            continue
        ok = np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        c = colors[k % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{ml + pw - 8}" y="{mt + 16 + 14 * k}" text-anchor="end" '
                     f'fill="{c}">{name}</text>')
        k += 1
    parts.append("</svg>\n")
    path = Path(path)
    path.write_text("\n".join(parts))
    return path


# ---------------------------------------------------------------------------
# Subcommands


def _panel_params(args) -> dict:
    return {"N": args.N, "n": args.n, "mixing": args.mixing.to_dict(),
            "innovation": args.innovation.to_dict()}


def _load_or_simulate(args):
    if args.input:
        return read_panel_csv(args.input), {"input": str(args.input)}
    if args.N is None or args.n is None:
        raise InvalidParameter("give --in PATH or both --N and --n")
    panel = simulate_panel(args.N, args.n, args.mixing, args.innovation, args.seed, args.threads)
    return panel, _panel_params(args)


def cmd_simulate(args) -> int:
    panel = simulate_panel(args.N, args.n, args.mixing, args.innovation, args.seed, args.threads)
    csv_path, side = write_panel_csv(panel, args.out or "panel")
    meta = json.loads(side.read_text())
    meta.update({"threads": args.threads, "command": "simulate"})
    side.write_text(_dumps(meta))
    sys.stdout.write(_dumps({"panel": str(csv_path), "sidecar": str(side)}) + "\n")
    return 0


def cmd_cov(args) -> int:
    panel, params = _load_or_simulate(args)
    g = estimators.sample_cov(panel, (args.t, args.s))
    N, n = panel.values.shape
    params.update({"t": args.t, "s": args.s})
    _emit_record(args, {"t": args.t, "s": args.s, "gamma_hat": g, "n": n, "N": N}, params)
    return 0


def cmd_ci(args) -> int:
    if (args.beta is None) != (args.psi is None):
        raise InvalidParameter("--beta and --psi must be given together")
    panel, params = _load_or_simulate(args)
    ci = estimators.confidence_interval_gamma(panel, args.t, args.level, args.mode, args.beta,
                                              args.psi, args.u0)
    params.update({"t": args.t, "level": args.level, "mode": args.mode, "beta": args.beta,
                   "psi": args.psi, "u0": args.u0})
    _emit_record(args, {"lower": ci.lower, "upper": ci.upper, "level": ci.level, "mode": ci.mode,
                        "beta_hat": ci.beta, "psi_hat": ci.psi, "center": ci.center,
                        "regime": ci.regime}, params)
    return 0


def cmd_limits(args) -> int:
    case = limit_laws.classify(STATISTIC_NAMES[args.statistic], args.beta,
                               limit_laws.GrowthRule(args.rho, args.c), psi1=args.psi1,
                               mixing=args.mixing, t=args.t)
    params = {"statistic": args.statistic, "beta": args.beta, "rho": args.rho, "c": args.c,
              "psi1": args.psi1, "t": args.t,
              "mixing": None if args.mixing is None else args.mixing.to_dict()}
    record = case.to_dict()
    _emit_record(args, _flatten(record) if args.format == "csv" else record, params)
    return 0


def cmd_stable(args) -> int:
    params = stable_dist.StableParams(args.alpha, args.skew, args.scale, args.location)
    if args.sample is not None:
        what, xs = "sample", None
        vals = np.atleast_1d(stable_dist.sample(params, args.sample, rng=args.seed))
    elif args.pdf is not None:
        what, xs = "pdf", args.pdf
        vals = np.atleast_1d(stable_dist.pdf(params, np.asarray(xs)))
    elif args.cdf is not None:
        what, xs = "cdf", args.cdf
        vals = np.atleast_1d(stable_dist.cdf(params, np.asarray(xs)))
    else:
        what, xs = "quantile", args.quantile
        vals = np.array([stable_dist.quantile(params, p) for p in xs])
    if args.format == "json" and args.out is None and what != "sample":
        text = "\n".join(f"{float(v):.17g}" for v in vals) + "\n"
    elif args.format == "json":
        text = _dumps({"params": params.to_dict(), what: vals, "at": xs}) + "\n"
    else:
        head = "value\n" if xs is None else "at,value\n"
        rows = (f"{float(v)!r}" if xs is None else f"{float(a)!r},{float(v)!r}"
                for a, v in zip(xs if xs is not None else vals, vals))
        text = head + "\n".join(rows) + "\n"
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        ext = ".csv" if args.format == "csv" else ".values.json"
        out.with_name(out.name + ext).write_text(text)
        out.with_name(out.name + ".json").write_text(
            _dumps(_meta(args, {"stable": params.to_dict(), "quantity": what, "at": xs})))
    return 0


def cmd_intermediate(args) -> int:
    taus = sorted(args.taus)
    if args.delta is None and args.xmax is None:
        trunc = None if args.kind == "cross" else intermediate.PoissonTruncation()
    else:
        trunc = intermediate.PoissonTruncation(
            intermediate.DEFAULT_DELTA if args.delta is None else args.delta,
            intermediate.DEFAULT_X_MAX if args.xmax is None else args.xmax)
    horizon = args.horizon if args.horizon is not None else max(max(taus), args.h)
    grid = intermediate.OUGrid(args.h, horizon)
    fn = intermediate.simulate_Z_cross if args.kind == "cross" else intermediate.simulate_Z_iso
    z = fn(args.beta, args.psi1, taus, trunc, grid, args.seed, args.reps, args.threads)
    prefix = Path(args.out or f"intermediate_{args.kind}")
    csv_path = prefix.with_name(prefix.name + ".csv")
    with open(csv_path, "w") as fh:
        fh.write("rep,tau,value\n")
        for r in range(z.reps):
            for j, tau in enumerate(z.taus):
                fh.write(f"{r},{float(tau)!r},{float(z.values[r, j])!r}\n")
    params = {"kind": args.kind, "beta": args.beta, "psi1": args.psi1, "taus": list(z.taus),
              "reps": args.reps, "delta": z.config["truncation"]["delta"],
              "x_max": z.config["truncation"]["x_max"], "h": args.h,
              "horizon": horizon}
    meta = _meta(args, params)
    meta["diagnostics"] = z.config
    side = prefix.with_name(prefix.name + ".json")
    side.write_text(_dumps(meta))
    summary = {"csv": str(csv_path), "sidecar": str(side),
               "mean": z.values.mean(axis=0), "var": z.values.var(axis=0, ddof=1)
               if z.reps > 1 else [0.0] * len(z.taus)}
    sys.stdout.write(_dumps(summary) + "\n")
    return 0


def _write_result(args, result, out_dir: Path, header, svg_name: str, title: str) -> dict:
    extra = {"threads": args.threads, "command": args.command}
    paths = montecarlo.write_experiment(result, out_dir, extra, header)
    series = {"kde": result.density}
    if result.reference_density is not None:
        series["limit density"] = result.reference_density
    paths["svg"] = render_svg(out_dir / svg_name, result.grid, series, title)
    return {k: str(v) for k, v in paths.items()}


def cmd_experiment(args) -> int:
    if args.config is None:
        raise InvalidParameter("experiment needs --config FILE")
    overrides = {"seed": args.seed if "seed" in args.given else None,
                 "threads": args.threads if "threads" in args.given else None,
                 "reps": args.reps}
    spec, outputs = montecarlo.spec_from_config(args.config, overrides=overrides)
    out_dir = Path(args.out or outputs.get("prefix", "experiment"))
    result = montecarlo.run(spec)
    paths = _write_result(args, result, out_dir, montecarlo.KDE_HEADER, "kde.svg",
                          f"{spec.statistic} experiment")
    sys.stdout.write(_dumps({"ks": result.ks, "moments": result.moments,
                             "runtime": result.runtime, "files": paths}) + "\n")
    return 0


def cmd_figure1(args) -> int:
    result = montecarlo.figure1(args.beta, args.N, args.n, args.reps, args.seed, args.alpha,
                                args.threads)
    out_dir = Path(args.out or "figure1")
    paths = _write_result(args, result, out_dir, montecarlo.FIGURE1_HEADER, "figure1.svg",
                          f"lag-zero autocovariance, beta={args.beta:g}")
    sys.stdout.write(_dumps({"ks": result.ks, "moments": result.moments,
                             "runtime": result.runtime, "files": paths}) + "\n")
    return 0


COMMANDS = {"simulate": cmd_simulate, "cov": cmd_cov, "ci": cmd_ci, "limits": cmd_limits,
            "stable": cmd_stable, "intermediate": cmd_intermediate,
            "experiment": cmd_experiment, "figure1": cmd_figure1}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _parse(parser, argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    try:
        return COMMANDS[args.command](args)
    except InvalidParameter as exc:
        sp = parser._rcpanel_subparsers[args.command]
        sys.stderr.write(sp.format_usage())
        sys.stderr.write(f"rcpanel {args.command}: error: {type(exc).__name__}: {exc}\n")
        return 2
    except (RCPanelError, ArithmeticError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"rcpanel {args.command}: numerical failure: "
                         f"{type(exc).__name__}: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"rcpanel {args.command}: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
