"""Command-line front end.

Subcommands: ``fit``, ``reserve``, ``simulate``, ``chainladder``, ``gof``.
Options may also come from a flat ``key = value`` config file given with
``--config``; flags on the command line win. Exit codes: 0 success, 2 I/O or
input data error, 3 estimation failure, 4 invalid configuration, 5 CLS hit the
iteration cap without converging.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .distribution import DEFAULT_B, QUANTILES, summarize
from .chain_ladder import ChainLadderError, bootstrap_chain_ladder, fit_chain_ladder
from .cls import ClsConfig, EstimationError, fit_cls
from .cmv import MEAN_FAMILIES, VARIANCE_FAMILIES, CmvSpec, ModelError
from .rng import RngStream
from .triangle import TriangleError, TriangleKind, format_triangle, load_triangle

EXIT_OK, EXIT_IO, EXIT_ESTIMATION, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 2, 3, 4, 5

log = logging.getLogger("cmvreserve")


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    return f"{float(x):.17g}"


def read_config(path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


# -- argument parsing -----------------------------------------------------------

def _common(p: argparse.ArgumentParser, triangle=True):
    p.add_argument("--config", help="flat key = value config file")
    if triangle:
        p.add_argument("--triangle", help="triangle CSV path")
        p.add_argument("--kind", default="cumulative", choices=[k.value for k in TriangleKind])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=1)


def _model(p: argparse.ArgumentParser):
    p.add_argument("--mean", default="sherman_exp", choices=sorted(MEAN_FAMILIES))
    p.add_argument("--variance", default="exp_sqrt", choices=sorted(VARIANCE_FAMILIES))
    p.add_argument("--max-iterations", type=int, default=50)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--initial-beta", help="comma-separated starting variance parameters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmvreserve", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="CLS fit of the CMV model")
    _common(p)
    _model(p)

    p = sub.add_parser("reserve", help="bootstrap reserve distribution (CLSC and/or BCL)")
    _common(p)
    _model(p)
    p.add_argument("--copula", default="auto")
    p.add_argument("--bootstrap", type=int, default=DEFAULT_B)
    p.add_argument("--gof-replicates", type=int, default=1000)
    p.add_argument("--method", default="both", choices=["clsc", "bcl", "both"])
    p.add_argument("--independent-rows", action="store_true")
    p.add_argument("--no-process-variance", action="store_true")

    p = sub.add_parser("simulate", help="simulate triangles or run the consistency study")
    _common(p, triangle=False)
    _model(p)
    p.add_argument("--study", action="store_true")
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--n", type=int, default=11)
    p.add_argument("--alpha", default="2,1")
    p.add_argument("--beta", default="100,0.5")
    p.add_argument("--copula", default="gumbel")
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--first-mean", type=float, default=1e5)
    p.add_argument("--first-var", type=float, default=1e5)
    p.add_argument("--error-marginal", default="normal", choices=["normal", "degenerate"])
    p.add_argument("--mode", default="conditional", choices=["conditional", "alternating"])

    p = sub.add_parser("chainladder", help="chain-ladder factors and optional BCL")
    _common(p)
    p.add_argument("--bootstrap", type=int, default=0)
    p.add_argument("--no-process-variance", action="store_true")

    p = sub.add_parser("gof", help="copula goodness-of-fit on CLS residuals")
    _common(p)
    _model(p)
    p.add_argument("--copula", default="auto")
    p.add_argument("--gof-replicates", type=int, default=1000)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            raise FileNotFoundError(f"cannot read config {args.config}: {exc}") from exc
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        # config values become defaults; explicit flags still override
        typed = {}
        for a in sub._actions:
            if a.dest in cfg:
                v = cfg[a.dest]
                if a.nargs == 0:
                    typed[a.dest] = v.lower() in ("1", "true", "yes", "on")
                else:
                    typed[a.dest] = a.type(v) if a.type else v
        sub.set_defaults(**typed)
        args = parser.parse_args(argv)
    return args


def _floats(s: str) -> tuple:
    try:
        return tuple(float(x) for x in s.split(","))
    except ValueError as exc:
        raise ConfigError(f"cannot parse parameter vector {s!r}") from exc


def _cls_config(args) -> ClsConfig:
    try:
        return ClsConfig(
            max_iterations=args.max_iterations,
            epsilon=args.epsilon,
            optimizer_restarts=args.restarts,
            initial_beta=_floats(args.initial_beta) if args.initial_beta else None,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _spec(args) -> CmvSpec:
    return CmvSpec(mean=args.mean, variance=args.variance)


def _load(args):
    if not args.triangle:
        raise ConfigError("--triangle is required")
    return load_triangle(args.triangle, args.kind)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8")


# -- subcommands ----------------------------------------------------------------

def cmd_fit(args) -> int:
    t = _load(args)
    spec = _spec(args)
    fit, trace = fit_cls(t, spec, _cls_config(args))
    out = _outdir(args)
    names = [f"alpha{k + 1}" for k in range(len(fit.alpha))] + [f"beta{k + 1}" for k in range(len(fit.beta))]
    vals = list(fit.alpha) + list(fit.beta)
    _write(out / "params.csv", "parameter,value\n" + "".join(f"{k},{fmt(v)}\n" for k, v in zip(names, vals)))
    _write(out / "residuals.csv", "i,j,residual\n" + "".join(
        f"{i},{j},{fmt(e)}\n" for (i, j), e in sorted(fit.residuals.items())))
    lines = ["iteration," + ",".join(names) + ",M_n,V_n"]
    for m, (a, b, mv, vv) in enumerate(trace.iterations, start=1):
        lines.append(",".join([str(m)] + [fmt(x) for x in (*a, *b, mv, vv)]))
    _write(out / "trace.csv", "\n".join(lines) + "\n")
    for w in trace.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(" ".join(f"{k}={fmt(v)}" for k, v in zip(names, vals)))
    return EXIT_OK if trace.converged else EXIT_NOT_CONVERGED


def select_copula(residuals, tags, replicates, rng, threads=1):
    """GoF over ``tags``; highest p-value wins, ties go to the earlier tag."""
    from .copula import gof_test

    results = [gof_test(residuals, tag, replicates, rng.split(k), threads=threads)
               for k, tag in enumerate(tags)]
    best = max(range(len(results)), key=lambda k: (results[k].p_value, -k))
    return results[best].family, results


def _copula_tags(choice: str):
    from .copula import FAMILIES

    if choice == "auto":
        return list(FAMILIES)
    if choice not in FAMILIES:
        raise ConfigError(f"unknown copula {choice!r}; expected auto or one of {FAMILIES}")
    return [choice]


TABLE_COLUMNS = ("Reserve", "Standard error", "95%-quantile", "99.5%-quantile")


def reserve_table(dists: dict) -> tuple[str, dict]:
    """Report CSV in the BCL/CLSC comparison layout plus a JSON-ready dict."""
    methods = list(dists)
    header = ["i"] + [f"{c} {m.upper()}" for c in TABLE_COLUMNS for m in methods] + [
        f"CoV {m.upper()}" for m in methods]
    summaries = {m: summarize(d) for m, d in dists.items()}
    lines = [",".join(header)]
    targets = [r.target for r in summaries[methods[0]]]
    q95, q995 = QUANTILES.index(0.95), QUANTILES.index(0.995)
    for k, target in enumerate(targets):
        cells = [target]
        for getter in (lambda r: r.mean, lambda r: r.se, lambda r: r.quantiles[q95],
                       lambda r: r.quantiles[q995]):
            cells += [fmt(getter(summaries[m][k])) for m in methods]
        cells += [fmt(summaries[m][k].cov) for m in methods]
        lines.append(",".join(cells))
    js = {
        m: [
            {"target": r.target, "mean": r.mean, "standard_error": r.se,
             "quantiles": {str(q): v for q, v in zip(QUANTILES, r.quantiles)},
             "cov_percent": r.cov, "quantile_method": "linear interpolation (type 7)"}
            for r in summaries[m]
        ]
        for m in methods
    }
    return "\n".join(lines) + "\n", js


def _write_replicates(out: Path, name: str, dist):
    years = sorted(dist.per_year)
    lines = [",".join([f"R{i}" for i in years] + ["total"])]
    lines += [",".join(fmt(v) for v in row) for row in dist.matrix()]
    _write(out / f"replicates_{name}.csv", "\n".join(lines) + "\n")
    _write(out / f"total_{name}.csv", "".join(f"{fmt(v)}\n" for v in dist.total))


def cmd_reserve(args) -> int:
    if args.bootstrap < 2:
        raise ConfigError("--bootstrap must be >= 2 for a reserve report")
    t = _load(args)
    rng = RngStream(args.seed)
    out = _outdir(args)
    dists = {}
    extra = {}
    if args.method in ("bcl", "both"):
        dists["bcl"] = bootstrap_chain_ladder(
            t, args.bootstrap, rng.split(1), process_variance=not args.no_process_variance,
            threads=args.threads)
    if args.method in ("clsc", "both"):
        from .bootstrap import bootstrap_reserves, naive_reserves
        from .copula import fit_copula

        tags = _copula_tags(args.copula)
        fit, trace = fit_cls(t, _spec(args), _cls_config(args))
        if len(tags) > 1:
            tag, gof = select_copula(fit.residuals, tags, args.gof_replicates, rng.split(2), args.threads)
            extra["gof"] = [{"family": g.family, "statistic": g.statistic, "p_value": g.p_value,
                             "gamma_hat": g.gamma_hat} for g in gof]
        else:
            tag = tags[0]
        cop = fit_copula(fit.residuals, tag)
        extra.update({
            "alpha": list(map(float, fit.alpha)), "beta": list(map(float, fit.beta)),
            "cls_converged": trace.converged, "copula": tag, "gamma_hat": cop.gamma_hat,
            "kendall_tau": cop.kendall_tau_sample,
            "naive_reserves": {str(i): r for i, r in naive_reserves(t, fit).items()},
        })
        d = bootstrap_reserves(t, fit, cop, args.bootstrap, rng.split(3),
                               independent_rows=args.independent_rows, threads=args.threads)
        extra["clamped_replications"] = d.flagged
        dists["clsc"] = d
    # BCL first, CLSC second, matching the comparison table
    dists = {m: dists[m] for m in ("bcl", "clsc") if m in dists}
    csv_text, js = reserve_table(dists)
    _write(out / "report.csv", csv_text)
    js["run"] = extra
    _write(out / "report.json", json.dumps(js, indent=2, sort_keys=True) + "\n")
    for m, d in dists.items():
        _write_replicates(out, m, d)
    sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .copula import CopulaFamily
    from .simulator import SimSpec, run_consistency_study, simulate_triangle

    try:
        spec = SimSpec(
            n=args.n, first_mean=args.first_mean, first_var=args.first_var, cmv=_spec(args),
            alpha=_floats(args.alpha), beta=_floats(args.beta), error_marginal=args.error_marginal,
            copula=CopulaFamily(args.copula, args.gamma), replications=args.replications,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _outdir(args)
    if args.study:
        rep = run_consistency_study(spec, _cls_config(args), workers=args.threads, mode=args.mode)
        _write(out / "study.csv", rep.to_csv())
        sys.stdout.write(rep.to_csv())
        return EXIT_OK
    width = len(str(spec.replications - 1))
    for r in range(spec.replications):
        t = simulate_triangle(spec, RngStream(spec.seed).split(r))
        _write(out / f"triangle_{r:0{width}d}.csv", format_triangle(t))
    return EXIT_OK


def cmd_chainladder(args) -> int:
    t = _load(args)
    cl = fit_chain_ladder(t)
    out = _outdir(args)
    lines = ["j,factor,sigma2"] + [
        f"{j},{fmt(f)},{fmt(s)}" for j, (f, s) in enumerate(zip(cl.factors, cl.sigma2), start=1)]
    _write(out / "factors.csv", "\n".join(lines) + "\n")
    lines = ["i,reserve"] + [f"{i},{fmt(r)}" for i, r in sorted(cl.point_reserves.items())]
    lines.append(f"total,{fmt(cl.total_reserve)}")
    _write(out / "chainladder.csv", "\n".join(lines) + "\n")
    sys.stdout.write("\n".join(lines) + "\n")
    if args.bootstrap:
        if args.bootstrap < 2:
            raise ConfigError("--bootstrap must be >= 2")
        d = bootstrap_chain_ladder(t, args.bootstrap, RngStream(args.seed).split(1),
                                   process_variance=not args.no_process_variance,
                                   threads=args.threads)
        csv_text, js = reserve_table({"bcl": d})
        _write(out / "report.csv", csv_text)
        _write(out / "report.json", json.dumps(js, indent=2, sort_keys=True) + "\n")
        _write_replicates(out, "bcl", d)
    return EXIT_OK


def cmd_gof(args) -> int:
    from .copula import fit_copula

    t = _load(args)
    fit, _ = fit_cls(t, _spec(args), _cls_config(args))
    tags = _copula_tags(args.copula)
    best, results = select_copula(fit.residuals, tags, args.gof_replicates,
                                  RngStream(args.seed).split(2), args.threads)
    tau = fit_copula(fit.residuals, tags[0]).kendall_tau_sample
    lines = ["family,gamma_hat,statistic,p_value,selected"] + [
        f"{g.family},{fmt(g.gamma_hat)},{fmt(g.statistic)},{fmt(g.p_value)},{int(g.family == best)}"
        for g in results]
    _write(_outdir(args) / "gof.csv", "\n".join(lines) + "\n")
    sys.stdout.write("\n".join(lines) + f"\n# kendall tau of consecutive residuals: {fmt(tau)}\n")
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "reserve": cmd_reserve,
    "simulate": cmd_simulate,
    "chainladder": cmd_chainladder,
    "gof": cmd_gof,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, TriangleError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ModelError, EstimationError, ChainLadderError, ArithmeticError) as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except ValueError as exc:
        # copula and optimizer failures surface as ValueError subclasses
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
