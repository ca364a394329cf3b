"""Command-line front end.

Subcommands ``fit``, ``diagnose``, ``risk``, ``price`` and ``simulate``
write CSV tables and a JSON report into ``--out-dir``. Exit status is 0 on
success and 2 on invalid input.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import ValidationError

from . import __version__
from .catalog import CatalogError, read_catalog
from .config import RunConfig, config_hash, load_config
from .diagnostics import (
    adjacent_pairs,
    default_threshold_grid,
    ks_uniformity,
    mean_excess_curve,
    qq_pp_data,
    stability_scan,
    write_csv,
)
from .distributions import DomainError, GpdParams
from .fitting import (
    ExcessSample,
    asymptotic_ci,
    fit_gpd,
    fit_poisson_intensity,
    gpd_loglik,
    profile_ci,
)
from .pointprocess import fit_pot, lr_test
from .portfolio import PortfolioError, portfolio_summary
from .reinsurance import price_summary, write_table
from .riskmeasures import TailModel, es, return_level_table, round_sig, var
from .simengine import run_simulations, write_event_log

DEFAULT_PERIODS = (10, 100, 200, 1000)
DEFAULT_LEVELS = (0.9, 0.99, 0.995, 0.999)
COUPLING_NOTE = (
    "all contracts are applied to one shared simulation of gross losses, "
    "so differences between contracts carry no simulation noise from the gross side"
)


class UsageError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an ISO date, got {text!r}") from None


def _header(seed: int | None, digest: str) -> dict:
    return {"tool": "lifecat", "version": __version__, "seed": seed, "config_hash": digest}


def _args_digest(args: argparse.Namespace) -> str:
    items = {k: (str(v) if isinstance(v, (Path, dt.date)) else v) for k, v in vars(args).items() if k != "func"}
    return hashlib.sha256(json.dumps(items, sort_keys=True, default=str).encode()).hexdigest()


def _clean(o):
    # strict JSON has no NaN or Infinity
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, np.generic):
        return _clean(o.item())
    return o


def _write_json(path: Path, data: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_clean(data), indent=2, default=_json_default, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (dt.date, Path)):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _ci_dict(ci) -> dict:
    return {"lower": ci.lower, "upper": ci.upper, "level": ci.level, "open_lower": ci.open_lower, "open_upper": ci.open_upper}


# --------------------------------------------------------------------------
# fit
# --------------------------------------------------------------------------


def cmd_fit(args: argparse.Namespace) -> int:
    cat = read_catalog(args.catalog, args.start, args.end)
    u = args.threshold
    sample = cat.excess_sample(u)
    if sample.count < 5:
        raise UsageError(f"only {sample.count} events exceed u = {u:g}; at least 5 are needed")
    fit = fit_gpd(sample)
    gpd = GpdParams(fit["xi"], fit["beta"])

    freq = read_catalog(args.frequency_catalog) if args.frequency_catalog else cat
    k = int((freq.deaths > u).sum())
    rate, rate_ci = fit_poisson_intensity(k, freq.span, args.level)
    lam_span = rate * freq.span
    count_ll = (k * math.log(lam_span) - lam_span - math.lgamma(k + 1)) if k > 0 else -lam_span
    marks_ll = gpd_loglik(gpd, sample)

    ci = {"asymptotic": {}, "profile": {}}
    for i, name in enumerate(("xi", "beta")):
        ci["asymptotic"][name] = _ci_dict(asymptotic_ci(fit, i, args.level, log_scale=(name == "beta")))
        try:
            ci["profile"][name] = _ci_dict(profile_ci(sample, i, args.level, fit))
        except ValueError as exc:
            ci["profile"][name] = {"error": str(exc)}

    report = {
        **_header(args.seed, _args_digest(args)),
        "threshold": u,
        "catalog": {"path": str(args.catalog), "events": len(cat), "span_years": cat.span},
        "gpd": {
            "xi": fit["xi"],
            "beta": fit["beta"],
            "se": {"xi": fit.se(0), "beta": fit.se(1)},
            "cov": fit.cov.tolist(),
            "loglik": fit.loglik,
            "converged": fit.converged,
            "flags": fit.flags,
            "n_excesses": sample.count,
        },
        "intensity": {
            "rate": rate,
            "lower": rate_ci.lower,
            "upper": rate_ci.upper,
            "level": args.level,
            "count": k,
            "span_years": freq.span,
            "source": str(args.frequency_catalog or args.catalog),
        },
        "confidence_intervals": ci,
        "loglik": {"count": count_ll, "marks": marks_ll, "total": count_ll + marks_ll},
        "excesses": sample.excesses.tolist(),
    }
    out = _write_json(args.out_dir / "fit.json", report)
    print(f"u = {u:g}: {sample.count} excesses over {cat.span:g} years")
    print(f"  xi   = {fit['xi']:.4f}  (se {fit.se(0):.4f})")
    print(f"  beta = {fit['beta']:.4f}  (se {fit.se(1):.4f})")
    print(f"  lambda_u = {rate:.4f} per year, {args.level:.0%} exact CI [{rate_ci.lower:.4f}, {rate_ci.upper:.4f}]")
    print(f"  marked-process log-likelihood = {count_ll + marks_ll:.4f}")
    for flag in fit.flags:
        print(f"  warning: {flag}", file=sys.stderr)
    print(f"report: {out}")
    return 0


# --------------------------------------------------------------------------
# diagnose
# --------------------------------------------------------------------------


def cmd_diagnose(args: argparse.Namespace) -> int:
    cat = read_catalog(args.catalog, args.start, args.end)
    u = args.threshold
    out = args.out_dir
    grid = default_threshold_grid(cat.deaths)
    if args.grid_max is not None:
        grid = [g for g in grid if g <= args.grid_max]

    me = mean_excess_curve(cat.deaths, grid)
    write_csv(out / "mean_excess.csv", ("u", "e_n", "count"), me)
    scan = stability_scan(cat.deaths, grid)
    write_csv(out / "stability.csv", ("u", "xi", "beta", "beta_star", "count"), scan)

    sample = cat.excess_sample(u)
    if sample.count < 5:
        raise UsageError(f"only {sample.count} events exceed u = {u:g}; at least 5 are needed")
    fit = fit_gpd(sample)
    pp, qq = qq_pp_data(sample.excesses, GpdParams(fit["xi"], fit["beta"]))
    write_csv(out / "pp.csv", ("p_empirical", "p_model"), pp.tolist())
    write_csv(out / "qq.csv", ("model_quantile", "excess"), qq.tolist())

    rate = sample.count / cat.span
    ks = ks_uniformity(cat.waiting_times(u), rate)
    write_csv(out / "adjacent_pairs.csv", ("uk", "uk1"), adjacent_pairs(ks.transformed))

    data = cat.pot_data(u)
    m0 = fit_pot(data, "M0")
    fits = {"M0": m0, "M1": fit_pot(data, "M1", base=m0), "M2": fit_pot(data, "M2", base=m0)}
    tests = {}
    for name in ("M1", "M2"):
        stat, p = lr_test(m0, fits[name])
        tests[f"M0_vs_{name}"] = {"statistic": stat, "p_value": p, "significant_5pct": bool(p < 0.05)}

    report = {
        **_header(args.seed, _args_digest(args)),
        "threshold": u,
        "span_years": cat.span,
        "stability_not_converged": [r.u for r in scan if not r.converged],
        "ks": {
            "statistic": ks.statistic,
            "p_value": ks.p_value,
            "n": int(ks.transformed.size),
            "rate": rate,
            "few_points_warning": ks.few_points,
        },
        "pot_fits": {k: v.as_dict() for k, v in fits.items()},
        "lr_tests": tests,
    }
    path = _write_json(out / "diagnose.json", report)
    print(f"K-S uniformity of {ks.transformed.size} transformed waits: D = {ks.statistic:.4f}, p = {ks.p_value:.4f}")
    if ks.few_points:
        print("  warning: fewer than 5 waiting times", file=sys.stderr)
    for name, t in tests.items():
        verdict = "significant" if t["significant_5pct"] else "not significant"
        print(f"LR {name}: stat = {t['statistic']:.4f}, p = {t['p_value']:.4f} ({verdict} at 5%)")
    print(f"report: {path}")
    return 0


# --------------------------------------------------------------------------
# risk
# --------------------------------------------------------------------------


def _tail_model_from_args(args: argparse.Namespace) -> tuple[TailModel, ExcessSample | None]:
    if args.fit is not None:
        rep = json.loads(Path(args.fit).read_text(encoding="utf-8"))
        g, inten = rep["gpd"], rep["intensity"]
        u = float(rep["threshold"])
        lam = float(inten["rate"])
        cov = np.zeros((3, 3))
        cov[0, 0] = lam / float(inten["span_years"])
        cov[1:, 1:] = np.asarray(g["cov"], dtype=float)
        if not np.all(np.isfinite(cov)):
            cov = None
        sample = ExcessSample(u, np.asarray(rep["excesses"], dtype=float))
        return TailModel(u, GpdParams(float(g["xi"]), float(g["beta"])), lam, cov), sample
    missing = [n for n in ("u", "xi", "beta", "lam") if getattr(args, n) is None]
    if missing:
        raise UsageError(f"give --fit or all of --u --xi --beta --lam (missing: {', '.join(missing)})")
    return TailModel(args.u, GpdParams(args.xi, args.beta), args.lam), None


def cmd_risk(args: argparse.Namespace) -> int:
    m, sample = _tail_model_from_args(args)
    out = args.out_dir
    rows = return_level_table(args.periods, m, args.ci_level, sample)
    write_csv(out / "return_levels.csv", ("t", "estimate", "lo", "hi", "method"), rows)
    print(f"1/p_u = {1.0 / m.p_exceed:.4g} years")
    print(f"{'t':>8} {'level':>12} {'2 s.f.':>10}")
    for r in rows:
        if r["method"] == "point":
            print(f"{r['t']:>8g} {r['estimate']:>12.2f} {round_sig(r['estimate']):>10g}")

    report = {
        **_header(args.seed, _args_digest(args)),
        "threshold": m.u,
        "xi": m.gpd.xi,
        "beta": m.gpd.beta,
        "lambda_u": m.lam,
        "p_exceed": m.p_exceed,
        "return_levels": rows,
    }
    var_rows = []
    es_error = None
    for a in args.levels:
        v = var(a, m)
        try:
            e = es(a, m)
        except DomainError as exc:
            es_error = str(exc)
            e = None
        var_rows.append({"alpha": a, "var": v, "es": "" if e is None else e})
    write_csv(out / "var_es.csv", ("alpha", "var", "es"), var_rows)
    report["var_es"] = var_rows
    if es_error:
        report["es_error"] = es_error
    path = _write_json(out / "risk.json", report)
    print(f"{'alpha':>8} {'VaR':>12} {'ES':>12}")
    for r in var_rows:
        es_txt = "n/a" if r["es"] == "" else f"{round_sig(r['es']):g}"
        print(f"{r['alpha']:>8g} {round_sig(r['var']):>12g} {es_txt:>12}")
    print(f"report: {path}")
    if es_error:
        print(f"error: {es_error}", file=sys.stderr)
        return 2
    return 0


# --------------------------------------------------------------------------
# price / simulate
# --------------------------------------------------------------------------


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    run = cfg.run.model_copy(
        update={
            k: v
            for k, v in (("seed", args.seed), ("workers", args.workers), ("n_sim", getattr(args, "n_sim", None)))
            if v is not None
        }
    )
    props = cfg.proportions
    if getattr(args, "proportion_mode", None):
        props = props.model_copy(update={"mode": args.proportion_mode})
    # re-validate so overrides obey the same field constraints
    return RunConfig.model_validate({**cfg.model_dump(), "run": run.model_dump(), "proportions": props.model_dump()})


def _simulate(cfg: RunConfig, args: argparse.Namespace, contracts: dict, keep_paths: bool):
    base = Path(args.config).parent if args.config else None
    portfolio = cfg.portfolio.build(cfg.run.seed, cfg.run.start_date, base)
    if portfolio.n_insureds == 0:
        raise UsageError("portfolio is empty")
    res = run_simulations(
        cfg.model.build(),
        portfolio,
        cfg.proportions.build(),
        cfg.run.n_sim,
        cfg.run.seed,
        cfg.run.workers,
        cfg.sim_options(),
        contracts,
        keep_paths,
    )
    return portfolio, res


def cmd_price(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    contracts = cfg.build_contracts()
    if not contracts:
        raise UsageError("config defines no contracts")
    portfolio, res = _simulate(cfg, args, contracts, keep_paths=False)
    out = args.out_dir
    report = {
        **_header(cfg.run.seed, config_hash(cfg)),
        "note": COUPLING_NOTE,
        "n_sim": cfg.run.n_sim,
        "proportion_mode": cfg.proportions.mode,
        "portfolio": portfolio_summary(portfolio),
        "contracts": {},
    }
    print(f"{cfg.run.n_sim} paths, seed {cfg.run.seed}; {COUPLING_NOTE}")
    for name, terms in contracts.items():
        summary = price_summary(res.gross, res.recovered[name], limit=terms.limit)
        write_table(summary, out / f"table_{name}.csv")
        report["contracts"][name] = {
            "terms_cents": dict(vars(terms)),
            "loss_cost_eur": summary.loss_cost,
            "rate_on_line": summary.rate_on_line,
            "rows": summary.rows,
        }
        rol = "n/a" if summary.rate_on_line is None else f"{summary.rate_on_line:.4%}"
        print(f"  {name:<16} mean recovered {summary.loss_cost:>14,.2f} EUR   rate on line {rol}")
    if args.save_losses:
        names = list(contracts)
        with (out / "losses.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["path", "gross", *names])
            for i in range(res.n_paths):
                w.writerow([i, f"{res.gross[i] / 100:.2f}", *(f"{res.recovered[n][i] / 100:.2f}" for n in names)])
    path = _write_json(out / "price.json", report)
    print(f"report: {path}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_run_config(args)
    portfolio, res = _simulate(cfg, args, {}, keep_paths=True)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    with (out / "losses.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "n_events", "gross"])
        for i in range(res.n_paths):
            w.writerow([i, int(res.n_events[i]), f"{res.gross[i] / 100:.2f}"])
    write_event_log(res.paths, out / "events.csv")
    report = {
        **_header(cfg.run.seed, config_hash(cfg)),
        "n_sim": cfg.run.n_sim,
        "portfolio": portfolio_summary(portfolio),
        "gross_mean_eur": float(res.gross.mean()) / 100.0,
        "events_mean": float(res.n_events.mean()),
    }
    path = _write_json(out / "simulate.json", report)
    print(f"{res.n_paths} paths, mean gross {report['gross_mean_eur']:,.2f} EUR; report: {path}")
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    common.add_argument("--workers", type=int, default=None, help="worker processes for simulation")
    common.add_argument("--out-dir", type=Path, default=Path("lifecat-out"), help="output directory")
    common.add_argument("--config", type=Path, default=None, help="JSON run config")

    p = argparse.ArgumentParser(prog="lifecat", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lifecat {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add_catalog_args(sp):
        sp.add_argument("catalog", type=Path, help="CSV with columns date,deaths,country")
        sp.add_argument("--threshold", "-u", type=float, default=20.0)
        sp.add_argument("--start", type=_date, default=None, help="observation window start")
        sp.add_argument("--end", type=_date, default=None, help="observation window end (inclusive)")

    sp = sub.add_parser("fit", parents=[common], help="GPD and exceedance-rate fit")
    add_catalog_args(sp)
    sp.add_argument("--frequency-catalog", type=Path, default=None, help="catalog used for the exceedance rate")
    sp.add_argument("--level", type=float, default=0.95)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("diagnose", parents=[common], help="threshold and homogeneity diagnostics")
    add_catalog_args(sp)
    sp.add_argument("--grid-max", type=float, default=None, help="largest threshold in the scans")
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("risk", parents=[common], help="return levels, VaR and expected shortfall")
    sp.add_argument("--fit", type=Path, default=None, help="fit.json written by 'fit'")
    sp.add_argument("--u", type=float, default=None)
    sp.add_argument("--xi", type=float, default=None)
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--lam", type=float, default=None, help="annual exceedance intensity")
    sp.add_argument("--periods", type=_floats, default=list(DEFAULT_PERIODS))
    sp.add_argument("--levels", type=_floats, default=list(DEFAULT_LEVELS))
    sp.add_argument("--ci-level", type=float, default=0.95)
    sp.set_defaults(func=cmd_risk)

    for name, func, help_ in (
        ("price", cmd_price, "simulate losses and price the configured contracts"),
        ("simulate", cmd_simulate, "dump raw simulated paths"),
    ):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("--n-sim", type=int, default=None)
        sp.add_argument("--proportion-mode", choices=("beta", "fixed"), default=None)
        if name == "price":
            sp.add_argument("--save-losses", action="store_true")
        sp.set_defaults(func=func)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print("error: invalid configuration", file=sys.stderr)
        for err in exc.errors():
            loc = ".".join(str(x) for x in err["loc"])
            print(f"  {loc}: {err['msg']}", file=sys.stderr)
        return 2
    except (CatalogError, PortfolioError, DomainError, UsageError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
