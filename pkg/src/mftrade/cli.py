"""Command-line entry point: ``mftrade <command> [--config FILE] [--out DIR] ...``.

Every command writes ``<command>.json`` (resolved config, seeds, results)
and, where tabular, a CSV into ``--out``. Reruns with the same inputs give
byte-identical files. Failures print one JSON record on stderr and exit with
a code that identifies the error class.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from dataclasses import asdict
from pathlib import Path as FsPath

import numpy as np

from . import __version__
from .errors import (
    BoundaryHitError,
    ConfigError,
    DegenerateError,
    InputError,
    InsufficientHorizonError,
    MFTradeError,
    NonStationaryFitError,
    NumericalFailureError,
    ParameterDomainError,
)
from .config import build_portfolio, resolve
from .mean_field import MeanFieldParams, mean_field_params, simulate_portfolio
from .ou import OuParams, Path, fit_ou_mle
from .risk_calibration import (
    lambda_for_target_risk,
    portfolio_inputs,
    position_mf_covariance,
    realized_risk,
)
from .slope_optimizer import SlopeSearchConfig, search_optimal_slope, slope_sweep
from .threshold import corrected_threshold, policy_for_asset, threshold_record
from .trading_rate import rate_exact, rate_large_band, rate_monte_carlo, rate_small_band

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DOMAIN = 4
EXIT_NUMERICAL = 5
EXIT_BOUNDARY = 6

_EXIT_CODES = [
    (ConfigError, EXIT_CONFIG),
    (BoundaryHitError, EXIT_BOUNDARY),
    ((NumericalFailureError, NonStationaryFitError, InsufficientHorizonError), EXIT_NUMERICAL),
    ((ParameterDomainError, DegenerateError, InputError), EXIT_DOMAIN),
]

COMMANDS = ("threshold", "rate", "simulate", "slope-search", "risk-calibrate", "fit-ou", "fig2", "fig3")


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        val = float(obj)
        return val if math.isfinite(val) else None
    return obj


def _write_json(out: FsPath, name: str, payload: dict) -> FsPath:
    path = out / f"{name}.json"
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def _write_csv(out: FsPath, name: str, header, rows) -> FsPath:
    path = out / f"{name}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            cells = []
            for v in row:
                v = _clean(v)
                cells.append("" if v is None else repr(v) if isinstance(v, float) else v)
            writer.writerow(cells)
    return path


def _first_ou(cfg) -> tuple[OuParams, float]:
    block = cfg["assets"][0]
    return OuParams(block["epsilon"], block["psi"]), float(block["gamma"])


def _corrected_policies(portfolio):
    bands = [corrected_threshold(a.ou, a.gamma) for a in portfolio.assets]
    mf = mean_field_params(portfolio, bands)
    thetas = portfolio.thetas
    policies = [policy_for_asset(a, mf.jbar, t) for a, t in zip(portfolio.assets, thetas)]
    return policies, mf


# --- commands ---------------------------------------------------------------


def cmd_threshold(cfg, args, out):
    portfolio = build_portfolio(cfg)
    bands = [corrected_threshold(a.ou, a.gamma) for a in portfolio.assets]
    mf = mean_field_params(portfolio, bands)
    records, offset = [], 0
    for i, block in enumerate(cfg["assets"]):
        asset = portfolio.assets[offset]
        theta = float(portfolio.thetas[offset])
        rec = threshold_record(asset.ou, asset.gamma, jbar=mf.jbar, theta=theta, separation=cfg["separation"])
        rec["block"] = i
        rec["count"] = block["count"]
        records.append(rec)
        offset += block["count"]
    return {"thresholds": records, "jbar": mf.jbar, "sigma_mf": mf.sigma_mf}, {}


def _rate_rows(cfg, args, q_hats):
    ou, _ = _first_ou(cfg)
    rc = cfg["rate"]
    reps = args.repetitions if args.repetitions is not None else rc["repetitions"]
    rows = []
    for k, qh in enumerate(q_hats):
        q = qh * ou.p_star
        j_exact = rate_exact(ou, q).j
        j_small = rate_small_band(ou, q).j if qh < 1 else None
        j_large = rate_large_band(ou, q).j if qh > 1 else None
        try:
            mc = rate_monte_carlo(
                ou, q, rc["horizon"], seed=cfg["master_seed"] + k, repetitions=reps, bridge=rc["bridge"]
            )
            j_mc, se, nf = mc.j, mc.stderr, mc.n_flips
        except InsufficientHorizonError:
            j_mc = se = nf = None
        rows.append(
            {"q_hat": qh, "j_exact": j_exact, "j_small": j_small, "j_large": j_large,
             "j_mc": j_mc, "stderr": se, "n_flips": nf}
        )
    seeds = {"rate_seeds": [cfg["master_seed"] + k for k in range(len(q_hats))], "repetitions": reps}
    return rows, seeds


def cmd_rate(cfg, args, out):
    rows, seeds = _rate_rows(cfg, args, [float(v) for v in cfg["rate"]["q_hat"]])
    cols = ["q_hat", "j_exact", "j_small", "j_large", "j_mc", "stderr"]
    _write_csv(out, "rate", cols, ([r[c] for c in cols] for r in rows))
    return {"rows": rows}, seeds


def cmd_fig2(cfg, args, out):
    rows, seeds = _rate_rows(cfg, args, [float(v) for v in cfg["rate"]["q_hat"]])
    table = []
    for r in rows:
        approx = r["j_small"] if r["q_hat"] < 1 else r["j_large"]
        table.append([r["q_hat"], r["j_mc"], approx, r["j_exact"], r["stderr"]])
    _write_csv(out, "fig2", ["q_hat", "j_simulated", "j_approx", "j_exact", "stderr"], table)
    return {"rows": rows}, seeds


def cmd_simulate(cfg, args, out):
    portfolio = build_portfolio(cfg)
    policies, mf = _corrected_policies(portfolio)
    report = simulate_portfolio(portfolio, policies, cfg["horizon"], burn_in=cfg["burn_in"])
    rec = report.to_record()
    first = portfolio.assets[0]
    rec["theory"] = {
        "jbar": mf.jbar,
        "kappa": mf.kappa,
        "diffusion": mf.diffusion,
        "sigma2": portfolio.sigma2,
        "conditional_mean_slope": first.beta * first.m_cap / (portfolio.sigma2 * math.sqrt(portfolio.n)),
    }
    if portfolio.lambda_risk != 0:
        slopes, rhos, _ = portfolio_inputs(portfolio, cfg["risk"]["density"])
        risk = realized_risk(portfolio, slopes, rhos)
        rec["theory"]["er2"] = risk.er2
        rec["theory"]["realized_risk"] = risk.realized
    if args.write_path:
        report.r_path.to_csv(out / "r_path.csv")
    return {"report": rec, "policies": [p.to_record() for p in policies[:1]]}, {
        "master_seed": portfolio.master_seed,
        "asset_streams": "make_rng(master_seed, i) for asset i",
    }


def _search_cfg(cfg, args, pair=0):
    sc = cfg["slope_search"]
    reps = sc["repetitions"]
    if args.command == "slope-search" and args.repetitions is not None:
        reps = args.repetitions
    return SlopeSearchConfig(
        grid_points=sc["grid_points"],
        rounds=sc["rounds"],
        initial_range=tuple(sc["initial_range"]),
        horizon=sc["horizon"],
        seed_p=sc["seed_p"] + 2 * pair,
        seed_r=sc["seed_r"] + 2 * pair,
        repetitions=reps,
    )


def cmd_slope_search(cfg, args, out):
    ou, gamma = _first_ou(cfg)
    sc = cfg["slope_search"]
    scfg = _search_cfg(cfg, args)
    if args.sweep:
        return _sweep(cfg, args, out, "slope_sweep", [scfg])
    mf = MeanFieldParams(jbar=sc["jbar_over_eps"] * ou.epsilon, sigma_mf=sc["sigma_mf"])
    try:
        res = search_optimal_slope(ou, gamma, sc["theta"], mf, scfg)
    except BoundaryHitError as err:
        _write_csv(out, "pnl_curve", ["round", "S", "pnl"], err.result.pnl_curve)
        raise
    _write_csv(out, "pnl_curve", ["round", "S", "pnl"], res.pnl_curve)
    return {"search": res.to_record()}, {"seed_p": scfg.seed_p, "seed_r": scfg.seed_r}


def _sweep(cfg, args, out, name, cfgs):
    ou, gamma = _first_ou(cfg)
    sc = cfg["slope_search"]
    pairs = [(c.seed_p, c.seed_r) for c in cfgs]
    rows = slope_sweep(ou, gamma, sc["theta"], sc["sweep"], cfgs[0], sc["sigma_mf"], seed_pairs=pairs)
    _write_csv(out, name, ["jbar_over_eps", "s_hat", "s_theory"],
               ([r["jbar_over_eps"], r["s_hat"], r["s_theory"]] for r in rows))
    return {"rows": rows}, {"seed_pairs": pairs}


def cmd_fig3(cfg, args, out):
    n_pairs = args.repetitions if args.repetitions is not None else 1
    cfgs = [_search_cfg(cfg, args, k) for k in range(n_pairs)]
    return _sweep(cfg, args, out, "fig3", cfgs)


def cmd_risk_calibrate(cfg, args, out):
    portfolio = build_portfolio(cfg)
    rc = cfg["risk"]
    slopes, rhos, jbar = portfolio_inputs(portfolio, rc["density"])
    result = {"density": rc["density"], "jbar": jbar}
    lam = portfolio.lambda_risk
    if rc["target"] is not None:
        lam = lambda_for_target_risk(portfolio, slopes, rhos, float(rc["target"]))
        result["lambda_for_target"] = lam
    report = realized_risk(portfolio, slopes, rhos, lam)
    result["report"] = report.to_record()
    result["position_mf_covariance"] = position_mf_covariance(
        portfolio.assets[0], lam * portfolio.assets[0].beta / math.sqrt(portfolio.n),
        rhos[0], slopes[0], report.er2,
    )
    return result, {}


def cmd_fit_ou(cfg, args, out):
    src = args.path or cfg["fit"]["path"]
    if not src:
        raise ConfigError("fit-ou needs --path or fit.path", "fit.path")
    try:
        path = Path.from_csv(src, dt=float(cfg["fit"]["dt"]))
    except (OSError, ValueError, IndexError) as err:
        raise InputError(f"cannot read path CSV {src}: {err}") from None
    fit = fit_ou_mle(path)
    return {"fit": asdict(fit), "source": str(src)}, {}


HANDLERS = {
    "threshold": cmd_threshold,
    "rate": cmd_rate,
    "fig2": cmd_fig2,
    "simulate": cmd_simulate,
    "slope-search": cmd_slope_search,
    "fig3": cmd_fig3,
    "risk-calibrate": cmd_risk_calibrate,
    "fit-ou": cmd_fit_ou,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted config override, repeatable")
    common.add_argument("--repetitions", type=int, help="Monte Carlo repetitions or seed pairs")

    parser = argparse.ArgumentParser(prog="mftrade", description="Mean-field trading with linear costs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    helps = {
        "threshold": "regime, q*, q1 and slope per asset block",
        "rate": "trading rate table: exact, asymptotic and Monte Carlo",
        "fig2": "simulated vs approximate vs exact trading rate",
        "simulate": "coupled N-asset simulation report",
        "slope-search": "grid-refinement search for the optimal slope",
        "fig3": "optimal slope against jbar/epsilon",
        "risk-calibrate": "realized risk for lambda, or lambda for a target risk",
        "fit-ou": "OU maximum-likelihood fit of a step,value CSV",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "simulate":
            p.add_argument("--write-path", action="store_true", help="also write r_path.csv")
        if name == "slope-search":
            p.add_argument("--sweep", action="store_true", help="sweep slope_search.sweep ratios")
        if name == "fit-ou":
            p.add_argument("--path", help="CSV with columns step,value")
    return parser


def _exit_code(err: BaseException) -> int:
    for cls, code in _EXIT_CODES:
        if isinstance(err, cls):
            return code
    return EXIT_FAILURE


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.repetitions is not None and args.repetitions < 1:
        parser.error("--repetitions must be >= 1")
    try:
        cfg = resolve(args.config, args.overrides, args.seed)
        out = FsPath(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as err:
            raise ConfigError(f"cannot create output directory {out}: {err.strerror}", "out") from None
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result, seeds = HANDLERS[args.command](cfg, args, out)
        seeds = {"master_seed": cfg["master_seed"], **seeds}
        payload = {
            "command": args.command,
            "version": __version__,
            "config": cfg,
            "seeds": seeds,
            "result": result,
            "warnings": sorted({str(w.message) for w in caught}),
        }
        _write_json(out, args.command.replace("-", "_"), payload)
    except MFTradeError as err:
        code = _exit_code(err)
        record = {
            "error": type(err).__name__,
            "message": str(err),
            "field": getattr(err, "field", None),
            "exit_code": code,
        }
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return code
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
