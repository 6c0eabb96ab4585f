"""Command-line surface.

Commands: solve, sweep, simulate, generate, estimate, report.  Every run
resolves its parameters from an optional TOML config file plus flags (flags
win), writes the outputs plus a deterministic ``manifest.json`` capturing
the resolved configuration, seed, and package version, and a separate
``timing.json`` with the wall clock so the data files stay byte-identical
across reruns.  Exit codes: 0 success, 1 domain error (JSON on stderr),
2 usage error.

Config grammar (INI): one section per command, keys equal to the long flag
names with dashes replaced by underscores::

    [solve]
    n = 5
    rho = 0.3
    gamma = 0.74
    epsilon = 0.2
    mu = 1.102
    sigma = 2.524

``generate`` additionally accepts one section per type, named
``[generate.type.<label>]`` with the same profile keys plus ``epsilon``.
The only environment variable honored is MEVAUCTION_OUT (default output
directory).
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
import time
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import __version__
from .empirics import (
    bergemann_threshold,
    bribe_schedule,
    decompose,
    estimate_gamma,
    iter_bundles,
    write_bundles,
    IngestReport,
    DEFAULT_BERGEMANN_RULE,
)
from .diagnostics import (
    affiliation_diagnostic,
    affiliation_pairs,
    board_diagnostic,
    builder_table,
    builder_table_csv,
    concentration,
    effective_bidder_counts,
)
from .equilibrium import GridSpec, default_grid, solve_bid_ode, solve_strategy
from .errors import MevAuctionError, ThinSampleError
from .profiles import MevType, TypeProfile
from .revenue import optimal_epsilon, revenue_sweep
from .simulate import run_many
from .synthetic import SyntheticSpec, generate_synthetic

PROFILE_KEYS = ("type", "n", "rho", "gamma", "mu", "sigma")


def _read_ini(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    return parser


def _load_config(path, command):
    if not path:
        return {}
    parser = _read_ini(path)
    section = dict(parser[command]) if parser.has_section(command) else {}
    section["_type_sections"] = [
        (name.split(".", 2)[2], dict(parser[name]))
        for name in parser.sections()
        if name.startswith(f"{command}.type.")
    ]
    return section


def _resolve(args, config, keys, parser):
    """Merge config defaults with flag overrides; missing keys are usage errors."""
    out = {}
    for key in keys:
        flag = getattr(args, key, None)
        val = flag if flag is not None else config.get(key)
        if val is None:
            parser.error(f"missing required parameter --{key.replace('_', '-')}")
        out[key] = val
    return out


def _profile_from(params) -> TypeProfile:
    return TypeProfile(
        tau=MevType.parse(str(params["type"])),
        n=int(params["n"]),
        rho=float(params["rho"]),
        gamma=float(params["gamma"]),
        mu=float(params["mu"]),
        sigma=float(params["sigma"]),
    )


def _out_dir(args) -> Path:
    out = args.out_dir or os.environ.get("MEVAUCTION_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8")


def _manifest(out: Path, command: str, resolved: dict, started: float):
    clean = {k: (v if not isinstance(v, float) or math.isfinite(v) else str(v))
             for k, v in resolved.items()}
    _write(out / "manifest.json", json.dumps(
        {"command": command, "config": clean, "version": __version__,
         "package": "mevauction"}, indent=1, sort_keys=True))
    _write(out / "timing.json", json.dumps(
        {"started_unix": started, "wall_seconds": time.time() - started}, indent=1))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(args, parser):
    started = time.time()
    config = _load_config(args.config, "solve")
    params = _resolve(args, config, PROFILE_KEYS + ("epsilon",), parser)
    profile = _profile_from(params)
    epsilon = float(params["epsilon"])
    out = _out_dir(args)

    grid = default_grid(profile, nodes=int(args.nodes or config.get("nodes", 2000)))
    if args.v_min or args.v_max:
        grid = GridSpec(
            v_min=float(args.v_min or grid.v_min),
            v_max=float(args.v_max or grid.v_max),
            nodes=grid.nodes,
        )
    curve = solve_bid_ode(profile, grid)
    strategy = solve_strategy(profile, epsilon, curve=curve)
    _write(out / "curve.csv", curve.to_csv())
    _write(out / "strategy.json", strategy.to_json())
    _manifest(out, "solve", {**params, "nodes": grid.nodes,
                             "v_min": grid.v_min, "v_max": grid.v_max}, started)
    cutoff = "inf" if math.isinf(strategy.cutoff) else f"{strategy.cutoff:.6g}"
    print(f"solved curve ({curve.grid.size} nodes), cutoff = {cutoff}")
    return 0


def cmd_sweep(args, parser):
    started = time.time()
    config = _load_config(args.config, "sweep")
    params = _resolve(args, config, PROFILE_KEYS, parser)
    profile = _profile_from(params)
    out = _out_dir(args)
    eps_text = args.epsilons or config.get("epsilons")
    if eps_text:
        # explicit grids of any size are honored; argmax is over that grid
        grid = [float(x) for x in str(eps_text).split(",")]
        rp = revenue_sweep(profile, grid)
        star = float(rp.epsilons[int(np.argmax(rp.revenues))])
        regime = rp.regime
    else:
        result = optimal_epsilon(profile)
        rp, star, regime = result.profile, result.epsilon_star, result.regime
    _write(out / "revenue_profile.csv", rp.to_csv())
    _write(out / "revenue_profile.json", json.dumps(
        {"epsilon_star": star, "regime": regime,
         "profile": json.loads(rp.to_json())}, indent=1))
    _manifest(out, "sweep", {**params, "epsilons": eps_text or "default"}, started)
    print(f"regime = {regime}, epsilon_star = {star}")
    return 0


def cmd_simulate(args, parser):
    started = time.time()
    config = _load_config(args.config, "simulate")
    params = _resolve(args, config, PROFILE_KEYS + ("epsilon", "blocks", "seed"), parser)
    profile = _profile_from(params)
    out = _out_dir(args)
    strategy = solve_strategy(profile, float(params["epsilon"]))
    trace_path = out / "trace.csv" if args.trace else None
    report = run_many(strategy, profile, int(params["blocks"]), int(params["seed"]),
                      workers=args.threads, antithetic=args.antithetic,
                      trace_path=trace_path, trace_cap=args.trace_cap)
    _write(out / "sim_report.json", report.to_json())
    _manifest(out, "simulate", {**params, "antithetic": args.antithetic}, started)
    print(f"blocks={report.blocks} revenue={report.mean_builder_revenue:.6g}"
          f" +-{report.stderr_builder_revenue:.2g}")
    return 0


def _specs_from_config(config, args, parser):
    rows = config.get("_type_sections") or []
    if rows:
        specs = []
        for label, row in rows:
            params = {k: row.get(k) for k in PROFILE_KEYS[1:] + ("epsilon",)}
            params["type"] = row.get("type", label)
            if any(v is None for v in params.values()):
                parser.error(f"[generate.type.{label}] missing keys")
            specs.append(SyntheticSpec(profile=_profile_from(params),
                                       epsilon=float(params["epsilon"])))
        return specs
    params = _resolve(args, config, PROFILE_KEYS + ("epsilon",), parser)
    return [SyntheticSpec(profile=_profile_from(params),
                          epsilon=float(params["epsilon"]))]


def cmd_generate(args, parser):
    started = time.time()
    config = _load_config(args.config, "generate")
    specs = _specs_from_config(config, args, parser)
    blocks = args.blocks if args.blocks is not None else config.get("blocks")
    seed = args.seed if args.seed is not None else config.get("seed")
    if blocks is None or seed is None:
        parser.error("missing required parameter --blocks or --seed")
    opb = int(args.opportunities or config.get("opportunities_per_block", 1))
    out = _out_dir(args)
    records = generate_synthetic(specs, int(blocks), int(seed),
                                 opportunities_per_block=opb)
    count = write_bundles(out / "bundles.csv", records)
    _manifest(out, "generate", {
        "blocks": int(blocks), "seed": int(seed),
        "opportunities_per_block": opb,
        "types": [s.profile.tau.value for s in specs]}, started)
    print(f"wrote {count} records to {out / 'bundles.csv'}")
    return 0


def _schedules_by_type(path):
    present = defaultdict(int)
    for rec in iter_bundles(path):
        if rec.extracted_value > 0:
            present[rec.mev_type] += 1
    schedules = {}
    for mev_type in sorted(present, key=lambda t: t.value):
        try:
            schedules[mev_type] = bribe_schedule(iter_bundles(path), mev_type)
        except ThinSampleError:
            continue
    return schedules


def cmd_estimate(args, parser):
    started = time.time()
    config = _load_config(args.config, "estimate")
    path = args.input or config.get("input")
    if not path:
        parser.error("missing required parameter --input")
    out = _out_dir(args)
    schedules = _schedules_by_type(path)
    estimates = {t: estimate_gamma(s) for t, s in schedules.items()}
    for mev_type, schedule in schedules.items():
        _write(out / f"fig2_{mev_type.value}.csv", schedule.to_csv())
    _write(out / "gamma_estimates.json", json.dumps(
        {t.value: e.to_dict() for t, e in estimates.items()}, indent=1, sort_keys=True))
    _manifest(out, "estimate", {"input": str(path)}, started)
    print(f"estimated gamma for {len(estimates)} types")
    return 0


def cmd_report(args, parser):
    started = time.time()
    config = _load_config(args.config, "report")
    path = args.input or config.get("input")
    if not path:
        parser.error("missing required parameter --input")
    rule = args.bergemann_rule or config.get("bergemann_rule", DEFAULT_BERGEMANN_RULE)
    window = int(args.window or config.get("window", 50))
    out = _out_dir(args)

    # pass 1: summary statistics and data quality
    ingest_report = IngestReport()
    per_type_values = defaultdict(list)
    per_type_tips = defaultdict(float)
    nonpositive = 0
    for rec in iter_bundles(path, ingest_report):
        ev = rec.extracted_value
        if ev <= 0:
            nonpositive += 1
            continue
        per_type_values[rec.mev_type].append(ev)
        per_type_tips[rec.mev_type] += rec.tip

    lines = ["mev_type,count,total_extracted,mean,median,std,mean_bribe_share\n"]
    all_vals, all_tips = [], 0.0
    for mev_type in sorted(per_type_values, key=lambda t: t.value):
        vals = np.asarray(per_type_values[mev_type])
        all_vals.append(vals)
        all_tips += per_type_tips[mev_type]
        lines.append(
            f"{mev_type.value},{vals.size},{vals.sum():.12g},{vals.mean():.12g},"
            f"{np.median(vals):.12g},{vals.std():.12g},"
            f"{per_type_tips[mev_type] / vals.sum():.12g}\n")
    if all_vals:
        vals = np.concatenate(all_vals)
        lines.append(f"all,{vals.size},{vals.sum():.12g},{vals.mean():.12g},"
                     f"{np.median(vals):.12g},{vals.std():.12g},"
                     f"{all_tips / vals.sum():.12g}\n")
    _write(out / "tab1_summary.csv", "".join(lines))

    # pass 2: schedules, estimates, decomposition
    schedules = _schedules_by_type(path)
    estimates = {t: estimate_gamma(s) for t, s in schedules.items()}
    skipped_thin = sorted(t.value for t in per_type_values if t not in estimates)
    for mev_type, schedule in schedules.items():
        _write(out / f"fig2_{mev_type.value}.csv", schedule.to_csv())
    decomposition = None
    if estimates:
        estimated = (r for r in iter_bundles(path) if r.mev_type in estimates)
        decomposition = decompose(estimated, estimates)
        _write(out / "fig3_decomposition.csv", decomposition.to_csv())

    # pass 3: diagnostics (materialized once)
    records = list(iter_bundles(path))
    pairs = affiliation_pairs(records)
    _write(out / "figA1_pairs.csv",
           "mev_type,log_value_top,log_value_second\n" + "".join(
               f"{t.value},{x:.12g},{y:.12g}\n" for t, x, y in pairs))
    affiliation = affiliation_diagnostic(records)
    conc = concentration(records, by="searcher")
    lorenz_lines = ["mev_type,population_share,value_share\n"]
    for mev_type, stat in sorted(conc.items(), key=lambda kv: kv[0].value):
        for p, v in zip(stat.lorenz_population, stat.lorenz_value):
            lorenz_lines.append(f"{mev_type.value},{p:.12g},{v:.12g}\n")
    _write(out / "figA2_lorenz.csv", "".join(lorenz_lines))
    _write(out / "tabA1_builders.csv", builder_table_csv(builder_table(records)))
    board = board_diagnostic(records, window=window)
    _write(out / "figA3_board.csv",
           "mev_type,count_lo,count_hi,records,mean_revenue,mean_bribe_share\n"
           + "".join(f"{r.mev_type.value},{r.count_lo},{r.count_hi},{r.records},"
                     f"{r.mean_revenue:.12g},{r.mean_bribe_share:.12g}\n"
                     for r in board))

    # disclosure benchmark per type from the median bidder-count proxy
    proxies = defaultdict(list)
    for rec, proxy in effective_bidder_counts(records, window=window):
        proxies[rec.mev_type].append(proxy)
    berg_lines = ["mev_type,n_effective,threshold\n"]
    berg = {}
    for mev_type in sorted(proxies, key=lambda t: t.value):
        n_eff = max(2, int(round(float(np.median(proxies[mev_type])))))
        thr = bergemann_threshold(n_eff, rule=rule)
        berg[mev_type.value] = {"n_effective": n_eff, "threshold": thr}
        berg_lines.append(f"{mev_type.value},{n_eff},{thr:.12g}\n")
    _write(out / "fig4_bergemann.csv", "".join(berg_lines))

    _write(out / "report.json", json.dumps({
        "data_quality": {
            "rows_read": ingest_report.rows_read,
            "records": ingest_report.records,
            "malformed": ingest_report.malformed,
            "nonpositive_extracted_value": nonpositive,
            "types_too_thin_to_estimate": skipped_thin,
        },
        "gamma_estimates": {t.value: e.to_dict() for t, e in estimates.items()},
        "decomposition": None if decomposition is None else {
            "total_tips": decomposition.total_tips,
            "total_foregone": decomposition.total_foregone,
            "ratio": decomposition.total_ratio,
        },
        "affiliation": {t.value: {"pairs": a.pairs, "slope": a.slope,
                                  "correlation": a.correlation}
                        for t, a in affiliation.items()},
        "concentration": {t.value: {"groups": c.groups, "gini": c.gini,
                                    "top_k_shares": c.top_k_shares}
                          for t, c in conc.items()},
        "bergemann": {"rule": rule, "proxy_window_blocks": window,
                      "per_type": berg},
        "bin_weighting": "record-weighted within bins; bin-uniform dispersion "
                         "reported by estimate_gamma",
    }, indent=1, sort_keys=True))
    _manifest(out, "report", {"input": str(path), "bergemann_rule": rule,
                              "window": window}, started)
    print(f"report written to {out} ({ingest_report.records} records)")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_profile_flags(p):
    p.add_argument("--type", help="MEV type label (sandwich, naked_arb, liquidation, backrun)")
    p.add_argument("--n", type=int, help="number of entrants")
    p.add_argument("--rho", type=float, help="signal affiliation in [0, 1)")
    p.add_argument("--gamma", type=float, help="replicable share in [0, 1]")
    p.add_argument("--mu", type=float, help="log-scale location")
    p.add_argument("--sigma", type=float, help="log-scale dispersion")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mevauction",
        description="MEV auctions under imperfect builder commitment",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--out-dir", help="output directory (or MEVAUCTION_OUT)")

    p = sub.add_parser("solve", help="solve the bid curve and cutoff")
    common(p)
    _add_profile_flags(p)
    p.add_argument("--epsilon", type=float, help="builder defection rate")
    p.add_argument("--v-min", type=float)
    p.add_argument("--v-max", type=float)
    p.add_argument("--nodes", type=int)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="revenue profile over defection rates")
    common(p)
    _add_profile_flags(p)
    p.add_argument("--epsilons", help="comma-separated grid (default 0,0.05,...,0.99)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo the full game")
    common(p)
    _add_profile_flags(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--blocks", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--antithetic", action="store_true")
    p.add_argument("--trace", action="store_true", help="write a capped per-block trace")
    p.add_argument("--trace-cap", type=int, default=10_000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate", help="synthetic bundle records")
    common(p)
    _add_profile_flags(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--blocks", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--opportunities", type=int, help="auctions per block and type")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("estimate", help="bribe schedules and gamma estimates")
    common(p)
    p.add_argument("--input", help="bundle CSV")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("report", help="full estimation pipeline and figure data")
    common(p)
    p.add_argument("--input", help="bundle CSV")
    p.add_argument("--bergemann-rule", help="named disclosure rule")
    p.add_argument("--window", type=int, help="bidder-count proxy window (blocks)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (MevAuctionError, OSError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
