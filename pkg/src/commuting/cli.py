"""Command line entry point: ``commuting <subcommand> [flags]``.

Every run writes ``manifest.json`` next to its outputs. Passing that file
back with ``--config`` (the subcommand may then be omitted) reruns the
same computation. Output directory precedence: ``--out``, then the
``COMMUTING_OUT_DIR`` environment variable, then the config file, then
``./out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import DEFAULT_BIN_WIDTH_M, calibrate_beta
from .core import CommutingError, FlowMatrix, mean_unit_area
from .generator import GenerationConfig, generate_network, replica_flows, run_replicas
from .io import (
    load_study_area,
    observed_flows,
    read_cases,
    read_od,
    sha256,
    write_flow_matrix,
    write_json,
    write_table,
)
from .radiation import RadiationInputs, compare_models, radiation_flows
from .universal_law import cross_validate, fit_power_law, loglog_points, predict_beta
from .validation import build_comparison_table, cpc

log = logging.getLogger("commuting")

ENV_OUT = "COMMUTING_OUT_DIR"
PATH_ARGS = ("units", "od", "cases")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _common(p, *, units=True, od=False, od_required=False, seed=True, replicas=None):
    if units:
        p.add_argument("--units", required=True, help="units CSV")
        p.add_argument("--mode", choices=("projected", "geodetic"), default="projected")
        p.add_argument("--exclude-self", type=_bool, default=True, metavar="{true,false}")
        p.add_argument("--force", action="store_true", help="continue on infeasible margins")
    if od:
        p.add_argument("--od", required=od_required, help="observed OD CSV")
        p.add_argument("--margins", choices=("units", "od"), default="units",
                       help="take s_in/s_out from the units file or from the OD file")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    if replicas is not None:
        p.add_argument("--replicas", type=int, default=replicas)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--config", default=None, help="key=value or manifest JSON file")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> tuple[Parser, dict[str, Parser]]:
    parser = Parser(prog="commuting", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=Parser)
    subs = {}

    p = subs["generate"] = sub.add_parser("generate", help="generate commuting networks")
    _common(p, od=True, replicas=1)
    p.add_argument("--beta", type=float, required=True, help="decay parameter, 1/m")

    p = subs["calibrate"] = sub.add_parser("calibrate", help="calibrate beta by KS distance")
    _common(p, od=True, od_required=True, replicas=100)
    p.add_argument("--beta-min", type=float, default=1e-6)
    p.add_argument("--beta-max", type=float, default=1e-2)
    p.add_argument("--strategy", choices=("golden", "grid"), default="golden")
    p.add_argument("--tol", type=float, default=1e-2, help="relative beta tolerance")
    p.add_argument("--bin-width-m", type=float, default=DEFAULT_BIN_WIDTH_M)
    p.add_argument("--ks-mode", choices=("cdf", "pmf"), default="cdf")

    p = subs["validate"] = sub.add_parser("validate", help="CPC of generated vs observed flows")
    _common(p, od=True, od_required=True, replicas=10)
    p.add_argument("--beta", type=float, required=True)

    p = subs["fit-law"] = sub.add_parser("fit-law", help="fit beta = alpha <S>^-nu")
    _common(p, units=False, seed=False)
    p.add_argument("--cases", required=True, help="case summary CSV")

    p = subs["crossval"] = sub.add_parser("crossval", help="repeated-split cross-validation")
    _common(p, units=False)
    p.add_argument("--cases", required=True)
    p.add_argument("--train-size", type=int, default=53)
    p.add_argument("--repeats", type=int, default=10_000)

    p = subs["radiation"] = sub.add_parser("radiation", help="radiation model flows")
    _common(p, od=True, seed=False)
    p.add_argument("--total-population", type=float, default=None)
    p.add_argument("--n-commuters", type=float, default=None)
    p.add_argument("--prefactor", choices=("population", "commuters"), default="population")

    p = subs["report"] = sub.add_parser("report", help="model comparison series for plotting")
    _common(p, od=True, od_required=True, replicas=1)
    p.add_argument("--beta", type=float, default=None,
                   help="decay parameter; predicted from the mean unit area if omitted")
    p.add_argument("--bin-width-m", type=float, default=DEFAULT_BIN_WIDTH_M)
    p.add_argument("--log-bins", type=int, default=20)
    return parser, subs


def _read_config(path) -> tuple[str | None, dict]:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = None
    if isinstance(data, dict):
        if "args" in data:
            return data.get("command"), dict(data["args"])
        return data.pop("command", None), data
    cfg = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        cfg[k] = v
    return cfg.pop("command", None), cfg


def parse_args(argv):
    parser, subs = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    argv = list(argv)
    config = {}
    if known.config:
        command, config = _read_config(known.config)
        if command and not any(a in subs for a in argv):
            argv.insert(0, command)
    cmd = next((a for a in argv if a in subs), None)
    if cmd is None:
        raise UsageError("a subcommand is required: " + " | ".join(subs))
    sp = subs[cmd]
    dests = {a.dest: a for a in sp._actions}
    defaults = {}
    for k, v in config.items():
        dest = k.lstrip("-").replace("-", "_")
        if dest in ("config", "command"):
            continue
        if dest not in dests:
            raise UsageError(f"unknown config key {k!r}")
        action = dests[dest]
        if v is not None and action.type is not None and isinstance(v, str):
            v = action.type(v)
        elif isinstance(action, argparse._StoreTrueAction):
            v = _bool(v)
        defaults[dest] = v
        action.required = False
    sp.set_defaults(**defaults)
    args = parser.parse_args(argv)
    args.config_out = config.get("out")
    return args


def _out_dir(args) -> Path:
    import os

    if args.out:
        return Path(args.out)
    if os.environ.get(ENV_OUT):
        return Path(os.environ[ENV_OUT])
    return Path(args.config_out or "out")


def _manifest(args, out: Path, outputs: list[str], extra=None):
    skip = {"config", "config_out", "verbose", "out", "command"}
    inputs = {}
    resolved = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if k in PATH_ARGS and v is not None:
            p = Path(v).resolve()
            inputs[k] = {"path": str(p), "sha256": sha256(p)}
            v = str(p)
        resolved[k] = v
    manifest = {
        "tool": "commuting",
        "version": __version__,
        "command": args.command,
        "args": resolved,
        "inputs": inputs,
        "outputs": sorted(outputs),
    }
    if extra:
        manifest.update(extra)
    write_json(out / "manifest.json", manifest)


def _area(args):
    od = args.od if getattr(args, "margins", "units") == "od" else None
    return load_study_area(args.units, args.mode, od_path=od,
                           exclude_self=args.exclude_self, force=args.force)


def cmd_generate(args, out):
    area = _area(args)
    config = GenerationConfig(args.beta, args.seed, args.exclude_self, args.replicas)
    if args.replicas == 1:
        write_flow_matrix(out / "generated_od.csv",
                          generate_network(area, config, force=args.force))
        return ["generated_od.csv"], {}
    mats, mean = run_replicas(area, config, force=args.force)
    names = []
    for r, mat in enumerate(mats):
        names.append(f"generated_od_r{r:03d}.csv")
        write_flow_matrix(out / names[-1], mat)
    write_flow_matrix(out / "mean_od.csv", mean)
    return names + ["mean_od.csv"], {}


def _observed(args, area) -> FlowMatrix:
    return observed_flows(read_od(args.od), area, args.exclude_self)


def cmd_calibrate(args, out):
    area = _area(args)
    obs = _observed(args, area)
    res = calibrate_beta(area, obs, beta_min=args.beta_min, beta_max=args.beta_max,
                         strategy=args.strategy, tolerance=args.tol, replicas=args.replicas,
                         seed=args.seed, bin_width=args.bin_width_m, ks_mode=args.ks_mode,
                         exclude_self=args.exclude_self)
    trace = [[p.beta, p.ks, p.cpc] for p in res.trace]
    write_table(out / "calibration_trace.csv", ["beta", "mean_ks", "mean_cpc"], trace)
    summary = {"beta_star": res.beta_star, "ks_at_star": res.ks_at_star,
               "cpc_at_star": next(p.cpc for p in res.trace if p.beta == res.beta_star),
               "strategy": res.strategy, "replicas": res.replicas,
               "mean_area_km2": mean_unit_area(area)}
    write_json(out / "calibration.json", summary)
    print(f"beta_star={res.beta_star!r} ks={res.ks_at_star!r}")
    return ["calibration_trace.csv", "calibration.json"], {"result": summary, "trace": trace}


def cmd_validate(args, out):
    area = _area(args)
    obs = _observed(args, area)
    obs_table = build_comparison_table(obs, area.s_in, area.s_out)
    arrays = replica_flows(area, args.beta, args.seed, args.replicas, args.exclude_self)
    sims = [build_comparison_table(FlowMatrix(a, area.residence_ids, area.ids),
                                   area.s_in, area.s_out) for a in arrays]
    values = [cpc(obs_table, s) for s in sims]
    write_flow_matrix(out / "observed_table.csv", obs_table)
    write_flow_matrix(out / "simulated_table.csv", sims[0])
    write_table(out / "cpc_replicas.csv", ["replica", "cpc"], list(enumerate(values)))
    summary = {"beta": args.beta, "cpc_mean": float(np.mean(values)),
               "cpc_min": float(np.min(values)), "cpc_max": float(np.max(values))}
    write_json(out / "validation.json", summary)
    print(f"cpc={summary['cpc_mean']!r}")
    return ["observed_table.csv", "simulated_table.csv", "cpc_replicas.csv",
            "validation.json"], {"result": summary}


def cmd_fit_law(args, out):
    cases = read_cases(args.cases)
    fit = fit_power_law(cases)
    pts = loglog_points(cases)
    rows = [[c.case_id, x, y, float(np.log(predict_beta(c.mean_area, fit)))]
            for c, (x, y) in zip(cases, pts)]
    write_table(out / "loglog.csv", ["case_id", "ln_mean_area", "ln_beta", "ln_beta_fit"], rows)
    summary = {"alpha": fit.alpha, "nu": fit.nu, "adj_r2": fit.adj_r2, "n_points": fit.n_points}
    write_json(out / "fit.json", summary)
    print(f"alpha={fit.alpha:.12e} nu={fit.nu:.12f} adj_r2={fit.adj_r2:.12f}")
    return ["loglog.csv", "fit.json"], {"result": summary}


def cmd_crossval(args, out):
    cases = read_cases(args.cases)
    cv = cross_validate(cases, args.train_size, args.repeats, args.seed)
    rows, est = [], []
    for c in cases:
        count, mean, lo, hi = cv.stats(c.case_id)
        rows.append([c.case_id, c.beta_calibrated, count, mean, lo, hi])
        est.extend([c.case_id, float(b)] for b in cv.estimates[c.case_id])
    write_table(out / "crossval_summary.csv",
                ["case_id", "beta_calibrated", "n_estimates", "mean", "min", "max"], rows)
    write_table(out / "crossval_estimates.csv", ["case_id", "beta_estimate"], est)
    summary = {"mean_estimates_per_case": cv.mean_count, "skipped_repeats": cv.skipped}
    write_json(out / "crossval.json", summary)
    print(f"mean estimates per case={cv.mean_count!r}")
    return ["crossval_summary.csv", "crossval_estimates.csv", "crossval.json"], {"result": summary}


def _radiation(args, area):
    from .core import InputError, build_distance_matrix

    units = area.units
    pops = [u.population for u in units]
    if any(p is None for p in pops):
        raise InputError("the radiation model needs a population column for every unit")
    pops = np.asarray(pops, dtype=float)
    total = args.total_population if args.total_population is not None else pops.sum()
    n_c = args.n_commuters if args.n_commuters is not None else float(area.s_out.sum())
    inputs = RadiationInputs(pops, total, n_c, build_distance_matrix(units, units, area.coordinate_mode))
    origin = None
    if args.prefactor == "commuters":
        origin = np.concatenate([area.s_out, np.zeros(area.m)])
    return radiation_flows(inputs, args.prefactor, origin)


def cmd_radiation(args, out):
    area = _area(args)
    t = _radiation(args, area)
    ids = area.ids
    write_flow_matrix(out / "radiation_flows.csv", FlowMatrix(t, ids, ids))
    names = ["radiation_flows.csv"]
    extra = {}
    if args.od:
        obs = _observed(args, area).flows[:, : area.n]
        rep = compare_models(obs, {"radiation": t[: area.n, : area.n]})
        r = rep.models["radiation"]
        write_table(out / "radiation_binned.csv",
                    ["bin_lo", "bin_hi", "mean_observed", "mean_model", "pairs"], r.binned)
        names.append("radiation_binned.csv")
        extra = {"result": {"cpc_radiation": r.cpc}}
        print(f"cpc_radiation={r.cpc!r}")
    return names, extra


def cmd_report(args, out):
    area = _area(args)
    beta = args.beta if args.beta is not None else predict_beta(mean_unit_area(area))
    obs = _observed(args, area).flows
    n = area.n
    arrays = replica_flows(area, beta, args.seed, args.replicas, args.exclude_self)
    gen = np.mean(np.stack(arrays), axis=0) if args.replicas > 1 else arrays[0]
    models = {"gravity": gen[:, :n]}
    if all(u.population is not None for u in area.units):
        args.total_population = None
        args.n_commuters = None
        args.prefactor = "population"
        models["radiation"] = _radiation(args, area)[:n, :n]
    rep = compare_models(obs[:, :n], models, log_bins=args.log_bins,
                         distances=area.distances[:, :n], bin_width=args.bin_width_m)
    names = []
    dist_cols = {"observed": rep.observed_distance_mass}
    for name, r in rep.models.items():
        write_table(out / f"scatter_{name}.csv", ["observed", "model"], r.scatter)
        write_table(out / f"binned_{name}.csv",
                    ["bin_lo", "bin_hi", "mean_observed", "mean_model", "pairs"], r.binned)
        names += [f"scatter_{name}.csv", f"binned_{name}.csv"]
        dist_cols[name] = r.distance_mass
    width = max(len(v) for v in dist_cols.values() if v is not None)
    cols = list(dist_cols)
    rows = []
    for k in range(width):
        row = [k * args.bin_width_m]
        for c in cols:
            v = dist_cols[c]
            row.append(float(v[k]) if v is not None and k < len(v) else 0.0)
        rows.append(row)
    write_table(out / "distance_distribution.csv", ["bin_lo_m"] + cols, rows)
    names.append("distance_distribution.csv")
    summary = {"beta": beta, **{f"cpc_{k}": r.cpc for k, r in rep.models.items()}}
    write_json(out / "report.json", summary)
    names.append("report.json")
    print(" ".join(f"{k}={v!r}" for k, v in summary.items()))
    return names, {"result": summary}


COMMANDS = {
    "generate": cmd_generate,
    "calibrate": cmd_calibrate,
    "validate": cmd_validate,
    "fit-law": cmd_fit_law,
    "crossval": cmd_crossval,
    "radiation": cmd_radiation,
    "report": cmd_report,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"error: usage: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: config: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = _out_dir(args)
    try:
        out.mkdir(parents=True, exist_ok=True)
        outputs, extra = COMMANDS[args.command](args, out)
        _manifest(args, out, outputs, extra)
    except (CommutingError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
