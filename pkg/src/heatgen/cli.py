"""Command-line driver.

Subcommands ``ingest``, ``classify``, ``simulate``, ``aggregate``,
``scenario`` and ``validate`` form the pipeline; ``make-demo`` writes a
synthetic input set.  Exit codes: 0 success, 1 empty or degenerate
result, 2 input error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, demo, seeding
from .archetype import ClassRules, parse_archetypes
from .config import EngineConfig
from .errors import EmptyDatasetError, HeatgenError, InputError
from .fixedpoint import HEAT_SCALE, quantize, series_csv
from .ingest import normalize_buildings, parse_buildings, write_buildings, write_diagnostics
from .manifest import Manifest
from .occupancy import bucket_mean, default_initial_state, parse_matrices, propagate_marginals, sample_chains
from .pipeline import RunSpec, batch_bounds, prepare_stock, run_stock
from .scenario import (
    STRATEGIES,
    AggregateSeries,
    double_peak,
    run_scenario,
    stats_avg_day,
    stats_daily,
    temperature_correlation,
)
from .weather import DAY_TYPES, Calendar, parse_weather

log = logging.getLogger("heatgen")

EXIT_OK, EXIT_DEGENERATE, EXIT_INPUT = 0, 1, 2
HEAT_HEADER = "building_id,hour,heat_kw"
PARAM_COLUMNS = [
    "building_id",
    "building_class",
    "archetype_id",
    "fallback_used",
    "residential_area_m2",
    "n_dwellings",
    "q_spec_kwh_m2a",
    "annual_demand_kwh",
    "G_kw_per_k",
    "k_kwh_per_k",
    "q_max_kw",
    "t_set_day_c",
    "t_set_night_c",
    "simulated_annual_kwh",
    "peak_kw",
]
CLASSIFICATION_COLUMNS = [
    "building_id",
    "building_class",
    "archetype_id",
    "q_spec_kwh_m2a",
    "q_spec_retrofit_kwh_m2a",
    "annual_demand_kwh",
    "annual_demand_retrofit_kwh",
    "fallback_used",
]


# -- shared plumbing ---------------------------------------------------------


class Run:
    """Per-invocation context: resolved config and seed, output dir, manifest."""

    def __init__(self, args: argparse.Namespace, config_items: dict[str, str] | None = None):
        self.t0 = time.perf_counter()
        self.args = args
        if args.config:
            self.cfg = EngineConfig.from_file(args.config)
        elif config_items is not None:
            self.cfg = EngineConfig.from_mapping(config_items)
        else:
            self.cfg = EngineConfig()
        if args.seed is not None:
            self.seed, source = args.seed, "flag"
        elif self.cfg.global_seed is not None:
            self.seed, source = self.cfg.global_seed, "config"
        else:
            self.seed, source = seeding.draw_seed(), "drawn"
        if not 0 <= self.seed < 2**64:
            raise InputError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = Manifest()
        self.manifest.set("command", args.command)
        self.manifest.set("engine_version", __version__)
        self.manifest.set("global_seed", self.seed)
        self.manifest.set("seed_source", source)
        if args.config:
            self.manifest.add_input("config", args.config)
        for key, value in self.cfg.to_items():
            self.manifest.set(f"config.{key}", value)

    @property
    def jobs(self) -> int:
        return max(1, self.args.jobs)

    def path(self, name: str) -> Path:
        return self.out / name

    def finish(self, outputs: list[Path]) -> None:
        for p in outputs:
            self.manifest.add_output(p)
        self.manifest.set("duration_s", f"{time.perf_counter() - self.t0:.3f}")
        self.manifest.write(self.out)


def require_file(path: str | Path | None, what: str) -> Path:
    if path is None:
        raise InputError(f"missing {what} path")
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{what} not found: {path}")
    return path


def load_buildings(path, cadaster, cfg: EngineConfig):
    records, diagnostics = parse_buildings(require_file(path, "buildings file"))
    norm, diags = normalize_buildings(records, cadaster, cfg.usable_fraction)
    return records, norm, diagnostics + diags


def check_failures(n_failed: int, n_total: int, cfg: EngineConfig) -> int:
    if n_total and n_failed / n_total > cfg.failure_threshold:
        log.error("%d of %d buildings failed (threshold %.0f%%)", n_failed, n_total, 100 * cfg.failure_threshold)
        return EXIT_DEGENERATE
    return EXIT_OK


def _r(x: float) -> str:
    return repr(float(x))


# -- subcommands -------------------------------------------------------------


def cmd_ingest(args) -> int:
    run = Run(args)
    cadaster = require_file(args.cadaster, "cadaster file") if args.cadaster else None
    run.manifest.add_input("buildings", require_file(args.buildings, "buildings file"))
    if cadaster:
        run.manifest.add_input("cadaster", cadaster)
    diag_path = run.path("ingest_diagnostics.csv")
    try:
        records, norm, diagnostics = load_buildings(args.buildings, cadaster, run.cfg)
    except EmptyDatasetError as exc:
        write_diagnostics(exc.diagnostics, diag_path)
        raise
    norm_path = run.path("buildings.norm.csv")
    write_buildings(norm, norm_path)
    write_diagnostics(diagnostics, diag_path)
    run.manifest.set("count.parsed", len(records))
    run.manifest.set("count.normalized", len(norm))
    run.manifest.set("count.excluded", sum(d.level == "error" for d in diagnostics))
    run.finish([norm_path, diag_path])
    log.info("ingest: %d records in, %d normalized -> %s", len(records), len(norm), norm_path)
    return EXIT_OK


def cmd_classify(args) -> int:
    from .archetype import annual_demand, classify, dataset_share_weights, fallback_archetype

    run = Run(args)
    run.manifest.add_input("buildings", require_file(args.buildings, "buildings file"))
    run.manifest.add_input("archetypes", require_file(args.archetypes, "archetype table"))
    table = parse_archetypes(args.archetypes)
    _, norm, diagnostics = load_buildings(args.buildings, None, run.cfg)
    rules = ClassRules.from_config(run.cfg)
    residential = [b for b in norm if b.is_residential]
    share = dataset_share_weights(residential, table, rules) if run.cfg.fallback_weighting == "dataset_share" else {}
    fallbacks = {c: fallback_archetype(table, c, share.get(c)) for c in table.classes}
    out_path = run.path("classification.csv")
    failed = 0
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CLASSIFICATION_COLUMNS)
        for b in residential:
            try:
                arch, fb = classify(b, table, rules, fallbacks)
                e = annual_demand(b, arch, fb)
            except HeatgenError as exc:
                failed += 1
                diagnostics.append(_diag(b.id, "classify", exc))
                continue
            writer.writerow(
                [b.id, e.building_class, e.archetype_id, _r(e.q_spec), _r(e.q_spec_retrofit),
                 _r(e.annual_demand), _r(e.annual_demand_retrofit), "true" if fb else "false"]
            )
    diag_path = run.path("classify_diagnostics.csv")
    write_diagnostics(diagnostics, diag_path)
    run.manifest.set("count.residential", len(residential))
    run.manifest.set("count.failed", failed)
    run.finish([out_path, diag_path])
    if not residential or failed == len(residential):
        log.error("classify: no residential building could be classified")
        return EXIT_DEGENERATE
    return check_failures(failed, len(residential), run.cfg)


def _diag(bid, source, exc):
    from .ingest import Diagnostic

    return Diagnostic("error", bid, source, str(exc))


def load_simulation_inputs(run: Run, paths: dict[str, Path], limit: int | None = None, retrofit: bool = False):
    """Parse inputs and build the stock; returns (stock, weather, matrices, diagnostics, failed, n_res)."""
    for name in ("buildings", "archetypes", "matrices", "weather"):
        require_file(paths.get(name), f"{name} file")
        run.manifest.add_input(name, paths[name])
    table = parse_archetypes(paths["archetypes"])
    matrices = parse_matrices(paths["matrices"])
    weather = parse_weather(paths["weather"], horizon=run.cfg.horizon_h)
    records, norm, diagnostics = load_buildings(paths["buildings"], None, run.cfg)
    residential = [b for b in norm if b.is_residential]
    if limit is not None:
        residential = residential[:limit]
    stock, diags, failed = prepare_stock(residential, table, weather, run.cfg, run.seed, retrofit=retrofit)
    run.manifest.set("count.parsed", len(records))
    run.manifest.set("count.excluded", len(records) - len(norm))
    run.manifest.set("count.residential", len(residential))
    run.manifest.set("count.failed", failed)
    run.manifest.set("count.simulated", len(stock))
    return stock, weather, matrices, diagnostics + diags, failed, len(residential)


def cmd_simulate(args) -> int:
    run = Run(args)
    paths = {
        "buildings": args.buildings,
        "archetypes": args.archetypes,
        "matrices": args.matrices,
        "weather": args.weather,
    }
    stock, weather, matrices, diagnostics, failed, n_res = load_simulation_inputs(
        run, paths, args.buildings_limit, args.retrofit
    )
    run.manifest.set("retrofit", args.retrofit)
    run.manifest.set("emit_temps", args.emit_temps)
    diag_path = run.path("simulate_diagnostics.csv")
    write_diagnostics(diagnostics, diag_path)
    if not len(stock):
        log.error("simulate: no building could be parameterized")
        run.finish([diag_path])
        return EXIT_DEGENERATE

    spec = RunSpec(stock, weather, matrices, run.cfg, emit_csv=True, emit_temps=args.emit_temps)
    heat_path = run.path("heat.csv")
    done = [0]
    with open(heat_path, "wb") as fh:
        fh.write((HEAT_HEADER + (",t_in_c" if args.emit_temps else "") + "\n").encode())

        def sink(block: bytes) -> None:
            fh.write(block)
            done[0] += 1
            log.info("simulate: batch %d of %d written", done[0], n_batches)

        n_batches = len(batch_bounds(len(stock), run.cfg.chunk_size))
        summary = run_stock(spec, run.jobs, sink=sink)

    params_path = run.path("buildings_params.csv")
    with open(params_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PARAM_COLUMNS)
        for i, (b, e) in enumerate(zip(stock.records, stock.energies)):
            writer.writerow(
                [b.id, e.building_class, e.archetype_id, "true" if e.fallback_used else "false",
                 _r(b.residential_area), b.n_dwellings, _r(e.q_spec), _r(stock.ahd_used[i]),
                 _r(stock.G[i]), _r(stock.k[i]), _r(stock.q_max[i]), _r(stock.t_set_day[i]),
                 _r(stock.t_set_night[i]), f"{summary.annual_kwh[i]:.3f}", f"{summary.peak_kw[i]:.3f}"]
            )
    agg_path = run.path("aggregate.csv")
    agg_path.write_bytes(series_csv("hour,heat_kw", summary.aggregate_q))
    run.manifest.set("aggregate.annual_kwh", f"{summary.aggregate_q.sum() * run.cfg.dt_h / HEAT_SCALE:.3f}")
    run.manifest.set("aggregate.peak_kw", f"{summary.aggregate_q.max() / HEAT_SCALE:.3f}")
    run.finish([heat_path, params_path, agg_path, diag_path])
    log.info("simulate: %d buildings -> %s", len(stock), heat_path)
    return check_failures(failed, n_res, run.cfg)


def read_heat_quanta(path: Path, ids: set[str] | None = None) -> tuple[np.ndarray, set[str]]:
    """Hourly integer-watt sums from a long per-building CSV."""
    df = pd.read_csv(path, usecols=["building_id", "hour", "heat_kw"], dtype={"building_id": str})
    if ids is not None:
        df = df[df["building_id"].isin(ids)]
    if df.empty:
        raise EmptyDatasetError("no heat rows match the requested buildings")
    q = quantize(df["heat_kw"].to_numpy())
    hours = df["hour"].to_numpy()
    total = np.zeros(int(hours.max()) + 1, dtype=np.int64)
    np.add.at(total, hours, q)
    return total, set(df["building_id"].unique())


def cmd_aggregate(args) -> int:
    run = Run(args)
    heat_path = Path(args.heat) if args.heat else Path(args.run or args.out) / "heat.csv"
    require_file(heat_path, "per-building heat file (run simulate first)")
    run.manifest.add_input("heat", heat_path)
    ids = None
    if args.ids:
        run.manifest.add_input("ids", require_file(args.ids, "id list"))
        ids = {line.strip() for line in Path(args.ids).read_text(encoding="utf-8").splitlines() if line.strip()}
    quanta, members = read_heat_quanta(heat_path, ids)
    if ids is not None and ids - members:
        log.warning("aggregate: %d requested ids have no heat rows", len(ids - members))
    out_path = run.path(args.output)
    out_path.write_bytes(series_csv("hour,heat_kw", quanta))
    run.manifest.set("count.members", len(members))
    run.finish([out_path])
    return EXIT_OK


def _run_inputs(run_dir: Path) -> Manifest:
    if not (run_dir / Manifest.FILENAME).is_file():
        raise InputError(f"no {Manifest.FILENAME} in {run_dir} (run simulate first)")
    return Manifest.read(run_dir)


def _rebuild(args, run_dir: Path):
    upstream = _run_inputs(run_dir)
    if args.seed is None:
        args.seed = int(upstream.items["global_seed"])
    run = Run(args, config_items=upstream.config_items())
    paths = upstream.inputs()
    limit = int(upstream.items["count.residential"]) if "count.residential" in upstream.items else None
    return run, upstream, paths, limit


def cmd_scenario(args) -> int:
    run_dir = Path(args.run)
    run, upstream, paths, limit = _rebuild(args, run_dir)
    run.manifest.set("upstream", run_dir.resolve())
    stock, weather, matrices, _, _, _ = load_simulation_inputs(run, paths, limit)
    if not len(stock):
        raise EmptyDatasetError("stock is empty")

    def progress(done, total):
        log.info("scenario: repetition %d of %d", done, total)

    result = run_scenario(
        stock, weather, matrices, run.cfg, args.strategy, args.fraction, args.repetitions, run.seed,
        jobs=run.jobs, progress=progress,
    )
    out_path = run.path("scenario_result.csv")
    result.write_csv(out_path)
    s = result.summary()
    run.manifest.set("scenario.strategy", args.strategy)
    run.manifest.set("scenario.fraction", args.fraction)
    run.manifest.set("scenario.repetitions", args.repetitions)
    for key in ("mean_annual", "std_annual", "mean_peak", "std_peak", "mean_annual_reduction_pct"):
        run.manifest.set(f"scenario.{key}", f"{s[key]:.3f}")
    run.finish([out_path])
    print(
        f"{args.strategy} {args.fraction:g}: annual {s['mean_annual'] / 1e3:.1f} +/- {s['std_annual'] / 1e3:.1f} MWh "
        f"({s['mean_annual_reduction_pct']:.2f} % below baseline), peak {s['mean_peak']:.1f} +/- {s['std_peak']:.1f} kW"
    )
    return EXIT_OK


def occupancy_convergence(stock, matrices, cal: Calendar, batch: int = 1000) -> float:
    """Max abs gap between bucketed stock activity and the exact chain marginals."""
    init = default_initial_state(cal)
    total = np.zeros(len(cal))
    for lo, hi in batch_bounds(len(stock), batch):
        seeds = [seeding.occupancy_seed(int(s), 0) for s in stock.seeds[lo:hi]]
        total += sample_chains(matrices, cal, seeds, init).sum(axis=1)
    sampled = bucket_mean(total / len(stock), cal)
    exact = bucket_mean(propagate_marginals(matrices, cal, init), cal)
    return float(np.nanmax(np.abs(sampled - exact)))


def cmd_validate(args) -> int:
    run_dir = Path(args.run)
    run, upstream, paths, limit = _rebuild(args, run_dir)
    agg_path = require_file(run_dir / "aggregate.csv", "aggregate.csv (run simulate first)")
    run.manifest.add_input("aggregate", agg_path)
    weather = parse_weather(require_file(paths.get("weather"), "weather file"), horizon=run.cfg.horizon_h)
    cal = Calendar.for_weather(weather)
    df = pd.read_csv(agg_path)
    if len(df) != len(weather):
        raise InputError(f"aggregate has {len(df)} hours, weather has {len(weather)}")
    agg = AggregateSeries(quantize(df["heat_kw"].to_numpy()))
    if agg.quanta.max() <= 0:
        raise EmptyDatasetError("aggregate demand is zero everywhere")

    daily = stats_daily(agg, weather, cal)
    months = run.cfg.heating_season_months
    r = temperature_correlation(daily, months)
    profiles = {}
    for d, name in enumerate(DAY_TYPES):
        for label, sel in (("jan", (1,)), ("season", months)):
            try:
                profiles[f"{name}_{label}"] = stats_avg_day(agg, cal, d, sel)
            except ValueError:
                continue
    key = "weekday_jan" if "weekday_jan" in profiles else "weekday_season"
    flag, morning, evening = double_peak(profiles[key]) if key in profiles else (False, None, None)

    stock, _, matrices, _, _, _ = load_simulation_inputs(run, paths, limit)
    conv = occupancy_convergence(stock, matrices, cal)

    daily_path = run.path("daily_stats.csv")
    daily.to_csv(daily_path, index=False, float_format="%.3f", lineterminator="\n")
    avg_path = run.path("avg_day.csv")
    pd.DataFrame({"hour": np.arange(24), **profiles}).to_csv(avg_path, index=False, float_format="%.3f", lineterminator="\n")
    report = {
        "pearson_r_daily_demand_vs_temp": f"{r:.4f}",
        "correlation_months": ",".join(map(str, months)),
        "n_correlation_days": int(daily["month"].isin(months).sum()),
        "avg_day_profile": key,
        "morning_peak_hour": "" if morning is None else int(morning),
        "evening_peak_hour": "" if evening is None else int(evening),
        "double_peak": "true" if flag else "false",
        "occupancy_convergence_max_abs_error": f"{conv:.4f}",
        "aggregate_annual_kwh": f"{agg.annual_kwh(run.cfg.dt_h):.3f}",
        "aggregate_peak_kw": f"{agg.peak_kw:.3f}",
        "aggregate_peak_hour": int(np.argmax(agg.quanta)),
    }
    report_path = run.path("validation_report.txt")
    report_path.write_text("".join(f"{k} = {v}\n" for k, v in report.items()), encoding="utf-8")
    run.finish([report_path, daily_path, avg_path])
    print(f"r = {report['pearson_r_daily_demand_vs_temp']}, double_peak = {report['double_peak']}, "
          f"occupancy error = {report['occupancy_convergence_max_abs_error']}")
    return EXIT_OK


def cmd_make_demo(args) -> int:
    out = Path(args.out)
    paths = demo.write_demo_inputs(out, n=args.n, seed=args.town_seed)
    (out / "config.txt").write_text("".join(f"{k} = {v}\n" for k, v in EngineConfig().to_items() if v != ""),
                                    encoding="utf-8")
    for name, p in paths.items():
        log.info("make-demo: %s -> %s", name, p)
    return EXIT_OK


# -- argument parsing --------------------------------------------------------


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("fraction must be in [0, 1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="engine config file (key = value)")
    common.add_argument("--seed", type=_u64, help="global seed; drawn and recorded when absent")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    common.add_argument("--out", default="out", help="output directory (default ./out)")
    common.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")

    parser = argparse.ArgumentParser(prog="heatgen", description="Synthetic residential heat demand profiles.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="normalize a building inventory")
    p.add_argument("--buildings", required=True, help="buildings CSV or GeoJSON")
    p.add_argument("--cadaster", help="unit-level cadaster CSV")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("classify", parents=[common], help="assign archetypes and annual demand")
    p.add_argument("--buildings", required=True)
    p.add_argument("--archetypes", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("simulate", parents=[common], help="hourly heat demand per building")
    p.add_argument("--buildings", required=True, help="normalized buildings CSV")
    p.add_argument("--archetypes", required=True)
    p.add_argument("--matrices", required=True, help="occupancy transition matrices CSV")
    p.add_argument("--weather", required=True)
    p.add_argument("--buildings-limit", type=int, help="simulate only the first N residential buildings")
    p.add_argument("--emit-temps", action="store_true", help="add indoor temperature to heat.csv")
    p.add_argument("--retrofit", action="store_true", help="use retrofit demand for every building")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("aggregate", parents=[common], help="sum per-building series")
    p.add_argument("--heat", help="per-building heat CSV (default <run>/heat.csv)")
    p.add_argument("--run", help="simulate output directory")
    p.add_argument("--ids", help="file with one building id per line")
    p.add_argument("--output", default="aggregate.csv", help="file name inside --out")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("scenario", parents=[common], help="retrofit strategy experiment")
    p.add_argument("--run", required=True, help="simulate output directory")
    p.add_argument("--strategy", choices=STRATEGIES, required=True)
    p.add_argument("--fraction", type=_fraction, required=True, help="share of residential area to retrofit")
    p.add_argument("--repetitions", type=int, default=50)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("validate", parents=[common], help="validation statistics for a simulate run")
    p.add_argument("--run", required=True, help="simulate output directory")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("make-demo", parents=[common], help="write a synthetic demo input set")
    p.add_argument("--n", type=int, default=1000, help="number of buildings")
    p.add_argument("--town-seed", type=int, default=11)
    p.set_defaults(func=cmd_make_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    if args.jobs < 1:
        args.jobs = os.cpu_count() or 1
    try:
        return args.func(args)
    except InputError as exc:
        print(f"heatgen: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EmptyDatasetError as exc:
        print(f"heatgen: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except HeatgenError as exc:
        print(f"heatgen: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
