"""Command-line entry points: run sweeps, score complexity, audit, emit curves.

All outputs are plain text (JSON, JSON-lines, CSV) and reproducible
bit-for-bit from the resolved config in the manifest plus the seeds; only
the manifest itself carries timestamps and timing.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .acquisition import STRATEGIES, AcquisitionSpec
from .campaign import CampaignConfig, aggregate_cells, run_sweep
from .complexity import compute_report
from .core import Threshold, resolve_threshold
from .oracle import FAMILIES, OracleError, OracleSpec, build_pool
from .surrogate import SIGMA_FLOOR, KernelSpec, default_kernel_grid
from .theory import AuditConfig, EnumerationGuardError, run_audit

OUTPUT_DIR_ENV = "HITSEEK_OUT"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class ConfigError(ValueError):
    """Invalid configuration or usage; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise ConfigError(message)


_CONFIG_KEYS = {
    "oracle", "threshold", "strategies", "cycles", "batch_size", "warm_start",
    "seeds", "kernel_grid", "standardize", "sigma_floor", "compute_smape",
    "thompson_mode", "audit",
}

_AUDIT_KEYS = {"delta", "epsilon", "lengthscale", "signal_variance", "noise_variance"}

_ORACLE_KEYS = {
    "family", "pool_size", "noise_std", "seed", "sampling", "n_genes",
    "path", "feature_columns", "response_column",
}


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return raw


def resolve_config(raw: dict) -> dict:
    """Validate a raw config and materialize every default.

    The resolved dict is itself a valid config: feeding it back through the
    run command reproduces the same outputs.
    """
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")

    oracle_raw = raw.get("oracle")
    if not isinstance(oracle_raw, dict):
        raise ConfigError("config key 'oracle' must be an object")
    unknown = set(oracle_raw) - _ORACLE_KEYS
    if unknown:
        raise ConfigError(f"unknown config key 'oracle.{sorted(unknown)[0]}'")
    if oracle_raw.get("family") not in FAMILIES:
        raise ConfigError(f"config key 'oracle.family' must be one of {FAMILIES}")
    oracle_seed = oracle_raw.get("seed", 0)
    try:
        spec = OracleSpec(
            family=oracle_raw["family"],
            pool_size=oracle_raw.get("pool_size"),
            noise_std=oracle_raw.get("noise_std"),
            seed=None if oracle_seed is None else int(oracle_seed),
            sampling=oracle_raw.get("sampling", "uniform"),
            n_genes=int(oracle_raw.get("n_genes", 50)),
            path=oracle_raw.get("path"),
            feature_columns=oracle_raw.get("feature_columns"),
            response_column=oracle_raw.get("response_column"),
        ).resolved()
    except ValueError as exc:
        raise ConfigError(f"config key 'oracle': {exc}") from exc

    threshold = _parse_threshold(raw.get("threshold", "q0.1"))

    strategies = raw.get("strategies", ["probability_of_hit"])
    if isinstance(strategies, str):
        strategies = [strategies]
    if not strategies:
        raise ConfigError("config key 'strategies' must not be empty")
    for name in strategies:
        if name not in STRATEGIES:
            raise ConfigError(f"config key 'strategies' has unknown entry {name!r}")

    cycles = _require_int(raw, "cycles", default=10, minimum=1)
    batch_size = _require_int(raw, "batch_size", default=5, minimum=1)
    warm_start = raw.get("warm_start")
    warm_start = batch_size if warm_start is None else _require_int(raw, "warm_start", minimum=0)

    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("config key 'seeds' must be a nonempty list of integers")
    try:
        seeds = [int(s) for s in seeds]
    except (TypeError, ValueError) as exc:
        raise ConfigError("config key 'seeds' must be a list of integers") from exc

    try:
        dimension = _family_dimension(spec)
    except OracleError as exc:
        raise ConfigError(f"config key 'oracle': {exc}") from exc
    grid_raw = raw.get("kernel_grid")
    if grid_raw is None:
        grid = default_kernel_grid(dimension)
    else:
        grid = tuple(_parse_kernel(entry, i) for i, entry in enumerate(grid_raw))
        if not grid:
            raise ConfigError("config key 'kernel_grid' must not be empty")

    thompson_mode = raw.get("thompson_mode", "per_slot")
    if thompson_mode not in ("per_slot", "single_draw"):
        raise ConfigError("config key 'thompson_mode' must be 'per_slot' or 'single_draw'")

    audit_raw = raw.get("audit")
    if audit_raw is not None:
        if not isinstance(audit_raw, dict):
            raise ConfigError("config key 'audit' must be null or an object")
        unknown = set(audit_raw) - _AUDIT_KEYS
        if unknown:
            raise ConfigError(f"unknown config key 'audit.{sorted(unknown)[0]}'")
        audit_raw = {
            "delta": float(audit_raw.get("delta", 0.05)),
            "epsilon": float(audit_raw.get("epsilon", 0.2)),
            "lengthscale": audit_raw.get("lengthscale", 0.15),
            "signal_variance": float(audit_raw.get("signal_variance", 1.0)),
            "noise_variance": float(audit_raw.get("noise_variance", 1e-4)),
        }

    resolved = {
        "oracle": {
            "family": spec.family,
            "pool_size": spec.pool_size,
            "noise_std": spec.noise_std,
            "seed": spec.seed,
            "sampling": spec.sampling,
            "n_genes": spec.n_genes,
            "path": spec.path,
            "feature_columns": list(spec.feature_columns) if spec.feature_columns else None,
            "response_column": spec.response_column,
        },
        "threshold": {"mode": threshold.mode, "value": threshold.value},
        "strategies": list(strategies),
        "cycles": cycles,
        "batch_size": batch_size,
        "warm_start": warm_start,
        "seeds": seeds,
        "kernel_grid": [k.as_dict() for k in grid],
        "standardize": bool(raw.get("standardize", True)),
        "sigma_floor": float(raw.get("sigma_floor", SIGMA_FLOOR)),
        "compute_smape": bool(raw.get("compute_smape", True)),
        "thompson_mode": thompson_mode,
        "audit": audit_raw,
    }
    return resolved


def campaign_config_from_resolved(resolved: dict) -> CampaignConfig:
    oracle = resolved["oracle"]
    spec = OracleSpec(
        family=oracle["family"],
        pool_size=oracle["pool_size"],
        noise_std=oracle["noise_std"],
        seed=oracle["seed"],
        sampling=oracle["sampling"],
        n_genes=oracle["n_genes"],
        path=oracle["path"],
        feature_columns=tuple(oracle["feature_columns"]) if oracle["feature_columns"] else None,
        response_column=oracle["response_column"],
    )
    grid = tuple(
        KernelSpec(
            lengthscale=entry["lengthscale"] if not isinstance(entry["lengthscale"], list)
            else tuple(entry["lengthscale"]),
            signal_variance=entry["signal_variance"],
            noise_variance=entry["noise_variance"],
        )
        for entry in resolved["kernel_grid"]
    )
    audit = None
    if resolved.get("audit") is not None:
        entry = resolved["audit"]
        audit = AuditConfig(
            delta=entry["delta"],
            epsilon=entry["epsilon"],
            kernel=KernelSpec(
                lengthscale=entry["lengthscale"] if not isinstance(entry["lengthscale"], list)
                else tuple(entry["lengthscale"]),
                signal_variance=entry["signal_variance"],
                noise_variance=entry["noise_variance"],
            ),
        )
    return CampaignConfig(
        oracle=spec,
        acquisition=AcquisitionSpec(
            strategy=resolved["strategies"][0],
            batch_size=resolved["batch_size"],
            thompson_mode=resolved["thompson_mode"],
        ),
        threshold=Threshold(resolved["threshold"]["mode"], resolved["threshold"]["value"]),
        cycles=resolved["cycles"],
        warm_start=resolved["warm_start"],
        kernel_grid=grid,
        standardize=resolved["standardize"],
        sigma_floor=resolved["sigma_floor"],
        compute_smape=resolved["compute_smape"],
        audit=audit,
    )


def _parse_threshold(value) -> Threshold:
    try:
        if isinstance(value, str):
            return Threshold.parse(value)
        if isinstance(value, dict):
            return Threshold(value["mode"], float(value["value"]))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"config key 'threshold': {exc}") from exc
    raise ConfigError("config key 'threshold' must be a spec string or {mode, value} object")


def _parse_kernel(entry, index: int) -> KernelSpec:
    if not isinstance(entry, dict):
        raise ConfigError(f"config key 'kernel_grid[{index}]' must be an object")
    try:
        ls = entry["lengthscale"]
        return KernelSpec(
            lengthscale=tuple(ls) if isinstance(ls, list) else float(ls),
            signal_variance=float(entry.get("signal_variance", 1.0)),
            noise_variance=float(entry.get("noise_variance", 1e-4)),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"config key 'kernel_grid[{index}]': {exc}") from exc


def _require_int(raw: dict, key: str, default=None, minimum=None) -> int:
    value = raw.get(key, default)
    try:
        value = int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r} must be an integer") from exc
    if minimum is not None and value < minimum:
        raise ConfigError(f"config key {key!r} must be >= {minimum}")
    return value


def _family_dimension(spec: OracleSpec) -> int:
    if spec.family == "tabular":
        return build_pool(spec).pool.dimension
    return {"sine1d": 1, "sine2d": 2, "branin": 2, "pathways": 4, "sem": 6}[spec.family]


def _json_dumps(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _write_events(path: Path, result) -> None:
    lines = [_json_dumps({
        "record": "campaign",
        "strategy": result.strategy,
        "seed": result.seed,
        "tau": result.tau,
        "pool_size": result.pool_size,
        "hit_set_size": result.hit_set_size,
        "warm_ids": list(result.warm_ids),
        "warm_responses": list(result.warm_responses),
        "truncated": result.truncated,
    })]
    for record in result.records:
        lines.append(_json_dumps({
            "record": "cycle",
            "strategy": result.strategy,
            "seed": result.seed,
            "cycle": record.cycle,
            "batch": list(record.batch),
            "responses": list(record.responses),
            "kernel": record.kernel.as_dict(),
            "new_hits": record.metrics.new_hits,
            "hits_cum": record.metrics.cumulative_hits,
            "hit_ratio": record.metrics.hit_ratio,
            "smape": record.metrics.smape,
        }))
    if result.audit is not None:
        lines.append(_json_dumps({
            "record": "trace_audit",
            "strategy": result.strategy,
            "seed": result.seed,
            **result.audit.as_dict(),
        }))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


_AGGREGATE_COLUMNS = (
    "strategy", "cycle", "n_seeds", "hit_ratio_mean", "hit_ratio_std",
    "hits_mean", "hits_std", "smape_mean", "smape_std",
)


def _write_aggregate(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(_AGGREGATE_COLUMNS)
        for row in rows:
            writer.writerow([_csv_value(row[column]) for column in _AGGREGATE_COLUMNS])


def _csv_value(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def _cmd_run(args) -> int:
    resolved = resolve_config(load_config(args.config))
    if args.seed is not None:
        resolved["seeds"] = [int(args.seed)]
    if args.strategy:
        for name in args.strategy:
            if name not in STRATEGIES:
                raise ConfigError(f"--strategy has unknown entry {name!r}")
        resolved["strategies"] = list(args.strategy)
    if args.cycles is not None:
        resolved["cycles"] = int(args.cycles)
    if args.batch is not None:
        resolved["batch_size"] = int(args.batch)
    if args.tau is not None:
        threshold = _parse_threshold(args.tau)
        resolved["threshold"] = {"mode": threshold.mode, "value": threshold.value}
    resolved = resolve_config(resolved)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = campaign_config_from_resolved(resolved)

    started = time.perf_counter()
    sweep = run_sweep(config, resolved["strategies"], resolved["seeds"], jobs=args.jobs)
    elapsed = time.perf_counter() - started

    aggregate_path = out_dir / "aggregate.csv"
    _write_aggregate(aggregate_path, sweep.aggregate)

    event_paths = {}
    failures = {}
    for cell in sweep.cells:
        key = f"{cell.strategy}_{cell.seed}"
        if cell.result is None:
            failures[key] = cell.error
            continue
        path = out_dir / f"events_{key}.jsonl"
        _write_events(path, cell.result)
        event_paths[key] = path.name

    manifest = {
        "artifact": {"name": "hitseek", "version": __version__},
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config": resolved,
        "execution": {"jobs": args.jobs, "elapsed_seconds": elapsed},
        "outputs": {"aggregate": aggregate_path.name, "events": event_paths},
        "failures": failures,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    if failures:
        print(f"{len(failures)} campaign cell(s) failed; see manifest", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {aggregate_path} and {len(event_paths)} event log(s) to {out_dir}")
    return EXIT_OK


_COMPLEXITY_COLUMNS = (
    "seed", "smoothness", "n_clusters", "hit_spread", "effective_dim",
    "rho_max", "rho_distance_response", "degenerate_response", "n_hits",
)


def _cmd_complexity(args) -> int:
    if (args.family is None) == (args.tabular is None):
        raise ConfigError("provide exactly one of --family or --tabular")
    threshold = _parse_threshold(args.tau)
    seeds = [int(s) for s in args.seeds]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for seed in seeds:
        if args.family is not None:
            if args.family not in FAMILIES or args.family == "tabular":
                raise ConfigError(f"--family must be a synthetic family, not {args.family!r}")
            spec = OracleSpec(family=args.family, pool_size=args.pool_size,
                              noise_std=args.noise_std, seed=seed)
        else:
            spec = OracleSpec(family="tabular", path=args.tabular,
                              noise_std=args.noise_std,
                              feature_columns=tuple(args.features.split(",")) if args.features else None,
                              response_column=args.response, seed=seed)
        try:
            bundle = build_pool(spec)
        except OracleError as exc:
            raise ConfigError(str(exc)) from exc
        if args.k >= bundle.pool.size:
            raise ConfigError(
                f"--k {args.k} must be smaller than the dataset size {bundle.pool.size}")
        responses = bundle.truth
        if bundle.spec.noise_std and bundle.spec.noise_std > 0:
            responses = np.array([bundle.noisy_response(g, 0, seed)
                                  for g in range(bundle.pool.size)])
        tau = resolve_threshold(threshold, responses)
        report = compute_report(
            bundle.pool.features, responses, tau,
            k=args.k, min_pts=args.min_pts,
            eps=args.eps, pair_subsample_size=args.pairs, seed=seed,
        )
        rows.append({"seed": seed, **report.as_dict()})

    mean_row = {"seed": "mean"}
    for column in _COMPLEXITY_COLUMNS[1:]:
        values = [row[column] for row in rows if row[column] is not None
                  and not isinstance(row[column], bool)]
        if column == "degenerate_response":
            mean_row[column] = all(row[column] for row in rows)
        elif values:
            mean_row[column] = float(np.mean(values))
        else:
            mean_row[column] = None

    path = out_dir / "complexity.csv"
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(_COMPLEXITY_COLUMNS)
        for row in [*rows, mean_row]:
            writer.writerow([_csv_value(row[column]) for column in _COMPLEXITY_COLUMNS])
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_audit(args) -> int:
    config = AuditConfig(
        delta=args.delta,
        epsilon=args.epsilon,
        pool_size=args.pool_size,
        trials=args.trials,
        seed=args.seed,
        sigma_pool_size=args.sigma_pool_size,
        sigma_cycles=args.sigma_cycles,
        sigma_batch=args.sigma_batch,
    )
    guard_subsets = math.comb(config.sigma_pool_size, config.sigma_cycles * config.sigma_batch)
    if guard_subsets > 1_000_000:
        raise ConfigError(
            f"enumeration guard exceeded: C({config.sigma_pool_size}, "
            f"{config.sigma_cycles * config.sigma_batch}) = {guard_subsets} > 1000000"
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        report = run_audit(config)
    except EnumerationGuardError as exc:
        raise ConfigError(str(exc)) from exc
    path = out_dir / "audit.json"
    path.write_text(json.dumps(report.as_dict(), sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    status = "pass" if report.passed else "FAIL"
    print(f"audit {status}: cdf violations={report.cdf_bound.violations}, "
          f"sigma-sum trials={len(report.sigma_sum_trials)}, "
          f"mistake violations={report.mistake.violations} -> {path}")
    return EXIT_OK if report.passed else EXIT_RUNTIME


_CURVE_COLUMNS = ("strategy", "seed", "cycle", "hits_cum", "hit_ratio", "smape")


def emit_curves(event_records, path: Path) -> int:
    """Write cycle records as a long-format CSV suitable for any plotting tool."""
    rows = 0
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(_CURVE_COLUMNS)
        for record in event_records:
            writer.writerow([_csv_value(record[column]) for column in _CURVE_COLUMNS])
            rows += 1
    return rows


def _cmd_curves(args) -> int:
    manifest_path = Path(args.manifest)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    base = manifest_path.parent

    records = []
    events = manifest.get("outputs", {}).get("events", {})
    for key in sorted(events):
        for line in (base / events[key]).read_text(encoding="utf-8").splitlines():
            entry = json.loads(line)
            if entry.get("record") != "cycle":
                continue
            records.append({column: entry[column] for column in _CURVE_COLUMNS})
    if not records:
        raise ConfigError(f"manifest {manifest_path} lists no cycle records")

    out_dir = Path(args.out) if args.out else base
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "curves.csv"
    rows = emit_curves(records, path)
    print(f"wrote {rows} rows to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hitseek",
                     description="Batch active-learning engine for threshold-exceedance discovery")
    default_out = os.environ.get(OUTPUT_DIR_ENV, ".")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a campaign sweep from a config file")
    run_p.add_argument("--config", required=True, help="JSON config file")
    run_p.add_argument("--seed", type=int, default=None, help="override: single campaign seed")
    run_p.add_argument("--strategy", action="append", default=None,
                       help="override: strategy name (repeatable)")
    run_p.add_argument("--cycles", type=int, default=None)
    run_p.add_argument("--batch", type=int, default=None)
    run_p.add_argument("--tau", default=None, help="threshold spec, e.g. q0.10 or a0.5")
    run_p.add_argument("--out", default=default_out)
    run_p.add_argument("--jobs", type=int, default=1)
    run_p.set_defaults(func=_cmd_run)

    cx_p = sub.add_parser("complexity", help="complexity report for a dataset")
    cx_p.add_argument("--family", default=None, help="synthetic oracle family")
    cx_p.add_argument("--tabular", default=None, help="path to a delimited feature/response file")
    cx_p.add_argument("--features", default=None, help="comma-separated feature column names")
    cx_p.add_argument("--response", default=None, help="response column name")
    cx_p.add_argument("--pool-size", type=int, default=None)
    cx_p.add_argument("--seeds", nargs="+", default=["0"], help="dataset seeds, one row each")
    cx_p.add_argument("--tau", default="q0.1")
    cx_p.add_argument("--noise-std", type=float, default=0.0,
                      help="score noisy observations instead of noiseless truth")
    cx_p.add_argument("--k", type=int, default=5, help="neighbors for local smoothness")
    cx_p.add_argument("--eps", type=float, default=None, help="DBSCAN radius (default 0.1*sqrt(d))")
    cx_p.add_argument("--min-pts", type=int, default=3)
    cx_p.add_argument("--pairs", type=int, default=10_000, help="distance-correlation pair subsample")
    cx_p.add_argument("--out", default=default_out)
    cx_p.set_defaults(func=_cmd_complexity)

    audit_p = sub.add_parser("audit", help="numerical audits of the theoretical bounds")
    audit_p.add_argument("--out", default=default_out)
    audit_p.add_argument("--seed", type=int, default=0)
    audit_p.add_argument("--trials", type=int, default=20)
    audit_p.add_argument("--delta", type=float, default=0.05)
    audit_p.add_argument("--epsilon", type=float, default=0.2)
    audit_p.add_argument("--pool-size", type=int, default=48)
    audit_p.add_argument("--sigma-pool-size", type=int, default=12)
    audit_p.add_argument("--sigma-cycles", type=int, default=3)
    audit_p.add_argument("--sigma-batch", type=int, default=2)
    audit_p.set_defaults(func=_cmd_audit)

    curves_p = sub.add_parser("curves", help="emit learning-curve data from a run manifest")
    curves_p.add_argument("manifest", help="manifest.json path or its directory")
    curves_p.add_argument("--out", default=None)
    curves_p.set_defaults(func=_cmd_curves)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failures
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
