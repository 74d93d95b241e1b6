"""Command-line front end: validate configs, run single cells, run sweeps.

Exit codes: 0 success, 2 validation error, 3 a run_until=converged run did
not converge, 4 a device wore out mid-run. Diagnostics go to stderr; the
PSWL_LOG environment variable (error|warn|info|debug) sets the verbosity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ExperimentConfig, config_from_dict, load_config
from .errors import ConfigError, SimError
from .simkernel import run_experiment

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("pswlsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_WORN_OUT = 4

SUMMARY_COLUMNS = (
    "cell", "policy", "scheme", "raid_level", "k_o", "k_s", "seed", "status",
    "converged", "convergence_event", "convergence_total_io", "convergence_afp",
    "lifetime_stddev", "avg_response_time_us", "wl_trigger_count", "total_io",
    "array_failure_prob",
)


def _setup_logging():
    level = os.environ.get("PSWL_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(stream=sys.stderr, level=levels.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _write_outputs(report, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json() + "\n")
    report.write_series_csv(str(out_dir / "series.csv"))


def _run_status(report) -> int:
    if report.failed:
        return EXIT_WORN_OUT
    if report.config["run"]["until"] == "converged" and not report.converged:
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_run(config_path: str, out_dir: str, seed: int | None = None) -> int:
    try:
        cfg = load_config(config_path)
        if seed is not None:
            cfg.run.seed = seed
        cfg.validate()
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_experiment(cfg)
    _write_outputs(report, Path(out_dir))
    status = _run_status(report)
    if status:
        print(f"run finished with status {status}: "
              f"{report.failure_reason or 'not converged'}", file=sys.stderr)
    return status


def cmd_validate(config_path: str) -> int:
    try:
        load_config(config_path)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


def _cell_name(policy: str, scheme: str, raid: str, k_o: int, k_s: int) -> str:
    return f"{policy}__{scheme}-{raid}__ko{k_o}ks{k_s}"


def expand_matrix(matrix_data: dict) -> list[tuple[str, dict]]:
    """Cartesian product of the matrix axes over the base config."""
    if "base" not in matrix_data or "matrix" not in matrix_data:
        raise ConfigError("sweep file needs [base] and [matrix] tables")
    base = matrix_data["base"]
    axes = matrix_data["matrix"]
    unknown = set(axes) - {"policy", "scheme", "pairs"}
    if unknown:
        raise ConfigError(f"unknown matrix axes: {sorted(unknown)}")
    policies = axes.get("policy", [base.get("policy", {}).get("kind", "pswl")])
    schemes = axes.get("scheme", ["rr:raid5"])
    pairs = axes.get("pairs", [[3, 1]])
    cells = []
    for policy in policies:
        for scheme_spec in schemes:
            try:
                scheme, raid = scheme_spec.split(":")
            except ValueError:
                raise ConfigError(
                    f"scheme axis entries look like 'rr:raid5', got {scheme_spec!r}"
                ) from None
            for k_o, k_s in pairs:
                data = _deep_merge(base, {
                    "policy": {"kind": policy},
                    "array": {"scaling_scheme": scheme, "raid_level": raid,
                              "original_disks": int(k_o), "scaling_disks": int(k_s)},
                })
                name = _cell_name(policy, scheme, raid, int(k_o), int(k_s))
                cells.append((name, data))
    return cells


def _deep_merge(base: dict, override: dict) -> dict:
    out = {k: (_deep_merge(v, override.get(k, {})) if isinstance(v, dict)
               else override.get(k, v))
           for k, v in base.items()}
    for k, v in override.items():
        if k not in out:
            out[k] = v
        elif isinstance(v, dict) and not isinstance(base.get(k), dict):
            out[k] = v
    return out


def run_cell(args: tuple[str, dict, str]) -> dict:
    """One sweep cell; safe to execute in a worker process."""
    name, data, out_root = args
    row = {c: "" for c in SUMMARY_COLUMNS}
    row["cell"] = name
    try:
        cfg = config_from_dict(data)
        report = run_experiment(cfg)
        _write_outputs(report, Path(out_root) / name)
        row.update({
            "policy": cfg.policy.kind,
            "scheme": cfg.array.scaling_scheme,
            "raid_level": cfg.array.raid_level,
            "k_o": cfg.array.original_disks,
            "k_s": cfg.array.scaling_disks,
            "seed": cfg.run.seed,
            "status": "failed" if report.failed else "ok",
            "converged": report.converged,
            "convergence_event": report.convergence_event,
            "convergence_total_io": report.convergence_total_io,
            "convergence_afp": report.convergence_afp,
            **report.final,
        })
    except SimError as exc:
        row["status"] = f"error: {exc}"
    return row


def cmd_sweep(matrix_path: str, out_dir: str, jobs: int = 1) -> int:
    try:
        with open(matrix_path, "rb") as fh:
            matrix_data = tomllib.load(fh)
        cells = expand_matrix(matrix_data)
    except (ConfigError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"sweep error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    work = [(name, data, str(out_root)) for name, data in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_cell, work))
    else:
        rows = [run_cell(item) for item in work]
    rows.sort(key=lambda r: r["cell"])
    with open(out_root / "summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    bad = [r["cell"] for r in rows if r["status"] != "ok"]
    if bad:
        log.warning("%d of %d cells did not finish cleanly: %s",
                    len(bad), len(rows), ", ".join(bad))
    print(f"{len(rows)} cells -> {out_root / 'summary.csv'}")
    return EXIT_OK


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(
        prog="pswlsim",
        description="SSD-array wear-leveling simulator under RAID scaling")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None)

    p_sweep = sub.add_parser("sweep", help="run a matrix of experiments")
    p_sweep.add_argument("--matrix", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--jobs", type=int, default=1)

    p_val = sub.add_parser("validate", help="check a config file")
    p_val.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.seed)
    if args.command == "sweep":
        return cmd_sweep(args.matrix, args.out, args.jobs)
    return cmd_validate(args.config)


if __name__ == "__main__":
    sys.exit(main())
