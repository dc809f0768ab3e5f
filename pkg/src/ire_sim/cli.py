"""Command-line front end.

Four subcommands, all driven by an INI configuration file:

    eta       one efficiency estimate; prints the resolution report and the
              estimate, writes eta.csv plus a timestamped eta_meta.txt
    sweep     one-axis parameter sweep with replicated seeds; writes
              sweep.csv plus a timestamped sweep_meta.txt
    angular   emitted-field heatmap rasters over the sphere (and the
              backward cap), written through the angular reference path
    od        print the resolved cloud/beam report (no files)

Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error.
The result CSVs and rasters are deterministic in (config, seed, flags); the
*_meta.txt companions carry the timestamp so reruns stay byte-comparable.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import math
import os
import sys
from dataclasses import replace

from ._version import __version__
from .angular import (
    angular_field,
    build_grid,
    eta_angular,
    eta_reference,
    export_heatmap,
    normalize_field,
)
from .config import ConfigError, build_scenario, read_config, resolution_report
from .experiments import SWEEP_AXES, SweepSpec, run_sweep, write_sweep_csv
from .retrieval import Scenario, eta_paraxial, wavenumbers

ETA_CSV_COLUMNS = (
    "od",
    "wr",
    "theta_deg",
    "tm_us",
    "n_atoms",
    "method",
    "seed",
    "eta",
    "numerator",
    "denominator",
)

# The angular path touches every grid node for every atom; beyond a couple
# of million atoms that is no longer a cross-check but a mistake.
ANGULAR_MAX_ATOMS = 2_000_000

_EPILOG = """\
examples:
  ire-sim eta --config run.ini --out results
  ire-sim eta --config run.ini --method angular --out results
  ire-sim eta --config run.ini --mc-atoms 4000000 --threads 4 --out results
  ire-sim sweep --config run.ini --sweep width_ratio \\
      --values 0.3,0.58,1.0,1.3 --replicates 5 --out results
  ire-sim angular --config small.ini --out results
  ire-sim od --config run.ini

configuration:
  INI blocks [species], [cloud], [beams], [run]; grammar documented in
  README.md and in ire_sim.config. Interface units are degrees and
  microseconds. --seed, --method, and --mc-atoms override the [run] block.

threads:
  --threads N, else the IRE_SIM_THREADS environment variable, else 1.
  Results are bit-identical for every thread count.
"""


def _add_common(sub: argparse.ArgumentParser, out_dir: bool = True) -> None:
    sub.add_argument("--config", required=True, metavar="PATH",
                     help="INI configuration file")
    sub.add_argument("--seed", type=int, default=None, metavar="U64",
                     help="override [run] seed")
    sub.add_argument("--threads", type=int, default=None, metavar="N",
                     help="worker processes (default: IRE_SIM_THREADS or 1)")
    if out_dir:
        sub.add_argument("--out", default="ire_sim_out", metavar="DIR",
                         help="output directory (default: ire_sim_out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ire-sim",
        description="Intrinsic retrieval efficiency of a Gaussian-beam atomic-ensemble memory.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p_eta = subs.add_parser("eta", help="single efficiency estimate")
    _add_common(p_eta)
    p_eta.add_argument("--method", choices=("paraxial", "angular"), default=None,
                       help="override [run] method")
    p_eta.add_argument("--mc-atoms", type=int, default=None, metavar="N",
                       help="override [run] mc_atoms (paraxial subsample size)")
    p_eta.set_defaults(func=_cmd_eta)

    p_sweep = subs.add_parser("sweep", help="one-axis sweep with replicates")
    _add_common(p_sweep)
    p_sweep.add_argument("--sweep", required=True, choices=SWEEP_AXES, metavar="AXIS",
                         help=f"sweep axis: one of {', '.join(SWEEP_AXES)}")
    p_sweep.add_argument("--values", required=True, metavar="CSVLIST",
                         help="comma-separated, strictly increasing values")
    p_sweep.add_argument("--replicates", type=int, default=5, metavar="N",
                         help="seeds per value (default 5)")
    p_sweep.add_argument("--method", choices=("paraxial", "angular"), default=None,
                         help="override [run] method")
    p_sweep.add_argument("--mc-atoms", type=int, default=None, metavar="N",
                         help="override [run] mc_atoms (paraxial subsample size)")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_ang = subs.add_parser("angular", help="emitted-field heatmap rasters")
    _add_common(p_ang)
    p_ang.set_defaults(func=_cmd_angular)

    p_od = subs.add_parser("od", help="print the resolved cloud/beam report")
    _add_common(p_od, out_dir=False)
    p_od.set_defaults(func=_cmd_od)
    return parser


def _load(args, method_override: bool = False, mc_override: bool = False):
    doc = read_config(args.config)
    updates = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must fit in an unsigned 64-bit integer")
        updates["seed"] = args.seed
    if method_override and args.method is not None:
        updates["method"] = args.method
    if mc_override and args.mc_atoms is not None:
        if args.mc_atoms < 2:
            raise ConfigError("--mc-atoms must be >= 2")
        updates["mc_atoms"] = args.mc_atoms
    if updates:
        doc = replace(doc, **updates)
    scenario = build_scenario(doc)
    return doc, scenario


def _print_report(report: dict) -> None:
    for key, value in report.items():
        print(f"{key} = {value}")


def _write_meta(path: str, mapping: dict) -> None:
    with open(path, "w") as fh:
        for key, value in mapping.items():
            fh.write(f"{key}={value}\n")


def _g9(x: float) -> str:
    return f"{x:.9g}"


def _grid_from_doc(doc, scenario: Scenario):
    kn = wavenumbers(scenario.species)
    return build_grid(
        kn.k_i,
        scenario.idler_mode.waist_w0,
        n_cap=doc.grid_n_cap,
        n_base=doc.grid_n_base,
        n_phi=doc.grid_n_phi,
        cap_mult=doc.grid_cap_mult,
    )


def _guard_angular_size(scenario: Scenario) -> None:
    if scenario.n_atoms > ANGULAR_MAX_ATOMS:
        raise ConfigError(
            f"angular path over {scenario.n_atoms} atoms would evaluate "
            f"atoms x nodes plane waves; keep n_atoms <= {ANGULAR_MAX_ATOMS} "
            "(set [cloud] n_atoms_override for a reduced instance, or use "
            "method = paraxial)"
        )


def _cmd_eta(args) -> int:
    doc, scenario = _load(args, method_override=True, mc_override=True)
    report = resolution_report(scenario)
    _print_report(report)
    if doc.method == "angular":
        if scenario.mc_atoms is not None:
            raise ConfigError(
                "mc_atoms applies to the paraxial estimator only; "
                "drop it or use method = paraxial"
            )
        _guard_angular_size(scenario)
        est = eta_angular(scenario, grid=_grid_from_doc(doc, scenario), threads=args.threads)
    else:
        est = eta_paraxial(scenario, threads=args.threads)
    print(f"eta = {est.eta:.9g}")
    print(f"numerator = {est.numerator:.9g}")
    print(f"denominator = {est.denominator:.9g}")

    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "eta.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ETA_CSV_COLUMNS)
        writer.writerow(
            [
                _g9(report["optical_depth"]),
                _g9(report["width_ratio"]),
                _g9(report["skew_theta_deg"]),
                _g9(report["storage_tm_us"]),
                str(est.n_atoms),
                est.method,
                str(est.seed),
                _g9(est.eta),
                _g9(est.numerator),
                _g9(est.denominator),
            ]
        )
    meta = {"package_version": __version__, "config_path": os.path.abspath(args.config)}
    meta.update(report)
    meta["timestamp_utc"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    _write_meta(os.path.join(args.out, "eta_meta.txt"), meta)
    print(f"wrote {csv_path}")
    return 0


def _parse_values(raw: str) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in raw.split(",") if tok.strip() != "")
    except ValueError:
        raise ConfigError(f"--values: {raw!r} is not a comma-separated number list") from None
    if not values:
        raise ConfigError("--values: empty list")
    return values


def _cmd_sweep(args) -> int:
    doc, scenario = _load(args, method_override=True, mc_override=True)
    values = _parse_values(args.values)
    spec = SweepSpec(
        base=scenario,
        axis=args.sweep,
        values=values,
        replicates=args.replicates,
        method=doc.method,
    )
    if spec.method == "angular":
        _guard_angular_size(scenario)
    rows = run_sweep(spec, threads=args.threads)
    for row in rows:
        if row.error is not None:
            print(f"{args.sweep} row failed: {row.error}")
        else:
            print(
                f"od={row.od:.6g} wr={row.wr:.6g} theta_deg={row.theta_deg:.6g} "
                f"tm_us={row.tm_us:.6g} eta={row.eta_mean:.6g} +- {row.eta_stderr:.2g}"
            )
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "sweep.csv")
    write_sweep_csv(rows, csv_path)
    meta = {
        "package_version": __version__,
        "config_path": os.path.abspath(args.config),
        "axis": args.sweep,
        "values": ",".join(_g9(v) for v in values),
        "replicates": args.replicates,
        "method": spec.method,
    }
    meta.update(resolution_report(scenario))
    meta["timestamp_utc"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    _write_meta(os.path.join(args.out, "sweep_meta.txt"), meta)
    print(f"wrote {csv_path}")
    if all(row.error is not None for row in rows):
        return 1
    return 0


def _cmd_angular(args) -> int:
    doc, scenario = _load(args)
    _guard_angular_size(scenario)
    if scenario.mc_atoms is not None:
        raise ConfigError(
            "mc_atoms applies to the paraxial estimator only; drop it from [run] "
            "for heatmap export"
        )
    grid = _grid_from_doc(doc, scenario)
    field = angular_field(scenario, grid, threads=args.threads)
    eta_ref = eta_reference(field, grid)
    print(f"eta_reference = {eta_ref:.9g}")
    paths = export_heatmap(
        normalize_field(field, grid),
        grid,
        scenario,
        args.out,
        raster_n=doc.raster_n,
        extra={"config_path": os.path.abspath(args.config)},
    )
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_od(args) -> int:
    _, scenario = _load(args)
    _print_report(resolution_report(scenario))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
