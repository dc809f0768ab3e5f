"""Parameter sweeps with replicated seeds and a stable CSV record format.

A sweep takes a base scenario and varies exactly one axis:

    width_ratio    collection waists W_s = W_i = value * W_w
    optical_depth  cloud density re-resolved so the write-axis OD = value
    storage_time   storage before retrieval, value in microseconds
    skew_angle     write/read axis tilt, value in degrees

Each value runs `replicates` times with seeds base, base+1, ...; a row
reports the replicate mean and the standard error of that mean (sample
standard deviation over sqrt(replicates), zero for a single replicate). A
failing value produces an error row and the sweep continues. Numeric CSV
fields carry 9 significant digits; reruns of the same spec produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .angular import eta_angular
from .ensemble import density_for_od, optical_depth
from .retrieval import Scenario, eta_paraxial

SWEEP_AXES = ("width_ratio", "optical_depth", "storage_time", "skew_angle")
SWEEP_METHODS = ("paraxial", "angular")

SWEEP_CSV_COLUMNS = (
    "od",
    "wr",
    "theta_deg",
    "tm_us",
    "n_atoms",
    "method",
    "replicates",
    "eta_mean",
    "eta_stderr",
    "etas_json",
    "seed_base",
)


@dataclass(frozen=True)
class SweepSpec:
    """One-axis sweep description over a base scenario."""

    base: Scenario
    axis: str
    values: tuple[float, ...]
    replicates: int = 5
    method: str = "paraxial"

    def __post_init__(self) -> None:
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        if self.method not in SWEEP_METHODS:
            raise ValueError(f"method must be one of {SWEEP_METHODS}, got {self.method!r}")
        values = tuple(float(v) for v in self.values)
        if len(values) == 0:
            raise ValueError("values must be non-empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("values must be strictly increasing")
        object.__setattr__(self, "values", values)
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.method == "angular" and self.base.mc_atoms is not None:
            raise ValueError(
                "angular sweeps have no subsample estimator; clear mc_atoms on the base"
            )


@dataclass(frozen=True)
class SweepRow:
    """Aggregated result at one sweep value.

    Descriptor columns are the resolved per-row values (the write-axis OD is
    recomputed from the row's cloud, so an optical_depth sweep shows its
    round trip). On failure, error holds the message, etas is empty, and the
    aggregates are NaN.
    """

    od: float
    wr: float
    theta_deg: float
    tm_us: float
    n_atoms: int
    method: str
    replicates: int
    eta_mean: float
    eta_stderr: float
    etas: tuple[float, ...]
    seed_base: int
    error: str | None = None


def aggregate(etas) -> tuple[float, float]:
    """Replicate mean and standard error of the mean (0 for one replicate)."""
    arr = np.asarray(list(etas), dtype=float)
    if arr.size == 0:
        raise ValueError("no replicate values to aggregate")
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def scenario_for_value(base: Scenario, axis: str, value: float) -> Scenario:
    """Rebuild the base scenario with one axis moved to the given value."""
    value = float(value)
    if axis == "width_ratio":
        if value <= 0.0:
            raise ValueError("width_ratio must be > 0")
        w_new = value * base.write_mode.waist_w0
        return replace(
            base,
            signal_mode=replace(base.signal_mode, waist_w0=w_new),
            idler_mode=replace(base.idler_mode, waist_w0=w_new),
        )
    if axis == "optical_depth":
        if value <= 0.0:
            raise ValueError("optical_depth must be > 0")
        n0 = density_for_od(value, base.cloud, base.species, base.write_mode)
        cloud = replace(base.cloud, peak_density_n0=n0)
        return replace(base, cloud=cloud, n_atoms=cloud.atom_count)
    if axis == "storage_time":
        if value < 0.0:
            raise ValueError("storage_time must be >= 0 (microseconds)")
        return replace(base, storage_tm=value * 1e-6)
    if axis == "skew_angle":
        return replace(base, skew_theta=math.radians(value))
    raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")


def _descriptors(scenario: Scenario) -> tuple[float, float, float, float]:
    od = optical_depth(scenario.cloud, scenario.species, scenario.write_mode)
    return (
        od,
        scenario.width_ratio,
        math.degrees(scenario.skew_theta),
        scenario.storage_tm * 1e6,
    )


def run_sweep(spec: SweepSpec, threads: int | None = None) -> list[SweepRow]:
    """Run every sweep value; failed values become error rows, not aborts."""
    rows: list[SweepRow] = []
    for value in spec.values:
        seed_base = spec.base.seed
        try:
            scenario = scenario_for_value(spec.base, spec.axis, value)
            od, wr, theta_deg, tm_us = _descriptors(scenario)
            etas = []
            for r in range(spec.replicates):
                scn_r = replace(scenario, seed=seed_base + r)
                if spec.method == "paraxial":
                    est = eta_paraxial(scn_r, threads=threads)
                else:
                    est = eta_angular(scn_r, threads=threads)
                etas.append(est.eta)
            mean, stderr = aggregate(etas)
            rows.append(
                SweepRow(
                    od=od,
                    wr=wr,
                    theta_deg=theta_deg,
                    tm_us=tm_us,
                    n_atoms=scenario.n_atoms,
                    method=spec.method,
                    replicates=spec.replicates,
                    eta_mean=mean,
                    eta_stderr=stderr,
                    etas=tuple(etas),
                    seed_base=seed_base,
                )
            )
        except Exception as exc:
            od, wr, theta_deg, tm_us = _descriptors(spec.base)
            if spec.axis == "optical_depth":
                od = value
            elif spec.axis == "width_ratio":
                wr = value
            elif spec.axis == "skew_angle":
                theta_deg = value
            else:
                tm_us = value
            rows.append(
                SweepRow(
                    od=od,
                    wr=wr,
                    theta_deg=theta_deg,
                    tm_us=tm_us,
                    n_atoms=spec.base.n_atoms,
                    method=spec.method,
                    replicates=spec.replicates,
                    eta_mean=math.nan,
                    eta_stderr=math.nan,
                    etas=(),
                    seed_base=seed_base,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return rows


def _g9(x: float) -> str:
    return f"{x:.9g}"


def write_sweep_csv(rows, path: str) -> None:
    """Write sweep rows as CSV with the fixed column set.

    Column order is SWEEP_CSV_COLUMNS; numeric fields use 9 significant
    digits; etas_json is a JSON list of the per-replicate efficiencies, or a
    JSON object {"error": message} for a failed row. The writer emits
    unix newlines so reruns compare byte-for-byte.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_CSV_COLUMNS)
        for row in rows:
            if row.error is not None:
                etas_json = json.dumps({"error": row.error})
            else:
                etas_json = json.dumps([float(_g9(e)) for e in row.etas])
            writer.writerow(
                [
                    _g9(row.od),
                    _g9(row.wr),
                    _g9(row.theta_deg),
                    _g9(row.tm_us),
                    str(row.n_atoms),
                    row.method,
                    str(row.replicates),
                    _g9(row.eta_mean),
                    _g9(row.eta_stderr),
                    etas_json,
                    str(row.seed_base),
                ]
            )
