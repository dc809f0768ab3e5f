"""Far-field angular reference path: sphere grids, emitted field, heatmaps.

This module evaluates the emitted idler field on a quadrature grid over the
full unit sphere,

    F(khat) = (4 pi)^{-1/2} sum_j A_j e^{i k_r khat_read . r'_j}
                                   e^{-i k_i khat . r'_j},

with khat_read = -(0, sin theta, cos theta) the backward direction of the
tilted read axis, and recovers the retrieval efficiency as the squared
overlap with the collection mode,

    eta_ref = |sum_nodes w g F|^2 / sum_j |A_j|^2.

No paraxial step enters, so this path cross-checks the streaming estimator
wherever both are affordable. Cost scales as atoms x nodes; it is meant for
ensembles up to about a million atoms on the default grid.

The sphere grid concentrates polar nodes in a cap around the backward axis
(where the phase-matched lobe lives) using Gauss-Legendre nodes in theta,
covers the rest of the sphere with Gauss-Legendre nodes in cos theta, and
uses uniform midpoint nodes in azimuth. Total weight is 4 pi to quadrature
accuracy.
"""

from __future__ import annotations

import datetime
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._version import __version__
from .ensemble import _sample_range, drift
from .retrieval import (
    EtaEstimate,
    Scenario,
    resolve_threads,
    spinwave_amplitude,
    wavenumbers,
)

# Atoms per chunk on the angular path. Much smaller than the streaming
# estimator's chunk because each atom touches every grid node; fixed so the
# decomposition (and the accumulated bits) never depends on thread count.
ANGULAR_CHUNK_ATOMS = 1 << 14


@dataclass(frozen=True, eq=False)
class AngularGrid:
    """Quadrature grid over the unit sphere, polar-level by azimuth.

    Nodes are ordered level-major: node index = level * n_phi + phi_index,
    with polar levels ascending in theta and azimuth nodes at the uniform
    midpoints phi_j = 2 pi (j + 1/2) / n_phi. level_weight already carries
    the solid-angle jacobian, so the node weight is level_weight * 2pi/n_phi.
    """

    level_theta: np.ndarray
    level_weight: np.ndarray
    n_phi: int
    cap_theta_min: float
    k_times_w: float

    @property
    def n_levels(self) -> int:
        return self.level_theta.size

    @property
    def n_nodes(self) -> int:
        return self.level_theta.size * self.n_phi

    @property
    def phi(self) -> np.ndarray:
        return 2.0 * math.pi * (np.arange(self.n_phi) + 0.5) / self.n_phi

    @property
    def node_theta(self) -> np.ndarray:
        return np.repeat(self.level_theta, self.n_phi)

    @property
    def node_phi(self) -> np.ndarray:
        return np.tile(self.phi, self.n_levels)

    @property
    def node_weight(self) -> np.ndarray:
        return np.repeat(self.level_weight, self.n_phi) * (2.0 * math.pi / self.n_phi)

    def unit_vectors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        th = self.node_theta
        ph = self.node_phi
        sth = np.sin(th)
        return sth * np.cos(ph), sth * np.sin(ph), np.cos(th)


def build_grid(
    k_i: float,
    w_i: float,
    n_cap: int = 256,
    n_base: int = 256,
    n_phi: int = 256,
    cap_mult: float = 20.0,
) -> AngularGrid:
    """Build the sphere grid for an idler of wavenumber k_i and waist w_i.

    The cap spans theta in [pi - cap_mult/(k_i w_i), pi] with n_cap
    Gauss-Legendre nodes in theta; the remaining sphere gets n_base
    Gauss-Legendre nodes in cos theta; azimuth gets n_phi midpoints. The
    collection-mode intensity has angular half-width ~ 2/(k_i w_i); the
    build refuses a grid with fewer than 10 polar levels inside one
    half-width of the backward axis (the lobe would be undersampled).
    """
    kw = k_i * w_i
    if kw < 50.0:
        raise ValueError(f"k_i*w_i = {kw:.3g} < 50: collection mode is not paraxial")
    if min(n_cap, n_base) < 8 or n_phi < 8:
        raise ValueError("grid needs at least 8 nodes along each direction")
    cap_width = cap_mult / kw
    if not 0.0 < cap_width < 0.5 * math.pi:
        raise ValueError(f"cap width {cap_width:.3g} rad out of range (cap_mult {cap_mult})")

    theta_lo = math.pi - cap_width
    xg, wg = np.polynomial.legendre.leggauss(n_cap)
    th_cap = theta_lo + 0.5 * cap_width * (xg + 1.0)
    w_cap = 0.5 * cap_width * wg * np.sin(th_cap)

    mu_lo = math.cos(theta_lo)
    xg2, wg2 = np.polynomial.legendre.leggauss(n_base)
    mu = mu_lo + 0.5 * (1.0 - mu_lo) * (xg2 + 1.0)
    w_base = 0.5 * (1.0 - mu_lo) * wg2
    th_base = np.arccos(mu)
    order = np.argsort(th_base)

    level_theta = np.concatenate([th_base[order], th_cap])
    level_weight = np.concatenate([w_base[order], w_cap])

    in_half_width = level_theta >= math.pi - 2.0 / kw
    if int(in_half_width.sum()) < 10:
        raise ValueError(
            "fewer than 10 polar levels within 2/(k_i w_i) of the backward axis; "
            "raise n_cap or lower cap_mult"
        )
    return AngularGrid(
        level_theta=level_theta,
        level_weight=level_weight,
        n_phi=int(n_phi),
        cap_theta_min=theta_lo,
        k_times_w=kw,
    )


def fiber_mode(grid: AngularGrid, forward: bool = False) -> np.ndarray:
    """Far-field collection-mode amplitude g on the grid nodes.

    Gaussian profile exp(-(k w sin theta)^2 / 4) on the backward hemisphere
    (forward hemisphere when forward=True, for mis-pointing checks), zero on
    the other half, normalized so sum w |g|^2 = 1 on this grid.
    """
    th = grid.node_theta
    mask = (th < 0.5 * math.pi) if forward else (th > 0.5 * math.pi)
    prof = np.where(mask, np.exp(-((grid.k_times_w * np.sin(th)) ** 2) / 4.0), 0.0)
    norm = math.sqrt(float(np.sum(grid.node_weight * prof * prof)))
    if norm == 0.0:
        raise ArithmeticError("collection mode vanishes on this grid")
    return prof / norm


@dataclass(frozen=True, eq=False)
class AngularField:
    """Emitted field sampled on a grid's nodes, with the run that made it.

    values has one complex entry per node (level-major). source_s2 is
    sum_j |A_j|^2 over the atoms that generated the field; it is the
    denominator of the reference efficiency and survives normalization.
    """

    values: np.ndarray
    normalized: bool
    source_s2: float
    n_atoms: int
    seed: int


def field_from_atoms(
    amplitudes: np.ndarray,
    positions: np.ndarray,
    skew_theta: float,
    k_r: float,
    k_i: float,
    grid: AngularGrid,
    seed: int = 0,
) -> AngularField:
    """Emitted field of explicitly given stored amplitudes and positions.

    positions are the drifted (emission-time) coordinates, shape (n, 3).
    This is the single-chunk core of angular_field; it is exposed so small
    hand-built configurations (one atom, two atoms) can be checked against
    closed forms.
    """
    amplitudes = np.ascontiguousarray(amplitudes, dtype=np.complex128)
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 3:
        raise ValueError("positions must have shape (n, 3)")
    if amplitudes.shape != (positions.shape[0],):
        raise ValueError("amplitudes and positions disagree on atom count")
    nx, ny, nz = grid.unit_vectors()
    out_re = np.zeros(grid.n_nodes)
    out_im = np.zeros(grid.n_nodes)
    fn = _kernels.angular_chunk if _kernels.HAVE_NUMBA else _kernels.angular_chunk_np
    fn(
        np.ascontiguousarray(amplitudes.real),
        np.ascontiguousarray(amplitudes.imag),
        positions[:, 0].copy(),
        positions[:, 1].copy(),
        positions[:, 2].copy(),
        math.sin(skew_theta),
        math.cos(skew_theta),
        k_r,
        k_i,
        nx,
        ny,
        nz,
        out_re,
        out_im,
    )
    values = (out_re + 1j * out_im) / math.sqrt(4.0 * math.pi)
    s2 = float(np.sum(amplitudes.real**2 + amplitudes.imag**2))
    return AngularField(
        values=values,
        normalized=False,
        source_s2=s2,
        n_atoms=positions.shape[0],
        seed=seed,
    )


def _angular_worker(task):
    """Field partial sums for one atom chunk (top level for process pools)."""
    scenario, lo, hi, grid = task
    sample = _sample_range(scenario.cloud, scenario.seed, lo, hi)
    sample = drift(sample, scenario.storage_tm)
    amps = spinwave_amplitude(sample, scenario)
    kn = wavenumbers(scenario.species)
    nx, ny, nz = grid.unit_vectors()
    out_re = np.zeros(grid.n_nodes)
    out_im = np.zeros(grid.n_nodes)
    fn = _kernels.angular_chunk if _kernels.HAVE_NUMBA else _kernels.angular_chunk_np
    fn(
        np.ascontiguousarray(amps.real),
        np.ascontiguousarray(amps.imag),
        sample.r_drifted[:, 0].copy(),
        sample.r_drifted[:, 1].copy(),
        sample.r_drifted[:, 2].copy(),
        math.sin(scenario.skew_theta),
        math.cos(scenario.skew_theta),
        kn.k_r,
        kn.k_i,
        nx,
        ny,
        nz,
        out_re,
        out_im,
    )
    s2 = float(np.sum(amps.real**2 + amps.imag**2))
    return out_re, out_im, s2


def angular_field(
    scenario: Scenario, grid: AngularGrid, threads: int | None = None
) -> AngularField:
    """Emitted field of the scenario's full ensemble on the grid.

    Atoms stream in fixed chunks of ANGULAR_CHUNK_ATOMS; chunk partial
    fields are added in ascending chunk order, so the result is
    bit-identical for every thread count. Cost is atoms x nodes; see the
    module docstring for the intended size range.
    """
    if scenario.mc_atoms is not None:
        raise ValueError(
            "the angular path has no subsample estimator (mc_atoms is set); "
            "build the scenario with n_atoms_override instead"
        )
    n = scenario.n_atoms
    threads = resolve_threads(threads)
    n_chunks = (n + ANGULAR_CHUNK_ATOMS - 1) // ANGULAR_CHUNK_ATOMS
    tasks = [
        (scenario, ci * ANGULAR_CHUNK_ATOMS, min((ci + 1) * ANGULAR_CHUNK_ATOMS, n), grid)
        for ci in range(n_chunks)
    ]
    acc_re = np.zeros(grid.n_nodes)
    acc_im = np.zeros(grid.n_nodes)
    s2 = 0.0
    if threads == 1 or n_chunks == 1:
        parts = map(_angular_worker, tasks)
        for out_re, out_im, part_s2 in parts:
            acc_re += out_re
            acc_im += out_im
            s2 += part_s2
    else:
        with ProcessPoolExecutor(max_workers=min(threads, n_chunks)) as pool:
            for out_re, out_im, part_s2 in pool.map(_angular_worker, tasks, chunksize=1):
                acc_re += out_re
                acc_im += out_im
                s2 += part_s2
    values = (acc_re + 1j * acc_im) / math.sqrt(4.0 * math.pi)
    return AngularField(
        values=values, normalized=False, source_s2=s2, n_atoms=n, seed=scenario.seed
    )


def sphere_norm(field: AngularField, grid: AngularGrid) -> float:
    """Total emitted power sum_nodes w |F|^2 over the whole sphere."""
    v = field.values
    return float(np.sum(grid.node_weight * (v.real**2 + v.imag**2)))


def normalize_field(field: AngularField, grid: AngularGrid) -> AngularField:
    """Rescale so the sphere norm is exactly 1; rejects a vanishing field."""
    norm = sphere_norm(field, grid)
    if norm <= 0.0 or not math.isfinite(norm):
        raise ArithmeticError("cannot normalize a vanishing or non-finite field")
    return AngularField(
        values=field.values / math.sqrt(norm),
        normalized=True,
        source_s2=field.source_s2,
        n_atoms=field.n_atoms,
        seed=field.seed,
    )


def eta_reference(field: AngularField, grid: AngularGrid) -> float:
    """Reference efficiency: squared collection-mode overlap over source norm.

    Requires the raw (unnormalized) field: the overlap and sum|A|^2 must be
    taken in the same scale.
    """
    if field.normalized:
        raise ValueError("eta_reference needs the unnormalized field")
    if field.source_s2 <= 0.0:
        raise ArithmeticError("degenerate source: sum |A_j|^2 = 0")
    g = fiber_mode(grid)
    overlap = np.sum(grid.node_weight * g * field.values)
    return float(abs(overlap) ** 2 / field.source_s2)


def eta_angular(
    scenario: Scenario, grid: AngularGrid | None = None, threads: int | None = None
) -> EtaEstimate:
    """Retrieval efficiency through the angular reference path."""
    if grid is None:
        kn = wavenumbers(scenario.species)
        grid = build_grid(kn.k_i, scenario.idler_mode.waist_w0)
    field = angular_field(scenario, grid, threads=threads)
    g = fiber_mode(grid)
    overlap = np.sum(grid.node_weight * g * field.values)
    numerator = float(abs(overlap) ** 2)
    denominator = field.source_s2
    if denominator <= 0.0:
        raise ArithmeticError("degenerate source: sum |A_j|^2 = 0")
    return EtaEstimate(
        eta=numerator / denominator,
        numerator=numerator,
        denominator=denominator,
        n_atoms=field.n_atoms,
        method="angular",
        seed=scenario.seed,
    )


def _nearest_level(level_theta: np.ndarray, theta: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(level_theta, theta)
    idx = np.clip(idx, 1, level_theta.size - 1)
    left = level_theta[idx - 1]
    right = level_theta[idx]
    return np.where(theta - left <= right - theta, idx - 1, idx)


def _raster_rows(
    field: AngularField,
    grid: AngularGrid,
    theta_axis: np.ndarray,
    phi_axis: np.ndarray,
) -> np.ndarray:
    lvl = _nearest_level(grid.level_theta, theta_axis)
    dphi = 2.0 * math.pi / grid.n_phi
    pidx = np.mod(np.rint(phi_axis / dphi - 0.5).astype(np.int64), grid.n_phi)
    node = lvl[:, None] * grid.n_phi + pidx[None, :]
    v = field.values[node]
    out = np.empty((theta_axis.size * phi_axis.size, 4))
    tt = np.repeat(theta_axis, phi_axis.size)
    pp = np.tile(phi_axis, theta_axis.size)
    out[:, 0] = tt
    out[:, 1] = pp
    out[:, 2] = v.real.ravel()
    out[:, 3] = v.imag.ravel()
    return out


def export_heatmap(
    field: AngularField,
    grid: AngularGrid,
    scenario: Scenario,
    out_dir: str,
    raster_n: int = 512,
    extra: dict | None = None,
) -> list[str]:
    """Write the normalized field as regular (theta, phi) CSV rasters.

    Produces three files in out_dir and returns their paths:

      heatmap_sphere.csv  raster over the full sphere
      heatmap_cap.csv     raster zoomed to the backward cap
      heatmap_meta.txt    key=value run description (the only file with a
                          timestamp, so the rasters rerun byte-identical)

    Raster rows are `theta_rad,phi_rad,re,im`, row-major in theta then phi,
    on uniform midpoint axes, each cell resampled from the nearest grid
    node. The field must be normalized (sphere norm 1 within 1e-8).
    """
    norm = sphere_norm(field, grid)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(
            f"field sphere norm is {norm!r}, expected 1 within 1e-8; "
            "pass the field through normalize_field first"
        )
    if raster_n < 2:
        raise ValueError("raster_n must be >= 2")
    os.makedirs(out_dir, exist_ok=True)

    def axis(lo: float, hi: float, n: int) -> np.ndarray:
        return lo + (hi - lo) * (np.arange(n) + 0.5) / n

    header = "theta_rad,phi_rad,re,im"
    phi_axis = axis(0.0, 2.0 * math.pi, raster_n)
    paths = []
    for name, tlo, thi in (
        ("heatmap_sphere.csv", 0.0, math.pi),
        ("heatmap_cap.csv", grid.cap_theta_min, math.pi),
    ):
        rows = _raster_rows(field, grid, axis(tlo, thi, raster_n), phi_axis)
        path = os.path.join(out_dir, name)
        np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=header, comments="")
        paths.append(path)

    meta = {
        "format_version": "1",
        "package_version": __version__,
        "kind": "angular_heatmap",
        "transition_wavelength_m": scenario.species.transition_wavelength,
        "detuning_delta_rad_s": scenario.species.detuning_delta,
        "hyperfine_omega_sg_rad_s": scenario.species.hyperfine_omega_sg,
        "cross_section_sigma0_m2": scenario.species.cross_section_sigma0,
        "cg_coefficient_sq": scenario.species.cg_coefficient_sq,
        "atom_mass_kg": scenario.species.atom_mass,
        "peak_density_n0_m3": scenario.cloud.peak_density_n0,
        "sigma_r0_m": scenario.cloud.sigma_r0,
        "temperature_t_k": scenario.cloud.temperature_t,
        "w_write_m": scenario.write_mode.waist_w0,
        "w_signal_m": scenario.signal_mode.waist_w0,
        "w_idler_m": scenario.idler_mode.waist_w0,
        "write_amplitude": scenario.write_mode.peak_amplitude,
        "skew_theta_rad": scenario.skew_theta,
        "storage_tm_s": scenario.storage_tm,
        "seed": scenario.seed,
        "n_atoms": scenario.n_atoms,
        "mc_atoms": scenario.mc_atoms if scenario.mc_atoms is not None else "",
        "field_n_atoms": field.n_atoms,
        "field_seed": field.seed,
        "grid_n_levels": grid.n_levels,
        "grid_n_phi": grid.n_phi,
        "grid_cap_theta_min_rad": grid.cap_theta_min,
        "grid_k_times_w": grid.k_times_w,
        "raster_n": raster_n,
        "timestamp_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if extra:
        meta.update(extra)
    meta_path = os.path.join(out_dir, "heatmap_meta.txt")
    with open(meta_path, "w") as fh:
        for key, value in meta.items():
            fh.write(f"{key}={value}\n")
    paths.append(meta_path)
    return paths
