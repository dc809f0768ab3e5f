"""Atomic cloud generation, ballistic drift, and optical depth.

The cloud is an isotropic Gaussian with per-axis position standard
deviation r0 and Maxwell-Boltzmann velocities (per-axis standard deviation
sqrt(kB T / M)). Sampling is counter-based: atom i's position and velocity
are a pure function of (seed, i), so any chunking of the index range
regenerates identical samples and no storage of the full ensemble is ever
needed. Concretely, a Philox stream keyed by the seed assigns each atom
the 8 consecutive 64-bit words starting at word 8*i (counter blocks 2i and
2i+1); words 0..5 feed three fixed Box-Muller pairs (3 position + 3
velocity normals) and words 6..7 are reserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Philox
from scipy.integrate import quad

from . import _kernels
from .beams import BeamMode

C_LIGHT = 299792458.0  # m/s
K_BOLTZMANN = 1.380649e-23  # J/K
ATOMIC_MASS_UNIT = 1.66053906660e-27  # kg

# (2 pi)^(3/2), the Gaussian-cloud volume factor in N = n0 (2pi)^(3/2) r0^3
_GAUSS_VOLUME = (2.0 * math.pi) ** 1.5


@dataclass(frozen=True)
class SpeciesConstants:
    """Atomic species data for the write transition and level structure.

    transition_wavelength  m (control/write line)
    detuning_delta         rad/s, write detuning from the excited state
    hyperfine_omega_sg     rad/s, signed splitting of the two ground levels
    cross_section_sigma0   m^2, off-resonant scattering cross-section
    cg_coefficient_sq      dimensionless transition-strength factor in (0, 1]
    atom_mass              kg
    """

    transition_wavelength: float
    detuning_delta: float
    hyperfine_omega_sg: float
    cross_section_sigma0: float
    cg_coefficient_sq: float = 1.0
    atom_mass: float = 87.0 * ATOMIC_MASS_UNIT

    def __post_init__(self) -> None:
        if not (self.transition_wavelength > 0.0):
            raise ValueError("transition_wavelength must be positive")
        if not (self.cross_section_sigma0 > 0.0):
            raise ValueError("cross_section_sigma0 must be positive")
        if not (0.0 < self.cg_coefficient_sq <= 1.0):
            raise ValueError("cg_coefficient_sq must be in (0, 1]")
        if not (self.atom_mass > 0.0):
            raise ValueError("atom_mass must be positive")


@dataclass(frozen=True)
class CloudSpec:
    """Gaussian atomic cloud.

    peak_density_n0  atoms/m^3 at the cloud center
    sigma_r0         m, isotropic per-axis position standard deviation
    temperature_t    K
    atom_mass_m      kg
    """

    peak_density_n0: float
    sigma_r0: float
    temperature_t: float
    atom_mass_m: float

    def __post_init__(self) -> None:
        for name in ("peak_density_n0", "sigma_r0", "temperature_t", "atom_mass_m"):
            if not (getattr(self, name) > 0.0):
                raise ValueError(f"{name} must be positive")
        if self.atom_count < 1:
            raise ValueError(
                f"implied atom count {self.atom_count} < 1; "
                "increase peak_density_n0 or sigma_r0"
            )

    @property
    def atom_count(self) -> int:
        """Implied total atom number N = round(n0 (2 pi)^(3/2) r0^3)."""
        return int(round(self.peak_density_n0 * _GAUSS_VOLUME * self.sigma_r0**3))


@dataclass
class AtomSample:
    """A batch of atoms (structure-of-arrays).

    r_initial  (n, 3) m
    velocity   (n, 3) m/s
    r_drifted  (n, 3) m, or None before drift is applied
    """

    r_initial: np.ndarray
    velocity: np.ndarray
    r_drifted: np.ndarray | None = None

    def __len__(self) -> int:
        return self.r_initial.shape[0]


def thermal_velocity_sigma(cloud: CloudSpec) -> float:
    """Per-axis velocity standard deviation sqrt(kB T / M) in m/s."""
    return math.sqrt(K_BOLTZMANN * cloud.temperature_t / cloud.atom_mass_m)


def most_probable_speed(cloud: CloudSpec) -> float:
    """Maxwell-Boltzmann most probable speed sqrt(2 kB T / M) in m/s."""
    return math.sqrt(2.0 * K_BOLTZMANN * cloud.temperature_t / cloud.atom_mass_m)


def _raw_words(seed: int, index_lo: int, index_hi: int) -> np.ndarray:
    """Counter words for atoms [index_lo, index_hi): shape (n, 8) uint64."""
    n = index_hi - index_lo
    gen = Philox(key=np.uint64(seed), counter=2 * index_lo)
    raw = gen.random_raw(8 * n)
    return raw.reshape(n, 8)


def _sample_range(cloud: CloudSpec, seed: int, index_lo: int, index_hi: int) -> AtomSample:
    """Samples for the atom index range [index_lo, index_hi), no N cap."""
    raw = _raw_words(seed, index_lo, index_hi)
    if _kernels.HAVE_NUMBA:
        g = _kernels.normals_from_raw(raw)
    else:
        g = _kernels.normals_from_raw_np(raw)
    sig_v = thermal_velocity_sigma(cloud)
    r = np.ascontiguousarray(g[:, 0:3]) * cloud.sigma_r0
    v = np.ascontiguousarray(g[:, 3:6]) * sig_v
    return AtomSample(r_initial=r, velocity=v)


def sample_atoms(cloud: CloudSpec, seed: int, chunk_index: int, chunk_size: int) -> AtomSample:
    """Generate the atoms of one chunk: indices [chunk_index*chunk_size, ...).

    The range is clipped to the cloud's implied atom count; a chunk entirely
    beyond it yields an empty sample. Pure in (seed, atom index): any
    chunking concatenates to the identical full stream.
    """
    if chunk_index < 0 or chunk_size < 1:
        raise ValueError("chunk_index must be >= 0 and chunk_size >= 1")
    n_total = cloud.atom_count
    lo = chunk_index * chunk_size
    hi = min(lo + chunk_size, n_total)
    if lo >= n_total:
        empty = np.empty((0, 3), dtype=np.float64)
        return AtomSample(r_initial=empty, velocity=empty.copy())
    return _sample_range(cloud, seed, lo, hi)


def drift(sample: AtomSample, t_m: float) -> AtomSample:
    """Ballistic drift: r' = r + v t_m, exact (no integration error)."""
    if t_m < 0.0:
        raise ValueError("storage time t_m must be >= 0")
    return AtomSample(
        r_initial=sample.r_initial,
        velocity=sample.velocity,
        r_drifted=sample.r_initial + sample.velocity * t_m,
    )


def _od_integrand(z: float, cloud: CloudSpec, species: SpeciesConstants, probe: BeamMode) -> float:
    # Radial integral done in closed form for each z: the probe's Gaussian
    # intensity against the cloud's transverse Gaussian density.
    w0 = probe.waist_w0
    zr = probe.rayleigh_z
    u = 1.0 + (z / zr) ** 2
    r0 = cloud.sigma_r0
    sig = species.cg_coefficient_sq * species.cross_section_sigma0
    return (
        sig
        * cloud.peak_density_n0
        * math.exp(-(z * z) / (2.0 * r0 * r0))
        / (1.0 + w0 * w0 * u / (4.0 * r0 * r0))
    )


def optical_depth(cloud: CloudSpec, species: SpeciesConstants, probe: BeamMode) -> float:
    """Optical depth of the cloud for a focused Gaussian probe.

    Nested quadrature of the beam-averaged column density: the transverse
    integral has a closed form per z, the axial integral runs over
    |z| <= 8 r0 by adaptive quadrature at 1e-6 relative accuracy.
    """
    lim = 8.0 * cloud.sigma_r0
    val, err = quad(
        _od_integrand,
        -lim,
        lim,
        args=(cloud, species, probe),
        epsabs=0.0,
        epsrel=1e-9,
        limit=200,
    )
    if not math.isfinite(val) or (val > 0 and err / val > 1e-6):
        raise ArithmeticError(
            f"optical depth quadrature did not converge: value={val!r}, "
            f"error estimate={err!r}"
        )
    return val


def density_for_od(
    target_od: float, cloud_template: CloudSpec, species: SpeciesConstants, probe: BeamMode
) -> float:
    """Peak density whose optical depth equals target_od (exact by linearity)."""
    if not (target_od > 0.0):
        raise ValueError(f"target_od must be positive, got {target_od}")
    ref = optical_depth(cloud_template, species, probe)
    return target_od * cloud_template.peak_density_n0 / ref
