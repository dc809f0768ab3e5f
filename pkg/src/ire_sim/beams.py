"""Gaussian beam geometry and the rotated-frame coordinate transform.

All beams are ideal TEM00 modes focused at the origin of their own frame,
characterized by a focal waist w0 (the 1/e^2 intensity radius) and a
wavenumber k. Two frames appear throughout the simulator: the lab frame,
whose z axis carries the collection (signal/idler) modes, and a frame
rotated by an angle theta about the x axis, whose z axis carries the
control (write/read) beams.

Everything in this module is pure and stateless; identical inputs give
bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Modes with k*w0 below this are rejected: every closed form used downstream
# is paraxial, and the error terms scale like (k*w0)^-2.
PARAXIAL_MIN_KW0 = 50.0

_DIRECTIONS = ("plus_z", "minus_z")
_FRAMES = ("lab", "skewed")


@dataclass(frozen=True)
class BeamMode:
    """One Gaussian beam or fiber mode.

    waist_w0        m, 1/e^2 intensity radius at focus
    wavenumber_k    rad/m
    direction       'plus_z' or 'minus_z' (propagation sense along the axis)
    frame           'lab' or 'skewed' (which frame owns the mode's z axis)
    peak_amplitude  dimensionless, arbitrary units (cancels in efficiency)
    """

    waist_w0: float
    wavenumber_k: float
    direction: str = "plus_z"
    frame: str = "lab"
    peak_amplitude: float = 1.0

    def __post_init__(self) -> None:
        if not (self.waist_w0 > 0.0):
            raise ValueError(f"waist_w0 must be positive, got {self.waist_w0}")
        if not (self.wavenumber_k > 0.0):
            raise ValueError(f"wavenumber_k must be positive, got {self.wavenumber_k}")
        if self.direction not in _DIRECTIONS:
            raise ValueError(f"direction must be one of {_DIRECTIONS}, got {self.direction!r}")
        if self.frame not in _FRAMES:
            raise ValueError(f"frame must be one of {_FRAMES}, got {self.frame!r}")
        kw0 = self.wavenumber_k * self.waist_w0
        if kw0 < PARAXIAL_MIN_KW0:
            raise ValueError(
                f"mode is not paraxial: k*w0 = {kw0:.3g} < {PARAXIAL_MIN_KW0}; "
                "increase the waist or the wavenumber"
            )

    @property
    def rayleigh_z(self) -> float:
        """Rayleigh range k*w0^2/2 in meters."""
        return 0.5 * self.wavenumber_k * self.waist_w0**2


@dataclass(frozen=True)
class BeamGeometry:
    """Geometry of a Gaussian beam at one axial position.

    rayleigh_z          m
    curvature_radius_r  m, signed; +inf sentinel at the focal plane (flat front)
    gouy_psi            rad, in (-pi/2, pi/2)
    spot_w              m, 1/e^2 radius at z
    """

    rayleigh_z: float
    curvature_radius_r: float
    gouy_psi: float
    spot_w: float


def beam_geometry(mode: BeamMode, z: float) -> BeamGeometry:
    """Evaluate Rayleigh range, wavefront curvature, Gouy phase and spot size at z.

    The focal plane has a flat wavefront; its curvature radius is reported as
    the +inf sentinel rather than raising, so callers can stay branch-free.
    """
    zr = mode.rayleigh_z
    if z == 0.0:
        curvature = math.inf
    else:
        curvature = z * (1.0 + (zr / z) ** 2)
    psi = math.atan(z / zr)
    spot = mode.waist_w0 * math.sqrt(1.0 + (z / zr) ** 2)
    return BeamGeometry(rayleigh_z=zr, curvature_radius_r=curvature, gouy_psi=psi, spot_w=spot)


def transverse_amplitude(mode: BeamMode, x, y, z):
    """Complex transverse mode profile at (x, y, z) in the mode's own frame.

    Returns

        E0 / sqrt(1+z^2/zr^2) * exp(-rho^2 / (w0^2 (1+z^2/zr^2)))
           * exp(+-i [k rho^2/(2 R(z)) - psi(z)])

    with rho^2 = x^2 + y^2. The phase sign follows the propagation sense:
    'minus_z' carries the conjugate phase of 'plus_z'. The longitudinal
    plane-wave factor e^{ikz} is deliberately not included here; the
    retrieval formulas attach their own longitudinal phases.

    The curvature term is evaluated in the singularity-free form
    k rho^2 z / (2 (z^2 + zr^2)), which equals k rho^2/(2R) for z != 0 and
    vanishes smoothly at the focal plane.

    Accepts scalars or numpy arrays (broadcast together).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    zr = mode.rayleigh_z
    k = mode.wavenumber_k
    u = 1.0 + (z / zr) ** 2
    rho2 = x * x + y * y
    envelope = mode.peak_amplitude * np.exp(-rho2 / (mode.waist_w0**2 * u)) / np.sqrt(u)
    phase = k * rho2 * z / (2.0 * (z * z + zr * zr)) - np.arctan(z / zr)
    if mode.direction == "minus_z":
        phase = -phase
    out = envelope * np.exp(1j * phase)
    if out.ndim == 0:
        return complex(out)
    return out


def skew_transform(r, theta: float):
    """Rotate lab-frame positions into the frame tilted by theta about x.

        x~ = x
        y~ = y cos(theta) - z sin(theta)
        z~ = y sin(theta) + z cos(theta)

    Norm-preserving. `r` is array-like with the last axis of length 3
    (a single (3,) vector or a stack (..., 3)); the result has the same shape.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape[-1] != 3:
        raise ValueError(f"positions must have a trailing axis of length 3, got shape {r.shape}")
    ct = math.cos(theta)
    st = math.sin(theta)
    out = np.empty_like(r)
    out[..., 0] = r[..., 0]
    out[..., 1] = r[..., 1] * ct - r[..., 2] * st
    out[..., 2] = r[..., 1] * st + r[..., 2] * ct
    return out
