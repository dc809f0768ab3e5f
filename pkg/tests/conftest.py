import math

import pytest

from ire_sim import SpeciesConstants, make_scenario

# Rubidium-like D1 memory: 795 nm transition, write detuned by 2pi x 10 MHz,
# 6.8 GHz ground splitting (signal red of the write, so omega_sg is signed
# negative here), sigma0 for the closed transition.
SPECIES = SpeciesConstants(
    transition_wavelength=795e-9,
    detuning_delta=2.0 * math.pi * 1.0e7,
    hyperfine_omega_sg=-2.0 * math.pi * 6.8e9,
    cross_section_sigma0=1.082e-13,
)

R0 = 7.5e-4
TEMP = 30e-6
W_WRITE = 60e-6
W_COLLECT = 35e-6


def canonical_scenario(**kwargs):
    """OD-24.7 cloud, 60/35 um beams; density knob overridable per test."""
    base = dict(
        skew_theta=0.0,
        storage_tm=0.0,
        seed=1,
        target_od=24.7,
    )
    if "n_atoms_override" in kwargs or "peak_density_n0" in kwargs:
        base.pop("target_od")
    base.update(kwargs)
    return make_scenario(SPECIES, R0, TEMP, W_WRITE, W_COLLECT, W_COLLECT, **base)


CANONICAL_INI = """\
[species]
wavelength_nm        = 795.0
delta_over_2pi_hz    = 1.0e7
omega_sg_over_2pi_hz = -6.8e9
sigma0_m2            = 1.082e-13
cg_sq                = 1.0
mass_amu             = 87.0

[cloud]
r0_m          = 7.5e-4
temperature_k = 30e-6
target_od     = 24.7

[beams]
w_write_m  = 60e-6
w_signal_m = 35e-6
w_idler_m  = 35e-6

[run]
theta_deg = 0.0
tm_us     = 0.0
seed      = 1
method    = paraxial
"""


@pytest.fixture(scope="session")
def species():
    return SPECIES


@pytest.fixture(scope="session")
def canonical_ini_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("config") / "canonical.ini"
    path.write_text(CANONICAL_INI)
    return str(path)
