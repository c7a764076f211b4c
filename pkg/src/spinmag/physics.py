"""Closed-form atomic and optical relations used by the simulator.

Everything here is pure arithmetic on SI quantities: no RNG, no time series.
Detunings follow the offset convention of :class:`~spinmag.species.AtomSpecies`:
frequencies are measured relative to the species' reference resonance line, so
the probe detuning is ``nu_probe - nu_a`` and the second hyperfine line sits at
``nu_b_offset_hz - nu_a_offset_hz`` above the first.
"""

from __future__ import annotations

import math

import numpy as np

from .config import BeamProfile, CellConfig, ProbeConfig
from .constants import C_LIGHT, R_ELECTRON
from .errors import ParameterError
from .species import AtomSpecies

__all__ = [
    "dispersion_profile",
    "larmor_frequency",
    "rms_spin_fluctuation",
    "effective_atom_number",
    "rotation_coefficients",
    "rms_rotation_noise",
    "optical_density_on_resonance",
]


def dispersion_profile(nu_hz, nu0_hz: float, fwhm_hz: float):
    """Dispersive line shape D(nu) = (nu - nu0) / [(nu - nu0)^2 + (fwhm/2)^2].

    Units 1/Hz.  Antisymmetric about the line center, peaks at
    nu - nu0 = +-fwhm/2 with value +-1/fwhm, falls off as 1/(nu - nu0)
    far from resonance.  Accepts scalars or arrays for ``nu_hz``.
    """
    if fwhm_hz <= 0:
        raise ParameterError("line FWHM must be positive")
    delta = np.asarray(nu_hz, dtype=float) - nu0_hz
    out = delta / (delta**2 + (fwhm_hz / 2.0) ** 2)
    return float(out) if out.ndim == 0 else out


def larmor_frequency(species: AtomSpecies, b_z_t: float) -> float:
    """Spin precession frequency gamma * B_z in Hz for a static field in T."""
    if b_z_t <= 0:
        raise ParameterError("B_z must be positive")
    return species.gyromagnetic_hz_per_t * b_z_t


def rms_spin_fluctuation(f_quantum: float, nuclear_spin: float, n_atoms: float) -> float:
    """Thermal rms of the collective spin projection <F_x> per atom.

    For N unpolarized atoms distributed over the 2(2I+1) ground states, the
    manifold with total spin F contributes
    sqrt(F(F+1)(2F+1) / (6 (2I+1) N)) to the per-atom average projection.
    """
    if n_atoms <= 0:
        raise ParameterError("atom number must be positive")
    if f_quantum <= 0:
        raise ParameterError("total spin F must be positive")
    f = f_quantum
    return math.sqrt(f * (f + 1.0) * (2.0 * f + 1.0) / (6.0 * (2.0 * nuclear_spin + 1.0) * n_atoms))


def effective_atom_number(cell: CellConfig, beam: BeamProfile) -> float:
    """Number of atoms effectively probed by the beam.

    n * l * A_eff with A_eff = [integral I dA]^2 / integral I^2 dA: the beam
    area for a top-hat profile, 4 pi sigma_y sigma_z for a Gaussian.
    """
    return cell.density_per_m3 * cell.length_m * beam.effective_area_m2()


def rotation_coefficients(species: AtomSpecies, cell: CellConfig, probe: ProbeConfig):
    """Paramagnetic rotation per unit per-atom spin projection, (c_a, c_b).

    The polarimeter angle is phi = c_a <F_x^a> + c_b <F_x^b> (rad), where the
    two coefficients carry the dispersive line shapes of the two hyperfine
    ground states with opposite sign:

        c_a = +K D(nu - nu_a),   c_b = -K D(nu - nu_b),
        K = c r_e f_osc n l / (2I + 1).

    The sign flip reflects the opposite sense of rotation produced by the two
    manifolds; between the lines the contributions add, far outside they cancel
    to leading order.
    """
    prefactor = (
        C_LIGHT
        * R_ELECTRON
        * species.f_osc
        * cell.density_per_m3
        * cell.length_m
        / (2.0 * species.nuclear_spin + 1.0)
    )
    delta_a = probe.detuning_hz - species.nu_a_offset_hz
    delta_b = probe.detuning_hz - (species.nu_b_offset_hz - species.nu_a_offset_hz)
    c_a = prefactor * dispersion_profile(delta_a, 0.0, cell.fwhm_hz)
    c_b = -prefactor * dispersion_profile(delta_b, 0.0, cell.fwhm_hz)
    return c_a, c_b


def rms_rotation_noise(species: AtomSpecies, cell: CellConfig, probe: ProbeConfig) -> float:
    """rms polarimeter angle from thermal spin fluctuations, in rad.

    Quadrature sum of the two hyperfine manifolds' independent contributions,
    each weighted by its rotation coefficient.  Zero density returns zero
    (no atoms, no spin noise).
    """
    n_eff = effective_atom_number(cell, probe.beam)
    if n_eff == 0.0:
        return 0.0
    c_a, c_b = rotation_coefficients(species, cell, probe)
    sig_a = rms_spin_fluctuation(species.f_a, species.nuclear_spin, n_eff)
    sig_b = rms_spin_fluctuation(species.f_b, species.nuclear_spin, n_eff)
    return math.hypot(c_a * sig_a, c_b * sig_b)


def optical_density_on_resonance(species: AtomSpecies, cell: CellConfig) -> float:
    """Resonant optical density n * l * sigma_0 with sigma_0 = 2 c r_e f / fwhm.

    This is the number of absorption lengths the probe would see if tuned to
    line center; it sets the atom-light coupling strength in the
    quantum-noise-limited sensitivity model.
    """
    sigma0 = 2.0 * C_LIGHT * R_ELECTRON * species.f_osc / cell.fwhm_hz
    return cell.density_per_m3 * cell.length_m * sigma0
