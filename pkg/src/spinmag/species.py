"""Alkali species data for Faraday-rotation magnetometry.

Optical resonance frequencies are stored as offsets (Hz) from a per-species
reference line rather than as absolute ~3.8e14 Hz values, so that GHz-scale
detunings survive double precision without catastrophic cancellation. The
reference is the F = I + 1/2 ("a") ground-manifold D1 resonance, hence
``nu_a_offset_hz = 0`` for the built-in entries and ``nu_b_offset_hz`` equals
the ground-state hyperfine splitting.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParameterError


def _is_half_integer(x: float) -> bool:
    return abs(2 * x - round(2 * x)) < 1e-12 and x > 0


@dataclass(frozen=True)
class AtomSpecies:
    """Isotope constants for one alkali species.

    Attributes
    ----------
    name : str
        Label, e.g. ``"rb87"``.
    nuclear_spin : float
        Nuclear spin I (half-integer).
    f_osc : float
        Oscillator strength of the probed optical transition.
    nu_a_offset_hz, nu_b_offset_hz : float
        Optical resonance frequencies of the F = I+1/2 and F = I-1/2
        ground manifolds, as offsets from the species reference line.
    gyromagnetic_hz_per_t : float
        Larmor frequency per unit field, Hz/T.
    """

    name: str
    nuclear_spin: float
    f_osc: float
    nu_a_offset_hz: float
    nu_b_offset_hz: float
    gyromagnetic_hz_per_t: float

    def __post_init__(self):
        if not _is_half_integer(self.nuclear_spin):
            raise ParameterError(f"nuclear spin must be a positive half-integer, got {self.nuclear_spin}")
        if self.f_osc <= 0:
            raise ParameterError("oscillator strength must be positive")
        if self.nu_a_offset_hz == self.nu_b_offset_hz:
            raise ParameterError("hyperfine resonances nu_a and nu_b must differ")
        if self.gyromagnetic_hz_per_t < 0:
            raise ParameterError("gyromagnetic ratio must be non-negative")

    @property
    def f_a(self) -> float:
        """Total spin of the upper ground manifold, F = I + 1/2."""
        return self.nuclear_spin + 0.5

    @property
    def f_b(self) -> float:
        """Total spin of the lower ground manifold, F = I - 1/2."""
        return self.nuclear_spin - 0.5


# D1-line parameters. Hyperfine splittings are the ground-state values; the
# F = I - 1/2 manifold lies lower in energy, so its optical resonance sits
# *above* the reference line.
RB87 = AtomSpecies(
    name="rb87",
    nuclear_spin=1.5,
    f_osc=0.34,
    nu_a_offset_hz=0.0,
    nu_b_offset_hz=6.834682e9,
    gyromagnetic_hz_per_t=6.9958e9,
)

RB85 = AtomSpecies(
    name="rb85",
    nuclear_spin=2.5,
    f_osc=0.34,
    nu_a_offset_hz=0.0,
    nu_b_offset_hz=3.035732e9,
    gyromagnetic_hz_per_t=4.6674e9,
)

_REGISTRY = {s.name: s for s in (RB87, RB85)}


def get_species(name: str) -> AtomSpecies:
    """Look up a built-in species by name (case-insensitive)."""
    try:
        return _REGISTRY[name.lower()]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise ParameterError(f"unknown species {name!r} (built-in: {known})") from None
