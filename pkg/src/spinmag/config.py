"""Experiment configuration: domain types, TOML ingestion, strict schema.

Internal units are SI (m, s, Hz, T, rad). Config files use explicitly
unit-bearing key names (``density_per_cm3``, ``cell length_cm``,
``detuning_from_a_ghz``, ...) and values are converted once, on ingestion.
Unknown keys are rejected so a typo cannot silently fall back to a default.

The resolved config-unit dictionary (defaults filled in) is kept on the
:class:`ExperimentConfig` as ``raw`` and is the canonical serialized form:
``config_from_dict(cfg.to_dict()) == cfg`` exactly.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import ConfigError, ParameterError
from .species import AtomSpecies, get_species

# ---------------------------------------------------------------------------
# Beam profiles


@dataclass(frozen=True)
class TopHatBeam:
    """Uniform beam of given cross-sectional area (m^2)."""

    area_m2: float

    def __post_init__(self):
        if self.area_m2 <= 0:
            raise ParameterError("top-hat beam area must be positive")

    def effective_area_m2(self) -> float:
        return self.area_m2


@dataclass(frozen=True)
class GaussianBeam:
    """Elliptical Gaussian intensity profile with std devs sigma_y, sigma_z (m)."""

    sigma_y_m: float
    sigma_z_m: float

    def __post_init__(self):
        if self.sigma_y_m <= 0 or self.sigma_z_m <= 0:
            raise ParameterError("Gaussian beam sigmas must be positive")

    def effective_area_m2(self) -> float:
        # [integral I]^2 / integral I^2 for a 2-D Gaussian.
        return 4.0 * math.pi * self.sigma_y_m * self.sigma_z_m


@dataclass(frozen=True)
class SampledBeam:
    """Intensity sampled on a uniform (y, z) grid with spacing dy, dz (m)."""

    intensity: np.ndarray
    dy_m: float
    dz_m: float

    def __post_init__(self):
        inten = np.asarray(self.intensity, dtype=float)
        object.__setattr__(self, "intensity", inten)
        if self.dy_m <= 0 or self.dz_m <= 0:
            raise ParameterError("grid spacing must be positive")
        if inten.ndim != 2:
            raise ParameterError("sampled beam intensity must be a 2-D grid")
        if np.any(inten < 0):
            raise ParameterError("sampled beam intensities must be non-negative")
        if not np.any(inten > 0):
            raise ParameterError("sampled beam profile is identically zero")

    def effective_area_m2(self) -> float:
        # Rectangle rule for both integrals; the grid area element cancels
        # once between numerator and denominator.
        total = float(self.intensity.sum())
        total_sq = float((self.intensity**2).sum())
        return total * total / total_sq * self.dy_m * self.dz_m

    def __eq__(self, other):
        if not isinstance(other, SampledBeam):
            return NotImplemented
        return (
            self.dy_m == other.dy_m
            and self.dz_m == other.dz_m
            and np.array_equal(self.intensity, other.intensity)
        )


BeamProfile = Union[TopHatBeam, GaussianBeam, SampledBeam]

# ---------------------------------------------------------------------------
# Component configs


@dataclass(frozen=True)
class CellConfig:
    """Vapor cell: density (m^-3), probe-direction length (m), optical FWHM (Hz).

    Zero density is allowed as a degenerate diagnostic mode (no atoms, shot
    noise only); negative values are rejected.
    """

    density_per_m3: float
    length_m: float
    fwhm_hz: float

    def __post_init__(self):
        if self.density_per_m3 < 0:
            raise ParameterError("density must be non-negative")
        if self.length_m <= 0:
            raise ParameterError("cell length must be positive")
        if self.fwhm_hz <= 0:
            raise ParameterError("pressure-broadened FWHM must be positive")


@dataclass(frozen=True)
class ProbeConfig:
    """Probe light: detuning (Hz, species offset convention), flux, efficiency."""

    detuning_hz: float
    photon_flux_per_s: float
    quantum_efficiency: float
    beam: BeamProfile
    pumping_rate_per_s: float = 0.0

    def __post_init__(self):
        if self.photon_flux_per_s <= 0:
            raise ParameterError("photon flux must be positive")
        if not 0 < self.quantum_efficiency <= 1:
            raise ParameterError("quantum efficiency must be in (0, 1]")
        if self.pumping_rate_per_s < 0:
            raise ParameterError("probe pumping rate must be non-negative")


@dataclass(frozen=True)
class MagnetometerConfig:
    """Static field, coherence time, polarization and carrier amplitude."""

    b_z_t: float
    t2_s: float
    polarization: float
    beta: float = 1.0
    signal_amplitude_rad: float = 0.0

    def __post_init__(self):
        if self.b_z_t <= 0:
            raise ParameterError("B_z must be positive")
        if self.t2_s <= 0:
            raise ParameterError("T2 must be positive")
        if not 0 <= self.polarization <= 1:
            raise ParameterError("polarization must be in [0, 1]")
        if self.beta <= 0:
            raise ParameterError("beta must be positive")
        if self.signal_amplitude_rad < 0:
            raise ParameterError("signal amplitude must be non-negative")


@dataclass(frozen=True)
class SimulationConfig:
    duration_s: float = 20.0
    sample_rate_hz: float = 250e3
    seed: int = 0
    frame: str = "carrier"
    baseband_rate_hz: float = 50e3
    max_samples: float = 2e8

    def __post_init__(self):
        if self.duration_s <= 0 or self.sample_rate_hz <= 0:
            raise ParameterError("duration and sample rate must be positive")
        if self.frame not in ("carrier", "baseband"):
            raise ParameterError(f"frame must be 'carrier' or 'baseband', got {self.frame!r}")
        if self.baseband_rate_hz <= 0:
            raise ParameterError("baseband rate must be positive")
        if self.duration_s * self.sample_rate_hz > self.max_samples:
            raise ParameterError(
                f"duration x sample rate = {self.duration_s * self.sample_rate_hz:.3g} "
                f"samples exceeds the memory cap ({self.max_samples:.3g})"
            )
        if self.seed < 0:
            raise ParameterError("seed must be a non-negative integer")


@dataclass(frozen=True)
class AnalysisConfig:
    segment_length: int = 262144
    window: str = "hann"
    overlap: float = 0.5
    lockin_cutoff_hz: float = 8e3
    lockin_order: int = 4

    def __post_init__(self):
        if self.segment_length < 2 or self.segment_length & (self.segment_length - 1):
            raise ParameterError("segment length must be a power of two >= 2")
        if not 0 <= self.overlap < 1:
            raise ParameterError("overlap fraction must be in [0, 1)")
        if self.window not in ("hann", "hamming", "rectangular"):
            raise ParameterError(f"unsupported window {self.window!r}")
        if self.lockin_cutoff_hz <= 0 or self.lockin_order < 1:
            raise ParameterError("lock-in cutoff must be positive and order >= 1")


@dataclass(frozen=True)
class CalibrationConfig:
    """Field-modulation calibration sweep settings for the sensitivity run."""

    tone_rms_t: float = 1e-12
    tone_duration_s: float = 4.0
    frequencies_hz: Optional[tuple] = None  # default: {0.1,0.5,1,2,4} / (2 pi T2)

    def __post_init__(self):
        if self.tone_rms_t <= 0 or self.tone_duration_s <= 0:
            raise ParameterError("calibration tone amplitude and duration must be positive")
        if self.frequencies_hz is not None:
            freqs = tuple(float(f) for f in self.frequencies_hz)
            if any(f <= 0 for f in freqs) or list(freqs) != sorted(freqs):
                raise ParameterError("calibration frequencies must be positive and increasing")
            object.__setattr__(self, "frequencies_hz", freqs)


@dataclass(frozen=True, eq=True)
class ExperimentConfig:
    """Single source of truth for one simulated run."""

    species: AtomSpecies
    cell: CellConfig
    probe: ProbeConfig
    magnetometer: MagnetometerConfig
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    raw: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        """Resolved config in file units (the canonical serialized form)."""
        return copy.deepcopy(self.raw)

    def replace_simulation(self, **kwargs) -> "ExperimentConfig":
        """New config with simulation fields overridden (raw kept in sync)."""
        d = self.to_dict()
        sim = d.setdefault("simulation", {})
        for key, value in kwargs.items():
            if key not in _SIM_OVERRIDE_KEYS:
                raise ParameterError(
                    f"unknown simulation override {key!r} "
                    f"(expected one of {sorted(_SIM_OVERRIDE_KEYS)})"
                )
            unit_key, factor = _SIM_OVERRIDE_KEYS[key]
            sim[unit_key] = value / factor if factor != 1 else value
        return config_from_dict(d)


_SIM_OVERRIDE_KEYS = {
    "duration_s": ("duration_s", 1),
    "sample_rate_hz": ("sample_rate_khz", 1e3),
    "seed": ("seed", 1),
    "frame": ("frame", 1),
}

# ---------------------------------------------------------------------------
# Strict dict -> config


_MISSING = object()


class _Table:
    """Tracks consumed keys of one config table and reports leftovers."""

    def __init__(self, data: dict, location: str):
        if not isinstance(data, dict):
            raise ConfigError("expected a table", location)
        self.data = data
        self.location = location
        self.seen = set()

    def _fetch(self, key, required):
        self.seen.add(key)
        if key in self.data:
            return self.data[key]
        if required:
            raise ConfigError(f"missing required key {key!r}", self.location)
        return _MISSING

    def number(self, key, required=True, default=None):
        value = self._fetch(key, required)
        if value is _MISSING:
            return default
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key!r} must be a number", self.location)
        return float(value)

    def integer(self, key, required=True, default=None):
        value = self._fetch(key, required)
        if value is _MISSING:
            return default
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key!r} must be an integer", self.location)
        return value

    def string(self, key, required=True, default=None):
        value = self._fetch(key, required)
        if value is _MISSING:
            return default
        if not isinstance(value, str):
            raise ConfigError(f"{key!r} must be a string", self.location)
        return value

    def array(self, key, required=True, default=None):
        value = self._fetch(key, required)
        if value is _MISSING:
            return default
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key!r} must be an array", self.location)
        return value

    def table(self, key, required=True):
        value = self._fetch(key, required)
        if value is _MISSING:
            return None
        return _Table(value, f"{self.location}.{key}" if self.location else key)

    def finish(self):
        unknown = set(self.data) - self.seen
        if unknown:
            name = sorted(unknown)[0]
            raise ConfigError(f"unknown key {name!r}", self.location)


def _species_from_table(tab: _Table) -> AtomSpecies:
    name = tab.string("name", required=False)
    if name is not None:
        tab.finish()
        return get_species(name)
    species = AtomSpecies(
        name=tab.string("label"),
        nuclear_spin=tab.number("nuclear_spin"),
        f_osc=tab.number("f_osc"),
        nu_a_offset_hz=tab.number("resonance_a_offset_ghz") * 1e9,
        nu_b_offset_hz=tab.number("resonance_b_offset_ghz") * 1e9,
        gyromagnetic_hz_per_t=tab.number("gyromagnetic_ghz_per_tesla") * 1e9,
    )
    tab.finish()
    return species


def _beam_from_table(tab: _Table) -> BeamProfile:
    kind = tab.string("kind")
    if kind == "tophat":
        area = tab.number("area_mm2", required=False)
        width_y = tab.number("width_y_mm", required=False)
        width_z = tab.number("width_z_mm", required=False)
        tab.finish()
        if area is None and (width_y is None or width_z is None):
            raise ConfigError("top-hat beam needs area_mm2 or width_y_mm + width_z_mm", tab.location)
        if area is None:
            area = width_y * width_z
        return TopHatBeam(area_m2=area * 1e-6)
    if kind == "gaussian":
        sy = tab.number("sigma_y_mm")
        sz = tab.number("sigma_z_mm")
        tab.finish()
        return GaussianBeam(sigma_y_m=sy * 1e-3, sigma_z_m=sz * 1e-3)
    raise ConfigError(f"unknown beam kind {kind!r} (tophat | gaussian)", tab.location)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Validate a config-unit dict (strict schema) and build the config."""
    root = _Table(data, "")
    try:
        species = _species_from_table(root.table("species"))

        cell_tab = root.table("cell")
        cell = CellConfig(
            density_per_m3=cell_tab.number("density_per_cm3") * 1e6,
            length_m=cell_tab.number("length_cm") * 1e-2,
            fwhm_hz=cell_tab.number("pressure_broadened_fwhm_ghz") * 1e9,
        )
        cell_tab.finish()

        probe_tab = root.table("probe")
        beam = _beam_from_table(probe_tab.table("beam"))
        probe = ProbeConfig(
            detuning_hz=probe_tab.number("detuning_from_a_ghz") * 1e9,
            photon_flux_per_s=probe_tab.number("photon_flux_per_s"),
            quantum_efficiency=probe_tab.number("quantum_efficiency"),
            beam=beam,
            pumping_rate_per_s=probe_tab.number("pumping_rate_per_s", required=False, default=0.0),
        )
        probe_tab.finish()

        mag_tab = root.table("magnetometer")
        mag = MagnetometerConfig(
            b_z_t=mag_tab.number("b_z_ut") * 1e-6,
            t2_s=mag_tab.number("t2_ms") * 1e-3,
            polarization=mag_tab.number("polarization"),
            beta=mag_tab.number("beta", required=False, default=1.0),
            signal_amplitude_rad=mag_tab.number("signal_amplitude_rad", required=False, default=0.0),
        )
        mag_tab.finish()

        sim_tab = root.table("simulation", required=False)
        if sim_tab is None:
            sim = SimulationConfig()
        else:
            sim = SimulationConfig(
                duration_s=sim_tab.number("duration_s", required=False, default=20.0),
                sample_rate_hz=sim_tab.number("sample_rate_khz", required=False, default=250.0) * 1e3,
                seed=sim_tab.integer("seed", required=False, default=0),
                frame=sim_tab.string("frame", required=False, default="carrier"),
                baseband_rate_hz=sim_tab.number("baseband_rate_khz", required=False, default=50.0) * 1e3,
                max_samples=sim_tab.number("max_samples", required=False, default=2e8),
            )
            sim_tab.finish()

        ana_tab = root.table("analysis", required=False)
        if ana_tab is None:
            analysis = AnalysisConfig()
        else:
            analysis = AnalysisConfig(
                segment_length=ana_tab.integer("segment_length", required=False, default=262144),
                window=ana_tab.string("window", required=False, default="hann"),
                overlap=ana_tab.number("overlap", required=False, default=0.5),
                lockin_cutoff_hz=ana_tab.number("lockin_cutoff_khz", required=False, default=8.0) * 1e3,
                lockin_order=ana_tab.integer("lockin_order", required=False, default=4),
            )
            ana_tab.finish()

        cal_tab = root.table("calibration", required=False)
        if cal_tab is None:
            calibration = CalibrationConfig()
        else:
            freqs = cal_tab.array("frequencies_hz", required=False)
            calibration = CalibrationConfig(
                tone_rms_t=cal_tab.number("tone_rms_ft", required=False, default=1000.0) * 1e-15,
                tone_duration_s=cal_tab.number("tone_duration_s", required=False, default=4.0),
                frequencies_hz=tuple(freqs) if freqs is not None else None,
            )
            cal_tab.finish()

        root.finish()
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc

    raw = _resolved_raw(data, sim, analysis, calibration)
    return ExperimentConfig(
        species=species,
        cell=cell,
        probe=probe,
        magnetometer=mag,
        simulation=sim,
        analysis=analysis,
        calibration=calibration,
        raw=raw,
    )


def _resolved_raw(data, sim, analysis, calibration) -> dict:
    """Copy of the input dict with all defaulted tables materialized."""
    raw = copy.deepcopy(data)
    sim_d = raw.setdefault("simulation", {})
    sim_d.setdefault("duration_s", sim.duration_s)
    sim_d.setdefault("sample_rate_khz", sim.sample_rate_hz / 1e3)
    sim_d.setdefault("seed", sim.seed)
    sim_d.setdefault("frame", sim.frame)
    sim_d.setdefault("baseband_rate_khz", sim.baseband_rate_hz / 1e3)
    sim_d.setdefault("max_samples", sim.max_samples)
    ana_d = raw.setdefault("analysis", {})
    ana_d.setdefault("segment_length", analysis.segment_length)
    ana_d.setdefault("window", analysis.window)
    ana_d.setdefault("overlap", analysis.overlap)
    ana_d.setdefault("lockin_cutoff_khz", analysis.lockin_cutoff_hz / 1e3)
    ana_d.setdefault("lockin_order", analysis.lockin_order)
    cal_d = raw.setdefault("calibration", {})
    cal_d.setdefault("tone_rms_ft", calibration.tone_rms_t / 1e-15)
    cal_d.setdefault("tone_duration_s", calibration.tone_duration_s)
    if calibration.frequencies_hz is not None:
        cal_d.setdefault("frequencies_hz", list(calibration.frequencies_hz))
    return raw


def load_config(path) -> ExperimentConfig:
    """Load and validate a TOML experiment config file."""
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = tomllib.loads(text.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error in {path.name}: {exc}") from exc
    return config_from_dict(data)


def _bundled(name: str) -> Path:
    return Path(str(resources.files("spinmag") / "data" / name))


def reference_spin_noise_config_path() -> Path:
    """Bundled config for the unpolarized spin-noise spectrum benchmark."""
    return _bundled("rb87_spin_noise.toml")


def reference_sensitivity_config_path() -> Path:
    """Bundled config for the polarized sensitivity/bandwidth benchmark."""
    return _bundled("rb87_sensitivity.toml")
