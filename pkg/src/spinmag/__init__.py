"""Simulation and analysis of spin-noise-limited scalar atomic magnetometers."""

__version__ = "0.1.0"

from .config import (
    AnalysisConfig,
    CalibrationConfig,
    CellConfig,
    ExperimentConfig,
    GaussianBeam,
    MagnetometerConfig,
    ProbeConfig,
    SampledBeam,
    SimulationConfig,
    TopHatBeam,
    config_from_dict,
    load_config,
    reference_sensitivity_config_path,
    reference_spin_noise_config_path,
)
from .dsp import LockInOutput, Spectrum, integrate_band, lock_in_demodulate, lockin_gain, welch_psd
from .errors import AnalysisError, ConfigError, ParameterError
from .estimation import (
    LorentzianFitResult,
    ResponseCurve,
    SensitivityReport,
    demolition_sensitivity,
    extract_bandwidth,
    fit_lorentzian_floor,
    measure_response,
    noise_model_asd,
    plateau_level,
    qnd_bandwidth,
    response_model,
    sensitivity_spectrum,
)
from .physics import (
    dispersion_profile,
    effective_atom_number,
    larmor_frequency,
    optical_density_on_resonance,
    rms_rotation_noise,
    rms_spin_fluctuation,
    rotation_coefficients,
)
from .pipelines import run_predict, run_sensitivity, run_spin_noise
from .series import TimeSeries
from .species import RB85, RB87, AtomSpecies, get_species
from .synthesis import (
    ConstantWaveform,
    FieldWaveform,
    MultiToneWaveform,
    NoiseProcessParams,
    SampledWaveform,
    SineWaveform,
    integrate_bloch,
    noise_params_from_config,
    simulate_shot_noise,
    simulate_spin_noise,
    synthesize_polarimeter_output,
)

__all__ = [
    "__version__",
    # errors
    "AnalysisError",
    "ConfigError",
    "ParameterError",
    # species / config
    "AtomSpecies",
    "RB87",
    "RB85",
    "get_species",
    "CellConfig",
    "ProbeConfig",
    "MagnetometerConfig",
    "SimulationConfig",
    "AnalysisConfig",
    "CalibrationConfig",
    "ExperimentConfig",
    "TopHatBeam",
    "GaussianBeam",
    "SampledBeam",
    "load_config",
    "config_from_dict",
    "reference_spin_noise_config_path",
    "reference_sensitivity_config_path",
    # physics
    "dispersion_profile",
    "larmor_frequency",
    "rms_spin_fluctuation",
    "effective_atom_number",
    "rotation_coefficients",
    "rms_rotation_noise",
    "optical_density_on_resonance",
    # synthesis
    "TimeSeries",
    "ConstantWaveform",
    "SineWaveform",
    "MultiToneWaveform",
    "SampledWaveform",
    "FieldWaveform",
    "NoiseProcessParams",
    "noise_params_from_config",
    "simulate_spin_noise",
    "simulate_shot_noise",
    "synthesize_polarimeter_output",
    "integrate_bloch",
    # dsp
    "Spectrum",
    "LockInOutput",
    "lock_in_demodulate",
    "lockin_gain",
    "welch_psd",
    "integrate_band",
    # estimation
    "LorentzianFitResult",
    "fit_lorentzian_floor",
    "response_model",
    "ResponseCurve",
    "measure_response",
    "noise_model_asd",
    "sensitivity_spectrum",
    "demolition_sensitivity",
    "plateau_level",
    "extract_bandwidth",
    "qnd_bandwidth",
    "SensitivityReport",
    # pipelines
    "run_spin_noise",
    "run_sensitivity",
    "run_predict",
]
