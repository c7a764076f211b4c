"""Config loading: TOML schema, unit conversion, overrides, round trips."""

import math

import pytest

from spinmag.config import (
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    load_config,
    reference_sensitivity_config_path,
    reference_spin_noise_config_path,
)
from spinmag.errors import ParameterError


def minimal_dict():
    return {
        "species": {"name": "rb87"},
        "cell": {"density_per_cm3": 8.7e12, "length_cm": 11.4, "pressure_broadened_fwhm_ghz": 1.42},
        "probe": {
            "detuning_from_a_ghz": -19.0,
            "photon_flux_per_s": 1.283e16,
            "quantum_efficiency": 0.8,
            "pumping_rate_per_s": 146.5,
            "beam": {"kind": "tophat", "width_y_mm": 3.8, "width_z_mm": 4.5},
        },
        "magnetometer": {
            "b_z_ut": 4.4,
            "t2_ms": 0.4681027737996922,
            "polarization": 0.0,
            "beta": 1.0,
            "signal_amplitude_rad": 0.0,
        },
    }


def test_load_reference_configs():
    sn = load_config(reference_spin_noise_config_path())
    sens = load_config(reference_sensitivity_config_path())
    assert sn.species.name == "rb87"
    assert math.isclose(sn.cell.density_per_m3, 8.7e18)
    assert math.isclose(sn.cell.length_m, 0.114)
    assert math.isclose(sn.probe.detuning_hz, -19e9)
    assert math.isclose(sn.magnetometer.b_z_t, 4.4e-6)
    assert sn.magnetometer.polarization == 0.0
    assert sens.magnetometer.polarization == 0.01
    assert math.isclose(sens.magnetometer.signal_amplitude_rad, 11.7)
    assert sens.calibration.tone_rms_t == pytest.approx(1e-12)
    # The two cells carry different coherence times.
    assert sn.magnetometer.t2_s > sens.magnetometer.t2_s


def test_unit_conversions():
    cfg = config_from_dict(minimal_dict())
    assert math.isclose(cfg.cell.density_per_m3, 8.7e12 * 1e6)
    assert math.isclose(cfg.cell.length_m, 0.114)
    assert math.isclose(cfg.cell.fwhm_hz, 1.42e9)
    assert math.isclose(cfg.magnetometer.t2_s, 4.681027737996922e-4)
    assert math.isclose(cfg.probe.beam.effective_area_m2(), 3.8e-3 * 4.5e-3)


def test_defaults_applied():
    cfg = config_from_dict(minimal_dict())
    assert cfg.simulation.duration_s == 20.0
    assert cfg.simulation.sample_rate_hz == 250000.0
    assert cfg.simulation.frame == "carrier"
    assert cfg.analysis.segment_length == 262144
    assert cfg.analysis.window == "hann"
    assert cfg.calibration.tone_duration_s == 4.0


def test_round_trip_exact():
    for path in (reference_spin_noise_config_path(), reference_sensitivity_config_path()):
        cfg = load_config(path)
        again = config_from_dict(cfg.to_dict())
        assert again == cfg
        assert again.to_dict() == cfg.to_dict()


def test_unknown_key_rejected_with_location():
    d = minimal_dict()
    d["cell"]["temperature_c"] = 45.0
    with pytest.raises(ConfigError) as err:
        config_from_dict(d)
    assert "cell" in str(err.value) and "temperature_c" in str(err.value)


def test_unknown_top_level_table_rejected():
    d = minimal_dict()
    d["laser"] = {"power_mw": 2.6}
    with pytest.raises(ConfigError) as err:
        config_from_dict(d)
    assert "laser" in str(err.value)


def test_missing_required_key():
    d = minimal_dict()
    del d["cell"]["density_per_cm3"]
    with pytest.raises(ConfigError) as err:
        config_from_dict(d)
    assert "density_per_cm3" in str(err.value)


def test_invalid_values_rejected():
    d = minimal_dict()
    d["probe"]["quantum_efficiency"] = 1.5
    with pytest.raises(ConfigError):
        config_from_dict(d)
    d = minimal_dict()
    d["magnetometer"]["polarization"] = -0.1
    with pytest.raises(ConfigError):
        config_from_dict(d)
    d = minimal_dict()
    d["cell"]["length_cm"] = 0.0
    with pytest.raises(ConfigError):
        config_from_dict(d)


def test_memory_cap_enforced():
    d = minimal_dict()
    d["simulation"] = {"duration_s": 1e5, "sample_rate_khz": 250.0}
    with pytest.raises(ConfigError):
        config_from_dict(d)


def test_segment_length_power_of_two():
    d = minimal_dict()
    d["analysis"] = {"segment_length": 100000}
    with pytest.raises(ConfigError):
        config_from_dict(d)


def test_gaussian_beam_from_dict():
    d = minimal_dict()
    d["probe"]["beam"] = {"kind": "gaussian", "sigma_y_mm": 1.1, "sigma_z_mm": 0.7}
    cfg = config_from_dict(d)
    assert math.isclose(
        cfg.probe.beam.effective_area_m2(), 4 * math.pi * 1.1e-3 * 0.7e-3, rel_tol=1e-14
    )


def test_replace_simulation_overrides():
    cfg = config_from_dict(minimal_dict())
    new = cfg.replace_simulation(duration_s=2.0, seed=99, frame="baseband")
    assert new.simulation.duration_s == 2.0
    assert new.simulation.seed == 99
    assert new.simulation.frame == "baseband"
    # untouched sections identical
    assert new.cell == cfg.cell
    assert new.probe == cfg.probe
    # the raw dict follows the overrides so a saved manifest reruns the same
    assert new.to_dict()["simulation"]["duration_s"] == 2.0
    again = config_from_dict(new.to_dict())
    assert again == new


def test_replace_simulation_rejects_unknown():
    cfg = config_from_dict(minimal_dict())
    with pytest.raises((ConfigError, ParameterError, TypeError)):
        cfg.replace_simulation(nonsense=1.0)


def test_invalid_frame_rejected():
    d = minimal_dict()
    d["simulation"] = {"frame": "sideways"}
    with pytest.raises(ConfigError):
        config_from_dict(d)


def test_zero_density_allowed():
    d = minimal_dict()
    d["cell"]["density_per_cm3"] = 0.0
    cfg = config_from_dict(d)
    assert cfg.cell.density_per_m3 == 0.0
