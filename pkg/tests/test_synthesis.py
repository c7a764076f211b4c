"""Signal synthesis: OU spin noise, shot noise, carrier, Bloch oracle."""

import dataclasses
import math

import numpy as np
import pytest

from spinmag.config import config_from_dict
from spinmag.dsp import integrate_band, welch_psd
from spinmag.errors import ParameterError
from spinmag.physics import larmor_frequency
from spinmag.species import AtomSpecies, RB87
from spinmag.synthesis import (
    ConstantWaveform,
    MultiToneWaveform,
    NoiseProcessParams,
    SineWaveform,
    derive_seed,
    integrate_bloch,
    simulate_shot_noise,
    simulate_spin_noise,
    synthesize_polarimeter_output,
)


def make_config(**magnetometer):
    mag = {
        "b_z_ut": 4.4,
        "t2_ms": 0.4681027737996922,
        "polarization": 0.0,
        "beta": 1.0,
        "signal_amplitude_rad": 0.0,
    }
    mag.update(magnetometer)
    return config_from_dict(
        {
            "species": {"name": "rb87"},
            "cell": {
                "density_per_cm3": 8.7e12,
                "length_cm": 11.4,
                "pressure_broadened_fwhm_ghz": 1.42,
            },
            "probe": {
                "detuning_from_a_ghz": -19.0,
                "photon_flux_per_s": 1.283e16,
                "quantum_efficiency": 0.8,
                "pumping_rate_per_s": 146.5,
                "beam": {"kind": "tophat", "width_y_mm": 3.8, "width_z_mm": 4.5},
            },
            "magnetometer": mag,
            "simulation": {"duration_s": 2.0, "sample_rate_khz": 250.0, "seed": 17},
        }
    )


PARAMS = NoiseProcessParams(
    center_frequency_hz=4000.0, correlation_time_s=2e-3, rms_a_rad=3e-7, rms_b_rad=2e-7
)


def test_spin_noise_total_rms_carrier():
    ts = simulate_spin_noise(PARAMS, 16.0, 32000.0, seed=1)
    expect = math.hypot(PARAMS.rms_a_rad, PARAMS.rms_b_rad)
    assert ts.rms() == pytest.approx(expect, rel=0.05)
    assert not ts.is_complex


def test_spin_noise_total_rms_baseband():
    ts = simulate_spin_noise(PARAMS, 16.0, 8000.0, seed=1, frame="baseband")
    assert ts.is_complex
    # complex envelope carries twice the real-signal power
    expect = math.sqrt(2.0) * math.hypot(PARAMS.rms_a_rad, PARAMS.rms_b_rad)
    assert ts.rms() == pytest.approx(expect, rel=0.05)


def test_spin_noise_deterministic():
    a = simulate_spin_noise(PARAMS, 1.0, 32000.0, seed=9)
    b = simulate_spin_noise(PARAMS, 1.0, 32000.0, seed=9)
    c = simulate_spin_noise(PARAMS, 1.0, 32000.0, seed=10)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_spin_noise_zero_rms_is_silent():
    silent = NoiseProcessParams(4000.0, 2e-3, 0.0, 0.0)
    ts = simulate_spin_noise(silent, 0.5, 32000.0, seed=3)
    assert np.all(ts.data == 0.0)


def test_spin_noise_undersampled_carrier_rejected():
    with pytest.raises(ParameterError):
        simulate_spin_noise(PARAMS, 1.0, 4.0 * PARAMS.center_frequency_hz, seed=0)


def test_manifold_streams_independent():
    only_a = NoiseProcessParams(4000.0, 2e-3, 1.0, 0.0)
    only_b = NoiseProcessParams(4000.0, 2e-3, 0.0, 1.0)
    a = simulate_spin_noise(only_a, 8.0, 32000.0, seed=21).data
    b = simulate_spin_noise(only_b, 8.0, 32000.0, seed=21).data
    n = a.size
    # normalized cross-correlation at a few lags; 3 sigma of the null is
    # about 3/sqrt(n_eff) with n_eff reduced by the OU correlation time
    n_eff = n / (2 * PARAMS.correlation_time_s * 32000.0)
    bound = 3.0 / math.sqrt(n_eff)
    for lag in (0, 7, 64, 501):
        rho = np.dot(a[: n - lag], b[lag:]) / (n - lag)
        rho /= np.std(a) * np.std(b)
        assert abs(rho) < bound


def test_spin_noise_stationary_halves():
    ts = simulate_spin_noise(PARAMS, 16.0, 32000.0, seed=12)
    n = len(ts.data) // 2
    v1 = np.var(ts.data[:n])
    v2 = np.var(ts.data[n:])
    # each half holds ~2000 correlation times -> variance known to ~3%;
    # the ratio of two independent estimates stays within 3 sigma ~ 10%
    assert v1 / v2 == pytest.approx(1.0, abs=0.10)
    mean_bound = 3.0 * ts.rms() * math.sqrt(2 * PARAMS.correlation_time_s / 8.0)
    assert abs(np.mean(ts.data[:n])) < mean_bound
    assert abs(np.mean(ts.data[n:])) < mean_bound


def test_spin_noise_psd_is_lorentzian_at_center():
    # Peak density of the two-manifold line: total_rms^2 * 2 tau (one-sided).
    ts = simulate_spin_noise(PARAMS, 32.0, 32000.0, seed=8)
    sp = welch_psd(ts, 8192, overlap=0.5, window="hann")
    f0 = PARAMS.center_frequency_hz
    sel = (sp.frequencies_hz > f0 - 20) & (sp.frequencies_hz < f0 + 20)
    peak = float(np.median(sp.values[sel]))
    expect = (PARAMS.rms_a_rad**2 + PARAMS.rms_b_rad**2) * 2.0 * PARAMS.correlation_time_s
    assert peak == pytest.approx(expect, rel=0.10)


def test_shot_noise_level_carrier(sensitivity_config):
    probe = sensitivity_config.probe
    ts = simulate_shot_noise(probe, 4.0, 250000.0, seed=4)
    # one-sided density 1/(2 Phi eta) -> variance fs/(4 Phi eta)
    sigma2 = 250000.0 / (4.0 * probe.photon_flux_per_s * probe.quantum_efficiency)
    assert ts.rms() ** 2 == pytest.approx(sigma2, rel=0.02)
    sp = welch_psd(ts, 4096)
    assert float(np.median(sp.values)) == pytest.approx(
        1.0 / (2.0 * probe.photon_flux_per_s * probe.quantum_efficiency), rel=0.03
    )


def test_shot_noise_level_baseband(sensitivity_config):
    probe = sensitivity_config.probe
    fs_bb = 50000.0
    ts = simulate_shot_noise(probe, 4.0, fs_bb, seed=4, frame="baseband")
    sp = welch_psd(ts, 4096, center_frequency_hz=31000.0)
    # mapped density matches the carrier-frame one-sided floor
    assert float(np.median(sp.values)) == pytest.approx(
        1.0 / (2.0 * probe.photon_flux_per_s * probe.quantum_efficiency), rel=0.03
    )


def test_spin_plus_shot_psd_additivity(spin_noise_config):
    cfg = spin_noise_config.replace_simulation(duration_s=8.0, seed=33)
    from spinmag.synthesis import noise_params_from_config

    params = noise_params_from_config(cfg)
    fs = cfg.simulation.sample_rate_hz
    spin = simulate_spin_noise(params, 8.0, fs, seed=33)
    shot = simulate_shot_noise(cfg.probe, 8.0, fs, seed=33)
    both = synthesize_polarimeter_output(cfg)
    assert np.allclose(both.data, spin.data + shot.data, atol=1e-18)
    sp_sum = welch_psd(both, 16384)
    sp_a = welch_psd(spin, 16384)
    sp_b = welch_psd(shot, 16384)
    f0 = params.center_frequency_hz
    band = lambda s: integrate_band(s, f0 - 3000, f0 + 3000)
    assert band(sp_sum) == pytest.approx(band(sp_a) + band(sp_b), rel=0.02)


def test_carrier_and_baseband_frames_agree():
    params = NoiseProcessParams(4000.0, 2e-3, 3e-7, 2e-7)
    fs, fs_bb = 32000.0, 8000.0
    carrier = simulate_spin_noise(params, 16.0, fs, seed=77)
    base = simulate_spin_noise(params, 16.0, fs_bb, seed=77, frame="baseband")
    sp_c = welch_psd(carrier, 8192)
    sp_b = welch_psd(base, 2048, center_frequency_hz=params.center_frequency_hz)
    lo, hi = params.center_frequency_hz - 800.0, params.center_frequency_hz + 800.0
    pc = integrate_band(sp_c, lo, hi)
    pb = integrate_band(sp_b, lo, hi)
    assert pc == pytest.approx(pb, rel=0.10)


def test_polarimeter_pure_carrier():
    cfg = make_config(polarization=0.01, signal_amplitude_rad=11.7)
    ts = synthesize_polarimeter_output(cfg, duration_s=0.5, include_noise=False)
    f_l = larmor_frequency(RB87, 4.4e-6)
    amp = 11.7 * 0.01
    t = ts.times()
    expect = amp * np.sin(2 * math.pi * f_l * t)
    assert np.allclose(ts.data, expect, atol=1e-12 * amp)
    # rms of a sine over a non-integer number of cycles is off by O(1/n)
    assert ts.rms() == pytest.approx(amp / math.sqrt(2), rel=1e-4)


def test_polarimeter_unpolarized_total_power(spin_noise_config):
    cfg = spin_noise_config.replace_simulation(duration_s=4.0, seed=2)
    ts = synthesize_polarimeter_output(cfg)
    probe = cfg.probe
    shot_var = cfg.simulation.sample_rate_hz / (
        4.0 * probe.photon_flux_per_s * probe.quantum_efficiency
    )
    spin_var = 1.0706059484662348e-6 ** 2
    assert ts.rms() ** 2 == pytest.approx(shot_var + spin_var, rel=0.05)


def test_polarimeter_deterministic(spin_noise_config):
    cfg = spin_noise_config.replace_simulation(duration_s=1.0)
    a = synthesize_polarimeter_output(cfg)
    b = synthesize_polarimeter_output(cfg)
    assert np.array_equal(a.data, b.data)


def test_derive_seed_stable_and_distinct():
    s1 = derive_seed(42, "spin_a")
    s2 = derive_seed(42, "spin_a")
    s3 = derive_seed(42, "spin_b")
    assert s1.generate_state(2).tolist() == s2.generate_state(2).tolist()
    assert s1.generate_state(2).tolist() != s3.generate_state(2).tolist()


# ---------------------------------------------------------------------------
# Bloch-equation oracle


def test_bloch_free_decay_envelope(spin_noise_config):
    cfg = spin_noise_config
    t2 = cfg.magnetometer.t2_s
    f_l = larmor_frequency(cfg.species, cfg.magnetometer.b_z_t)
    fs = 64.0 * f_l
    px, py, _ = integrate_bloch(cfg, None, None, 5.0 * t2, fs, p_init=(1.0, 0.0, 0.0))
    env = np.hypot(px.data, py.data)
    expect = np.exp(-px.times() / t2)
    assert np.allclose(env, expect, rtol=3e-4)
    # phase: the transverse spin precesses at -f_L (clockwise for B along +z)
    z = (px.data + 1j * py.data) * np.exp(2j * math.pi * f_l * px.times())
    drift = np.angle(z[-1] / z[0])
    assert abs(drift) < 2e-3


def test_bloch_gamma_zero_frozen(spin_noise_config):
    frozen_species = AtomSpecies(
        name="inert",
        nuclear_spin=1.5,
        f_osc=0.34,
        nu_a_offset_hz=0.0,
        nu_b_offset_hz=6.834682e9,
        gyromagnetic_hz_per_t=0.0,
    )
    cfg = dataclasses.replace(spin_noise_config, species=frozen_species)
    t2, t1, p_eq = 1e-3, 2e-3, 0.2
    cfg = dataclasses.replace(
        cfg, magnetometer=dataclasses.replace(cfg.magnetometer, t2_s=t2)
    )
    px, py, pz = integrate_bloch(
        cfg, None, None, 5e-3, 1e5, p_init=(0.6, 0.3, 0.5), t1_s=t1, p_eq=p_eq
    )
    t = px.times()
    assert np.allclose(px.data, 0.6 * np.exp(-t / t2), rtol=1e-7)
    assert np.allclose(py.data, 0.3 * np.exp(-t / t2), rtol=1e-7)
    assert np.allclose(pz.data, p_eq + (0.5 - p_eq) * np.exp(-t / t1), rtol=1e-7)


def test_bloch_pump_equilibrium():
    frozen_species = AtomSpecies(
        name="inert",
        nuclear_spin=1.5,
        f_osc=0.34,
        nu_a_offset_hz=0.0,
        nu_b_offset_hz=6.834682e9,
        gyromagnetic_hz_per_t=0.0,
    )
    cfg = dataclasses.replace(make_config(t2_ms=1.0), species=frozen_species)
    rate = 800.0
    px, _, _ = integrate_bloch(cfg, None, ConstantWaveform(rate), 0.02, 1e5)
    # dPx/dt = rate (1 - Px) - Px/T2 = 0  ->  Px = rate/(rate + 1/T2)
    assert px.data[-1] == pytest.approx(rate / (rate + 1e3), rel=1e-6)


def test_bloch_rejects_coarse_step(spin_noise_config):
    f_l = larmor_frequency(spin_noise_config.species, spin_noise_config.magnetometer.b_z_t)
    with pytest.raises(ParameterError):
        integrate_bloch(spin_noise_config, None, None, 1e-3, 8.0 * f_l)


def test_bloch_rejects_negative_pump(spin_noise_config):
    f_l = larmor_frequency(spin_noise_config.species, spin_noise_config.magnetometer.b_z_t)
    pump = SineWaveform(1000.0, 10.0)  # dips negative
    with pytest.raises(ParameterError):
        integrate_bloch(spin_noise_config, None, pump, 1e-3, 20.0 * f_l)


def test_bloch_tone_response_matches_model():
    # Synchronously pumped ensemble: the azimuthal phase responds to a B_z
    # tone like the first-order filter behind the response model.  Weak
    # pumping (g0 = 0.01/T2) keeps the effective coherence time within 1%.
    t2 = 1.0 / (2.0 * math.pi * 50.0)
    cfg = make_config(b_z_ut=0.44, t2_ms=t2 * 1e3)
    f_l = larmor_frequency(cfg.species, cfg.magnetometer.b_z_t)
    gamma = cfg.species.gyromagnetic_hz_per_t
    fs = 1e5
    g0 = 0.01 / t2
    pump = MultiToneWaveform(
        tones=(SineWaveform(f_l, 0.99 * g0 / math.sqrt(2.0)),), offset=g0
    )
    b_amp = 5e-11
    settle, span = 0.3, 2.0
    for f_tone in (5.0, 25.0, 50.0, 100.0, 200.0):
        field = SineWaveform(f_tone, b_amp / math.sqrt(2.0))
        px, py, _ = integrate_bloch(cfg, field, pump, settle + span, fs)
        t = px.times()
        keep = t >= settle
        z = (px.data + 1j * py.data) * np.exp(2j * math.pi * f_l * t)
        theta = np.angle(z[keep])
        proj = 2.0 * np.mean(theta * np.exp(-2j * math.pi * f_tone * t[keep]))
        expect = 2.0 * math.pi * gamma * t2 * b_amp / math.sqrt(1.0 + (2.0 * math.pi * f_tone * t2) ** 2)
        assert abs(proj) == pytest.approx(expect, rel=0.03), f"tone {f_tone} Hz"
