"""End-to-end experiment pipelines behind the CLI subcommands.

Each run loads a config (TOML, or a previously written ``manifest.json`` for
exact reruns), executes the measurement chain, and writes CSV/JSON artifacts
plus a manifest capturing the resolved configuration, seed, and tool version.
Outputs are deterministic for a given (config, seed); partial files are
removed if a run fails.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_from_dict, load_config
from .dsp import Spectrum, integrate_band, lock_in_demodulate, lockin_gain, welch_psd
from .errors import AnalysisError, ConfigError
from .estimation import (
    SensitivityReport,
    demolition_sensitivity,
    extract_bandwidth,
    fit_lorentzian_floor,
    measure_response,
    noise_model_asd,
    plateau_level,
    qnd_bandwidth,
    sensitivity_spectrum,
)
from .kernels import BACKEND
from .physics import (
    effective_atom_number,
    larmor_frequency,
    optical_density_on_resonance,
    rms_rotation_noise,
    rms_spin_fluctuation,
    rotation_coefficients,
)
from .synthesis import noise_params_from_config, synthesize_polarimeter_output

__all__ = ["run_spin_noise", "run_sensitivity", "run_predict", "load_run_config"]


def load_run_config(
    config_path,
    seed: Optional[int] = None,
    duration_s: Optional[float] = None,
    frame: Optional[str] = None,
) -> ExperimentConfig:
    """Load a TOML config or a manifest.json, applying CLI-level overrides."""
    path = Path(config_path)
    if path.suffix.lower() == ".json":
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read manifest: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"manifest parse error in {path.name}: {exc}") from exc
        if "config" not in payload or not isinstance(payload["config"], dict):
            raise ConfigError(f"{path.name} has no 'config' table; not a run manifest")
        cfg = config_from_dict(payload["config"])
    else:
        cfg = load_config(path)
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if duration_s is not None:
        overrides["duration_s"] = duration_s
    if frame is not None:
        overrides["frame"] = frame
    if overrides:
        cfg = cfg.replace_simulation(**overrides)
    return cfg


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class _OutputSet:
    """Tracks files written by a run so failures leave no partial outputs."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.paths = []

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.paths.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.paths:
            try:
                p.unlink()
            except OSError:
                pass


def _manifest(cfg: ExperimentConfig, command: str) -> dict:
    return {
        "tool": "spinmag",
        "version": __version__,
        "command": command,
        "seed": cfg.simulation.seed,
        "frame": cfg.simulation.frame,
        "backend": BACKEND,
        "config": cfg.to_dict(),
    }


# ---------------------------------------------------------------------------
# spin-noise: raw PSD of the unpolarized (or as-configured) polarimeter output


def run_spin_noise(
    config_path,
    out_dir,
    seed: Optional[int] = None,
    duration_s: Optional[float] = None,
    frame: Optional[str] = None,
) -> dict:
    """Synthesize the polarimeter output and characterize its noise spectrum.

    Writes ``raw_psd.csv`` (one-sided PSD of the raw angle), a
    ``spin_noise_report.json`` with the Lorentzian+floor fit, the band
    integral rms, and the closed-form prediction, and ``manifest.json``.
    """
    cfg = load_run_config(config_path, seed=seed, duration_s=duration_s, frame=frame)
    out = _OutputSet(out_dir)
    try:
        report = _spin_noise_core(cfg, out)
        _write_json(out.path("manifest.json"), _manifest(cfg, "spin-noise"))
    except Exception:
        out.cleanup()
        raise
    return report


def _spin_noise_core(cfg: ExperimentConfig, out: _OutputSet) -> dict:
    sim = cfg.simulation
    ana = cfg.analysis
    params = noise_params_from_config(cfg)
    series = synthesize_polarimeter_output(cfg)
    if sim.frame == "baseband":
        sp = welch_psd(
            series,
            ana.segment_length,
            overlap=ana.overlap,
            window=ana.window,
            center_frequency_hz=params.center_frequency_hz,
        )
    else:
        sp = welch_psd(series, ana.segment_length, overlap=ana.overlap, window=ana.window)
    sp.to_csv(out.path("raw_psd.csv"))

    fit = None
    degenerate = params.total_rms_rad == 0.0
    if not degenerate:
        window_hw = 25.0 * params.half_width_hz
        lo = max(sp.frequencies_hz[0], params.center_frequency_hz - window_hw)
        hi = min(sp.frequencies_hz[-1], params.center_frequency_hz + window_hw)
        try:
            sel = sp.band(lo, hi)
            # Averaged periodogram bins have variance proportional to the
            # squared mean, so relative weighting is the efficient choice.
            fit = fit_lorentzian_floor(sel, weights=1.0 / np.square(sel.values))
        except AnalysisError:
            degenerate = True

    phi_rms_measured = None
    band = None
    if fit is not None:
        lo = max(sp.frequencies_hz[0], fit.center_hz - 20.0 * fit.hwhm_hz)
        hi = min(sp.frequencies_hz[-1], fit.center_hz + 20.0 * fit.hwhm_hz)
        band = (lo, hi)
        variance = integrate_band(sp, lo, hi, floor=fit.floor)
        phi_rms_measured = math.sqrt(max(variance, 0.0))

    predicted = rms_rotation_noise(cfg.species, cfg.cell, cfg.probe)
    report = {
        "degenerate": degenerate,
        "fit": fit.to_dict() if fit is not None else None,
        "integration_band_hz": list(band) if band else None,
        "phi_rms_measured_rad": phi_rms_measured,
        "phi_rms_predicted_rad": predicted,
        "configured_center_hz": params.center_frequency_hz,
        "configured_half_width_hz": params.half_width_hz,
        "spin_noise_above_shot_floor": bool(
            fit is not None and fit.peak_power > fit.floor
        ),
        "spectrum_csv": "raw_psd.csv",
        "frame": sim.frame,
        "seed": sim.seed,
        "duration_s": sim.duration_s,
        "segment_count": sp.segment_count,
        "resolution_bandwidth_hz": sp.resolution_bandwidth_hz,
        "backend": BACKEND,
        "version": __version__,
    }
    _write_json(out.path("spin_noise_report.json"), report)
    return report


# ---------------------------------------------------------------------------
# sensitivity: polarized run, lock-in, calibration, bandwidth


def run_sensitivity(
    config_path,
    out_dir,
    seed: Optional[int] = None,
    duration_s: Optional[float] = None,
    frame: Optional[str] = None,
) -> dict:
    """Full magnetometer characterization: noise, response, sensitivity, bandwidth.

    Writes ``sensitivity.csv`` (field-equivalent noise density with the
    flat-noise comparison column), ``sensitivity_report.json`` and
    ``manifest.json``.
    """
    cfg = load_run_config(config_path, seed=seed, duration_s=duration_s, frame=frame)
    out = _OutputSet(out_dir)
    try:
        report = _sensitivity_core(cfg, out)
        _write_json(out.path("manifest.json"), _manifest(cfg, "sensitivity"))
    except Exception:
        out.cleanup()
        raise
    return report


def _sensitivity_core(cfg: ExperimentConfig, out: _OutputSet) -> dict:
    sim = cfg.simulation
    ana = cfg.analysis
    mag = cfg.magnetometer
    f_l = larmor_frequency(cfg.species, mag.b_z_t)
    fs = sim.sample_rate_hz if sim.frame == "carrier" else sim.baseband_rate_hz

    # Noise run: no deliberate modulation, quadrature channel carries the
    # field-equivalent fluctuations.
    series = synthesize_polarimeter_output(cfg)
    lock = lock_in_demodulate(
        series, f_l, math.pi / 2.0, cutoff_hz=ana.lockin_cutoff_hz, order=ana.lockin_order
    )
    del series
    _, quad = lock.settled()
    spq = welch_psd(quad, ana.segment_length, overlap=ana.overlap, window=ana.window)

    # Refer densities to the mixer output: divide out the demodulator low-pass.
    keep = spq.frequencies_hz <= ana.lockin_cutoff_hz
    freqs = spq.frequencies_hz[keep]
    gain = lockin_gain(freqs, ana.lockin_cutoff_hz, ana.lockin_order, fs)
    noise_power = Spectrum(
        freqs,
        spq.values[keep] / gain**2,
        kind="power",
        unit="rad",
        resolution_bandwidth_hz=spq.resolution_bandwidth_hz,
        segment_count=spq.segment_count,
    )

    fit = None
    try:
        hw = 1.0 / (2.0 * math.pi * mag.t2_s)
        fit_hi = min(freqs[-1], 25.0 * hw)
        sel = noise_power.band(freqs[0], fit_hi)
        # Relative weights: averaged-periodogram variance scales with S^2.
        fit = fit_lorentzian_floor(
            sel, weights=1.0 / np.square(sel.values), fix_center=0.0
        )
    except AnalysisError:
        fit = None

    response = measure_response(cfg, frame=sim.frame)
    sens = sensitivity_spectrum(noise_power, response)

    if fit is not None:
        flat_asd = math.sqrt(fit.peak_power + fit.floor)
    else:
        flat_asd = plateau_level(noise_power)
    demol = demolition_sensitivity(
        flat_asd, response, sens.frequencies_hz, resolution_bandwidth_hz=sens.resolution_bandwidth_hz
    )

    report = SensitivityReport(
        sensitivity=sens,
        demolition=demol,
        dc_sensitivity_t=plateau_level(sens),
        measured_bandwidth_hz=extract_bandwidth(sens),
        closed_form_bandwidth_hz=qnd_bandwidth(
            cfg.probe.quantum_efficiency,
            optical_density_on_resonance(cfg.species, cfg.cell),
            cfg.probe.pumping_rate_per_s,
            mag.t2_s,
            mag.beta,
        ),
        demolition_bandwidth_hz=extract_bandwidth(demol),
        demolition_closed_form_hz=1.0 / (2.0 * math.pi * mag.t2_s),
        fit=fit,
        response=response,
        meta={
            "frame": sim.frame,
            "seed": sim.seed,
            "duration_s": sim.duration_s,
            "segment_count": spq.segment_count,
            "resolution_bandwidth_hz": spq.resolution_bandwidth_hz,
            "on_peak_noise_asd_rad_per_sqrt_hz": flat_asd,
            "sensitivity_csv": "sensitivity.csv",
            "backend": BACKEND,
            "version": __version__,
        },
    )

    _write_sensitivity_csv(out.path("sensitivity.csv"), sens, demol)
    payload = report.to_json_dict()
    _write_json(out.path("sensitivity_report.json"), payload)
    return payload


def _write_sensitivity_csv(path: Path, sens: Spectrum, demol: Spectrum) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("# spinmag-sensitivity\n")
        fh.write("# unit: tesla/sqrt(Hz)\n")
        fh.write(f"# resolution_bandwidth_hz: {sens.resolution_bandwidth_hz!r}\n")
        fh.write(f"# segment_count: {sens.segment_count}\n")
        fh.write("frequency_hz,qnd_tesla_per_sqrt_hz,demolition_tesla_per_sqrt_hz\n")
        np.savetxt(
            fh,
            np.column_stack([sens.frequencies_hz, sens.values, demol.values]),
            fmt="%.17g",
            delimiter=",",
        )


# ---------------------------------------------------------------------------
# predict: closed-form quantities only, no simulation


def run_predict(config_path, seed=None, duration_s=None, frame=None) -> dict:
    """All closed-form quantities for a config, as a JSON-ready dict."""
    cfg = load_run_config(config_path, seed=seed, duration_s=duration_s, frame=frame)
    species, cell, probe, mag = cfg.species, cfg.cell, cfg.probe, cfg.magnetometer

    n_eff = effective_atom_number(cell, probe.beam)
    c_a, c_b = rotation_coefficients(species, cell, probe)
    if n_eff > 0:
        sig_a = rms_spin_fluctuation(species.f_a, species.nuclear_spin, n_eff)
        sig_b = rms_spin_fluctuation(species.f_b, species.nuclear_spin, n_eff)
    else:
        sig_a = sig_b = None
    phi_rms = rms_rotation_noise(species, cell, probe)
    n_ab = optical_density_on_resonance(species, cell)
    f_l = larmor_frequency(species, mag.b_z_t)
    t2 = mag.t2_s
    shot_floor = math.sqrt(
        1.0 / (2.0 * probe.photon_flux_per_s * probe.quantum_efficiency)
    )
    contrast = (
        probe.quantum_efficiency * n_ab * probe.pumping_rate_per_s * t2 * mag.beta
    )
    carrier = mag.signal_amplitude_rad * mag.polarization
    if carrier > 0:
        resp_dc = carrier * 2.0 * math.pi * species.gyromagnetic_hz_per_t * t2
        # demodulated single-quadrature convention: both noise sidebands fold
        # onto the measurement frequency, hence the sqrt(2)
        noise_on_peak = noise_model_asd(f_l, probe, species, cell, mag, f_l)
        dc_sens = math.sqrt(2.0) * float(noise_on_peak) / resp_dc
    else:
        resp_dc = None
        dc_sens = None

    return {
        "species": species.name,
        "larmor_frequency_hz": f_l,
        "effective_atom_number": n_eff,
        "rms_spin_fluctuation_a": sig_a,
        "rms_spin_fluctuation_b": sig_b,
        "rotation_coefficient_a_rad": c_a,
        "rotation_coefficient_b_rad": c_b,
        "phi_rms_th_rad": phi_rms,
        "optical_density_on_resonance": n_ab,
        "shot_floor_rad_per_sqrt_hz": shot_floor,
        "peak_floor_ratio": contrast,
        "response_half_width_hz": 1.0 / (2.0 * math.pi * t2),
        "dc_responsivity_rad_per_tesla": resp_dc,
        "dc_sensitivity_tesla_per_sqrt_hz": dc_sens,
        "qnd_bandwidth_hz": qnd_bandwidth(
            probe.quantum_efficiency, n_ab, probe.pumping_rate_per_s, t2, mag.beta
        ),
        "demolition_bandwidth_hz": 1.0 / (2.0 * math.pi * t2),
        "version": __version__,
    }
