"""Synthesis of polarimeter signals: spin noise, shot noise, carrier, Bloch.

Signals can be generated in two frames:

* ``carrier`` — real rotation angle sampled fast enough to resolve the spin
  precession line (rate >= 8x its frequency), the digital twin of the
  digitized polarimeter output.
* ``baseband`` — the complex envelope ``w`` about the precession frequency,
  with phi(t) = Re[w(t) e^{i 2 pi f0 t}], at a reduced rate for long runs.

Randomness is organized as one named stream per noise source, derived from
(master seed, source label), so adding or removing a source never changes
the samples drawn by the others.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .config import ExperimentConfig, ProbeConfig
from .errors import ParameterError
from .kernels import ar1_complex, ar1_real, bloch_rk4
from .physics import (
    effective_atom_number,
    larmor_frequency,
    rms_spin_fluctuation,
    rotation_coefficients,
)
from .series import TimeSeries

__all__ = [
    "ConstantWaveform",
    "SineWaveform",
    "MultiToneWaveform",
    "SampledWaveform",
    "FieldWaveform",
    "NoiseProcessParams",
    "noise_params_from_config",
    "derive_seed",
    "simulate_spin_noise",
    "simulate_shot_noise",
    "synthesize_polarimeter_output",
    "integrate_bloch",
]

# ---------------------------------------------------------------------------
# Waveforms (field offsets in tesla, or pump rates in 1/s — units by context)


@dataclass(frozen=True)
class ConstantWaveform:
    offset: float = 0.0

    def sample(self, times: np.ndarray) -> np.ndarray:
        return np.full(np.shape(times), self.offset, dtype=np.float64)


@dataclass(frozen=True)
class SineWaveform:
    """Single tone of given rms amplitude: sqrt(2)*rms*cos(2 pi f t + phase)."""

    frequency_hz: float
    rms_amplitude: float
    phase_rad: float = 0.0

    def __post_init__(self):
        if self.frequency_hz <= 0:
            raise ParameterError("tone frequency must be positive")
        if self.rms_amplitude < 0:
            raise ParameterError("tone amplitude must be non-negative")

    def sample(self, times: np.ndarray) -> np.ndarray:
        amp = math.sqrt(2.0) * self.rms_amplitude
        return amp * np.cos(2.0 * np.pi * self.frequency_hz * np.asarray(times) + self.phase_rad)


@dataclass(frozen=True)
class MultiToneWaveform:
    tones: tuple
    offset: float = 0.0

    def __post_init__(self):
        tones = tuple(self.tones)
        if not all(isinstance(t, SineWaveform) for t in tones):
            raise ParameterError("tones must be SineWaveform instances")
        object.__setattr__(self, "tones", tones)

    def sample(self, times: np.ndarray) -> np.ndarray:
        out = np.full(np.shape(times), self.offset, dtype=np.float64)
        for tone in self.tones:
            out += tone.sample(times)
        return out


@dataclass(frozen=True)
class SampledWaveform:
    """Values on a uniform grid starting at t=0, linearly interpolated."""

    values: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.shape[0] < 2:
            raise ParameterError("sampled waveform needs at least two points")
        if self.sample_rate_hz <= 0:
            raise ParameterError("waveform sample rate must be positive")

    def sample(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=np.float64)
        t_max = (self.values.shape[0] - 1) / self.sample_rate_hz
        if np.any(times < 0) or np.any(times > t_max * (1 + 1e-12)):
            raise ParameterError("requested times outside the sampled waveform span")
        grid = np.arange(self.values.shape[0]) / self.sample_rate_hz
        return np.interp(times, grid, self.values)


FieldWaveform = Union[ConstantWaveform, SineWaveform, MultiToneWaveform, SampledWaveform]

# ---------------------------------------------------------------------------
# Random streams


def derive_seed(master_seed: int, label: str) -> np.random.SeedSequence:
    """Independent, reproducible child seed for a named noise source."""
    return np.random.SeedSequence([int(master_seed), zlib.crc32(label.encode("utf-8"))])


def _generator(master_seed: int, label: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, label)))


# ---------------------------------------------------------------------------
# Spin noise


@dataclass(frozen=True)
class NoiseProcessParams:
    """Spectral parameters of the precessing collective-spin fluctuation.

    Two independent complex Ornstein-Uhlenbeck processes, one per hyperfine
    manifold, precessing in opposite senses at ``center_frequency_hz`` with a
    shared correlation time; each contributes a Lorentzian line of half-width
    1/(2 pi tau) and the given rms rotation angle.
    """

    center_frequency_hz: float
    correlation_time_s: float
    rms_a_rad: float
    rms_b_rad: float

    def __post_init__(self):
        if self.center_frequency_hz <= 0:
            raise ParameterError("center frequency must be positive")
        if self.correlation_time_s <= 0:
            raise ParameterError("correlation time must be positive")
        if self.rms_a_rad < 0 or self.rms_b_rad < 0:
            raise ParameterError("rms rotation amplitudes must be non-negative")

    @property
    def total_rms_rad(self) -> float:
        return math.hypot(self.rms_a_rad, self.rms_b_rad)

    @property
    def half_width_hz(self) -> float:
        return 1.0 / (2.0 * math.pi * self.correlation_time_s)


def noise_params_from_config(cfg: ExperimentConfig) -> NoiseProcessParams:
    """Rotation-noise process parameters implied by the configured physics."""
    n_eff = effective_atom_number(cfg.cell, cfg.probe.beam)
    if n_eff > 0:
        c_a, c_b = rotation_coefficients(cfg.species, cfg.cell, cfg.probe)
        sig_a = rms_spin_fluctuation(cfg.species.f_a, cfg.species.nuclear_spin, n_eff)
        sig_b = rms_spin_fluctuation(cfg.species.f_b, cfg.species.nuclear_spin, n_eff)
        rms_a, rms_b = abs(c_a) * sig_a, abs(c_b) * sig_b
    else:
        rms_a = rms_b = 0.0
    return NoiseProcessParams(
        center_frequency_hz=larmor_frequency(cfg.species, cfg.magnetometer.b_z_t),
        correlation_time_s=cfg.magnetometer.t2_s,
        rms_a_rad=rms_a,
        rms_b_rad=rms_b,
    )


def _num_samples(duration_s: float, fs: float) -> int:
    if duration_s <= 0 or fs <= 0:
        raise ParameterError("duration and sample rate must be positive")
    n = int(round(duration_s * fs))
    if n < 2:
        raise ParameterError("duration x sample rate must be at least 2 samples")
    return n


def _stationary_complex_ou(n: int, alpha: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance stationary complex OU samples via the exact update.

    z[k+1] = alpha z[k] + sqrt(1 - alpha^2) xi[k], xi standard complex normal,
    with z[0] drawn from the stationary distribution.
    """
    re = rng.standard_normal(n)
    im = rng.standard_normal(n)
    xi = math.sqrt(0.5) * (re + 1j * im)
    del re, im
    xi[1:] *= math.sqrt(1.0 - alpha * alpha)
    return ar1_complex(xi, alpha, 0.0 + 0.0j)


def simulate_spin_noise(
    params: NoiseProcessParams,
    duration_s: float,
    sample_rate_hz: float,
    seed: int,
    frame: str = "carrier",
) -> TimeSeries:
    """Precessing spin-fluctuation rotation noise.

    In the carrier frame returns the real angle
    phi(t) = sqrt(2) rms_a Re[z_a e^{+i w0 t}] + sqrt(2) rms_b Re[z_b e^{-i w0 t}],
    whose expected rms is the quadrature sum of the two manifold amplitudes and
    whose one-sided PSD is a Lorentzian at f0 with half-width 1/(2 pi tau).
    In the baseband frame returns the complex envelope
    w(t) = sqrt(2) (rms_a z_a + rms_b conj(z_b)) at the given (reduced) rate.
    """
    fs = sample_rate_hz
    n = _num_samples(duration_s, fs)
    if frame == "carrier" and fs < 8.0 * params.center_frequency_hz:
        raise ParameterError(
            f"carrier frame needs fs >= 8 f0 = {8.0 * params.center_frequency_hz:.6g} Hz, got {fs:.6g}"
        )
    if frame not in ("carrier", "baseband"):
        raise ParameterError(f"unknown frame {frame!r}")

    alpha = math.exp(-1.0 / (fs * params.correlation_time_s))
    root2 = math.sqrt(2.0)
    if frame == "baseband":
        out = np.zeros(n, dtype=np.complex128)
        if params.rms_a_rad > 0:
            out += (root2 * params.rms_a_rad) * _stationary_complex_ou(n, alpha, _generator(seed, "spin_a"))
        if params.rms_b_rad > 0:
            out += (root2 * params.rms_b_rad) * np.conj(
                _stationary_complex_ou(n, alpha, _generator(seed, "spin_b"))
            )
        return TimeSeries(out, fs, unit="rad", label="spin_noise")

    theta = (2.0 * np.pi * params.center_frequency_hz / fs) * np.arange(n)
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)
    del theta
    out = np.zeros(n, dtype=np.float64)
    if params.rms_a_rad > 0:
        z = _stationary_complex_ou(n, alpha, _generator(seed, "spin_a"))
        # Re[z e^{+i theta}] = Re(z) cos - Im(z) sin
        out += (root2 * params.rms_a_rad) * (z.real * cos_t - z.imag * sin_t)
        del z
    if params.rms_b_rad > 0:
        z = _stationary_complex_ou(n, alpha, _generator(seed, "spin_b"))
        # opposite precession sense: Re[z e^{-i theta}] = Re(z) cos + Im(z) sin
        out += (root2 * params.rms_b_rad) * (z.real * cos_t + z.imag * sin_t)
        del z
    return TimeSeries(out, fs, unit="rad", label="spin_noise")


def simulate_shot_noise(
    probe: ProbeConfig,
    duration_s: float,
    sample_rate_hz: float,
    seed: int,
    frame: str = "carrier",
) -> TimeSeries:
    """Photon shot noise of the polarimeter angle.

    White Gaussian rotation noise with one-sided ASD sqrt(1/(2 Phi eta))
    rad/rtHz, i.e. per-sample sigma = sqrt(fs/(4 Phi eta)) in the carrier
    frame; in the baseband frame, complex white noise whose real projection
    has the same one-sided density.
    """
    fs = sample_rate_hz
    n = _num_samples(duration_s, fs)
    rng = _generator(seed, "shot")
    flux_term = 2.0 * probe.photon_flux_per_s * probe.quantum_efficiency
    if frame == "carrier":
        sigma = math.sqrt(fs / (2.0 * flux_term))
        data = sigma * rng.standard_normal(n)
    elif frame == "baseband":
        sigma_part = math.sqrt(fs / flux_term)
        data = sigma_part * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    else:
        raise ParameterError(f"unknown frame {frame!r}")
    return TimeSeries(data, fs, unit="rad", label="shot_noise")


# ---------------------------------------------------------------------------
# Full polarimeter model


def _carrier_phase_deviation(
    delta_b: np.ndarray, fs: float, t2_s: float, gamma_hz_per_t: float
) -> np.ndarray:
    """Slow phase of the driven precession in response to field deviations.

    The driven spin phase follows d psi/dt = -psi/T2 + 2 pi gamma dB(t): field
    changes advance the precession phase, and the synchronous drive pulls it
    back with the coherence time.  Discretized exactly for a sample-and-hold
    field:  psi[k+1] = a psi[k] + (1-a) T2 (2 pi gamma dB[k]), a = e^{-dt/T2}.
    The DC limit psi = 2 pi gamma T2 dB and the high-frequency roll-off
    together give the square-root-Lorentzian response of the demodulated
    output vs. modulation frequency.
    """
    alpha = math.exp(-1.0 / (fs * t2_s))
    drive = (2.0 * math.pi * gamma_hz_per_t * t2_s) * delta_b
    x = (1.0 - alpha) * drive
    psi0 = drive[0] if drive.shape[0] else 0.0
    return ar1_real(x, alpha, psi0)


def synthesize_polarimeter_output(
    cfg: ExperimentConfig,
    field: Optional[FieldWaveform] = None,
    duration_s: Optional[float] = None,
    sample_rate_hz: Optional[float] = None,
    seed: Optional[int] = None,
    frame: Optional[str] = None,
    include_noise: bool = True,
) -> TimeSeries:
    """Synthetic digitized polarimeter angle: carrier + spin noise + shot noise.

    The optically driven precession appears as S0*P*sin(2 pi f_L t + psi(t)),
    where f_L is the spin precession frequency of the static field and psi
    tracks deviations delta B_z(t) from the ``field`` waveform (see
    :func:`_carrier_phase_deviation`); spin and shot noise add on top.  The
    baseband frame returns the complex envelope of the same signal at the
    reduced rate.
    """
    sim = cfg.simulation
    frame = frame or sim.frame
    if frame not in ("carrier", "baseband"):
        raise ParameterError(f"unknown frame {frame!r}")
    duration = sim.duration_s if duration_s is None else duration_s
    if sample_rate_hz is not None:
        fs = sample_rate_hz
    else:
        fs = sim.sample_rate_hz if frame == "carrier" else sim.baseband_rate_hz
    master_seed = sim.seed if seed is None else seed

    n = _num_samples(duration, fs)
    if n > sim.max_samples:
        raise ParameterError(
            f"{n} samples exceeds the memory cap ({sim.max_samples:.3g}); "
            "reduce duration or rate, or raise simulation.max_samples"
        )
    f_l = larmor_frequency(cfg.species, cfg.magnetometer.b_z_t)
    if frame == "carrier" and fs < 8.0 * f_l:
        raise ParameterError(
            f"carrier frame needs fs >= 8 f_L = {8.0 * f_l:.6g} Hz, got {fs:.6g}"
        )

    params = noise_params_from_config(cfg)
    amp = cfg.magnetometer.signal_amplitude_rad * cfg.magnetometer.polarization

    if frame == "carrier":
        out = np.zeros(n, dtype=np.float64)
    else:
        out = np.zeros(n, dtype=np.complex128)

    if amp > 0:
        times = np.arange(n) / fs
        delta_b = (field or ConstantWaveform(0.0)).sample(times)
        psi = _carrier_phase_deviation(
            delta_b, fs, cfg.magnetometer.t2_s, cfg.species.gyromagnetic_hz_per_t
        )
        del delta_b
        if frame == "carrier":
            out += amp * np.sin(2.0 * np.pi * f_l * times + psi)
        else:
            out += (-1j * amp) * np.exp(1j * psi)
        del times, psi

    if include_noise:
        if params.total_rms_rad > 0:
            out += simulate_spin_noise(params, duration, fs, master_seed, frame=frame).data
        out += simulate_shot_noise(cfg.probe, duration, fs, master_seed, frame=frame).data

    return TimeSeries(out, fs, unit="rad", label=f"polarimeter[{frame}]")


# ---------------------------------------------------------------------------
# Bloch-equation oracle


def integrate_bloch(
    cfg: ExperimentConfig,
    field: Optional[FieldWaveform],
    pump: Optional[FieldWaveform],
    duration_s: float,
    sample_rate_hz: float,
    p_init=(0.0, 0.0, 0.0),
    t1_s: Optional[float] = None,
    p_eq: float = 0.0,
):
    """Fixed-step RK4 integration of the driven Bloch equations.

    dP/dt = gamma (P x B) + pump(t) (x_hat - P) - [Px/T2, Py/T2, (Pz-p_eq)/T1]

    ``field`` is the deviation of B_z from the static value (tesla) and
    ``pump`` an optical pumping-rate waveform (1/s, e.g. modulated at the
    precession frequency for synchronous pumping).  Returns (P_x, P_y, P_z)
    time series sampled at ``sample_rate_hz``.  T1 defaults to T2.
    """
    fs = sample_rate_hz
    f_l = larmor_frequency(cfg.species, cfg.magnetometer.b_z_t)
    if fs < 16.0 * f_l:
        raise ParameterError(
            f"fixed-step integration needs fs >= 16 f_L = {16.0 * f_l:.6g} Hz, got {fs:.6g}"
        )
    n = _num_samples(duration_s, fs)
    if 3 * (2 * n + 1) > cfg.simulation.max_samples:
        raise ParameterError("integration grid exceeds the memory cap")
    t_half = np.arange(2 * n + 1) / (2.0 * fs)
    b = np.zeros((2 * n + 1, 3), dtype=np.float64)
    b[:, 2] = cfg.magnetometer.b_z_t + (field or ConstantWaveform(0.0)).sample(t_half)
    rates = (pump or ConstantWaveform(0.0)).sample(t_half)
    if np.any(rates < 0):
        raise ParameterError("pumping rate must be non-negative everywhere")
    gamma_rad = 2.0 * math.pi * cfg.species.gyromagnetic_hz_per_t
    t2 = cfg.magnetometer.t2_s
    t1 = t2 if t1_s is None else t1_s
    if t1 <= 0:
        raise ParameterError("T1 must be positive")
    traj = bloch_rk4(b, rates, 1.0 / fs, gamma_rad, t1, t2, p_eq, np.asarray(p_init, dtype=np.float64))
    return tuple(
        TimeSeries(traj[:, k], fs, unit="", label=lab)
        for k, lab in enumerate(("P_x", "P_y", "P_z"))
    )
