"""Model fitting and magnetometer metrology.

Lorentzian-plus-floor spectral fits, response-curve measurement against the
square-root-Lorentzian model, the quantum-limited rotation-noise density
model, sensitivity spectra and bandwidth extraction (measured and closed
form).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import CellConfig, ExperimentConfig, MagnetometerConfig, ProbeConfig
from .dsp import Spectrum, integrate_band, lock_in_demodulate, lockin_gain, welch_psd
from .errors import AnalysisError, ParameterError
from .physics import larmor_frequency, optical_density_on_resonance
from .species import AtomSpecies
from .synthesis import SineWaveform, derive_seed, synthesize_polarimeter_output

__all__ = [
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
    "default_calibration_frequencies",
]


# ---------------------------------------------------------------------------
# Lorentzian + floor fit


@dataclass
class LorentzianFitResult:
    peak_power: float  # density above the floor at line center
    center_hz: float
    hwhm_hz: float
    floor: float
    residual_norm: float  # rms residual density
    covariance: np.ndarray  # 4x4, parameter order (peak, center, hwhm, floor)
    converged: bool
    iterations: int

    @property
    def peak_floor_ratio(self) -> float:
        return self.peak_power / self.floor if self.floor > 0 else math.inf

    def to_dict(self) -> dict:
        return {
            "peak_power_density": self.peak_power,
            "center_hz": self.center_hz,
            "hwhm_hz": self.hwhm_hz,
            "floor_density": self.floor,
            "peak_floor_ratio": self.peak_floor_ratio if math.isfinite(self.peak_floor_ratio) else None,
            "residual_norm": self.residual_norm,
            "covariance": [[float(v) for v in row] for row in self.covariance],
            "converged": self.converged,
            "iterations": self.iterations,
        }


def _lorentz_model_jac(f, p, fix_center):
    if fix_center is None:
        amp, f0, w, c = p
    else:
        amp, w, c = p
        f0 = fix_center
    u = (f - f0) / w
    denom = 1.0 + u * u
    model = amp / denom + c
    d_amp = 1.0 / denom
    d_w = amp * 2.0 * u * u / (w * denom * denom)
    d_c = np.ones_like(f)
    if fix_center is None:
        d_f0 = amp * 2.0 * u / (w * denom * denom)
        jac = np.column_stack([d_amp, d_f0, d_w, d_c])
    else:
        jac = np.column_stack([d_amp, d_w, d_c])
    return model, jac


def _initial_guess(f, y):
    floor = float(np.median(y))
    k_pk = int(np.argmax(y))
    amp = float(y[k_pk] - floor)
    if not np.isfinite(amp) or amp <= 0 or np.ptp(y) == 0:
        raise AnalysisError("spectrum has no peak above the floor to fit")
    half = floor + amp / 2.0
    k_lo = k_pk
    while k_lo > 0 and y[k_lo] > half:
        k_lo -= 1
    k_hi = k_pk
    while k_hi < len(y) - 1 and y[k_hi] > half:
        k_hi += 1
    w = (f[k_hi] - f[k_lo]) / 2.0
    if w <= 0:
        w = (f[-1] - f[0]) / 10.0
    return amp, float(f[k_pk]), w, floor


def fit_lorentzian_floor(
    sp: Spectrum,
    init=None,
    weights=None,
    fix_center: Optional[float] = None,
    max_iterations: int = 200,
    tol: float = 1e-8,
) -> LorentzianFitResult:
    """Least-squares fit of P(f) = A/(1 + ((f-f0)/w)^2) + floor.

    Damped Gauss-Newton iteration with analytic Jacobian; parameters are
    initialized from the data (floor = median, f0 = argmax, half-power width)
    unless ``init = (A, f0, w, floor)`` is given.  ``weights`` are optional
    per-point least-squares weights (e.g. 1/density^2).  ``fix_center`` pins
    f0 (useful for demodulated spectra centered at zero offset).  Convergence:
    relative parameter step below ``tol``; non-convergence is reported in the
    result, not raised.
    """
    if sp.kind != "power":
        raise ParameterError("fit expects a power-kind spectrum")
    f = sp.frequencies_hz
    y = sp.values
    if len(f) < 16:
        raise ParameterError("need at least 16 spectral points to fit")

    if init is not None:
        amp, f0, w, floor = (float(v) for v in init)
    else:
        amp, f0, w, floor = _initial_guess(f, y)
    if fix_center is not None:
        f0 = float(fix_center)
        p = np.array([amp, w, floor], dtype=np.float64)
    else:
        p = np.array([amp, f0, w, floor], dtype=np.float64)

    if weights is None:
        wgt = np.ones_like(y)
    else:
        wgt = np.asarray(weights, dtype=np.float64)
        if wgt.shape != y.shape or np.any(wgt < 0):
            raise ParameterError("weights must be non-negative and match the spectrum")
    sqrt_w = np.sqrt(wgt)

    def weighted_residual(params):
        model, jac = _lorentz_model_jac(f, params, fix_center)
        return (y - model) * sqrt_w, jac * sqrt_w[:, None]

    r, jac = weighted_residual(p)
    ssr = float(r @ r)
    lam = 1e-3
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        hess = jac.T @ jac
        grad = jac.T @ r
        step_ok = False
        for _ in range(60):
            damped = hess + lam * np.diag(np.diag(hess))
            try:
                delta = np.linalg.solve(damped, grad)
            except np.linalg.LinAlgError:
                delta = np.linalg.lstsq(damped, grad, rcond=None)[0]
            p_new = p + delta
            # keep width/amplitude physical during the search
            if p_new[-2] <= 0:
                p_new[-2] = abs(p_new[-2]) or p[-2] * 0.5
            r_new, jac_new = weighted_residual(p_new)
            ssr_new = float(r_new @ r_new)
            if np.isfinite(ssr_new) and ssr_new <= ssr:
                step_ok = True
                break
            lam *= 8.0
        if not step_ok:
            break
        rel_step = np.max(np.abs(delta) / np.maximum(np.abs(p_new), 1e-300))
        p, r, jac, ssr = p_new, r_new, jac_new, ssr_new
        lam = max(lam / 8.0, 1e-12)
        if rel_step < tol:
            converged = True
            break

    n_params = p.shape[0]
    dof = max(len(f) - n_params, 1)
    sigma_sq = ssr / dof
    hess = jac.T @ jac
    try:
        cov_small = sigma_sq * np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        cov_small = np.full((n_params, n_params), np.inf)

    if fix_center is None:
        amp, f0, w, floor = p
        cov = cov_small
    else:
        amp, w, floor = p
        f0 = fix_center
        cov = np.zeros((4, 4))
        idx = [0, 2, 3]
        for a, ia in enumerate(idx):
            for b, ib in enumerate(idx):
                cov[ia, ib] = cov_small[a, b]

    return LorentzianFitResult(
        peak_power=float(amp),
        center_hz=float(f0),
        hwhm_hz=float(abs(w)),
        floor=float(floor),
        residual_norm=float(np.sqrt(ssr / len(f))),
        covariance=cov,
        converged=converged,
        iterations=iterations,
    )


# ---------------------------------------------------------------------------
# Response


def response_model(f_hz, s0: float, t2_s: float):
    """Square-root-Lorentzian low-pass response S0 / sqrt(1 + (2 pi f T2)^2)."""
    if t2_s <= 0:
        raise ParameterError("T2 must be positive")
    x = 2.0 * np.pi * np.asarray(f_hz, dtype=np.float64) * t2_s
    out = s0 / np.sqrt(1.0 + x * x)
    return float(out) if out.ndim == 0 else out


@dataclass
class ResponseCurve:
    """Measured field-to-output transfer: responsivity (rad/T) vs frequency."""

    frequencies_hz: np.ndarray
    responsivity_rad_per_t: np.ndarray
    r0_rad_per_t: float  # fitted DC responsivity
    t2_s: float  # fitted coherence time
    s0_rad: Optional[float] = None  # carrier amplitude implied by the fit

    def __post_init__(self):
        f = np.asarray(self.frequencies_hz, dtype=np.float64)
        r = np.asarray(self.responsivity_rad_per_t, dtype=np.float64)
        if f.shape != r.shape or f.ndim != 1:
            raise ParameterError("frequency and responsivity arrays must match")
        if np.any(np.diff(f) <= 0):
            raise ParameterError("frequencies must be strictly increasing")
        if np.any(r <= 0):
            raise ParameterError("responsivities must be positive")
        if self.r0_rad_per_t <= 0:
            raise ParameterError("fitted DC responsivity must be positive")
        self.frequencies_hz = f
        self.responsivity_rad_per_t = r

    @classmethod
    def from_points(cls, frequencies_hz, responsivity_rad_per_t, s0_rad=None):
        """Build a curve from measured points via the closed-form model fit."""
        f = np.asarray(frequencies_hz, dtype=np.float64)
        r = np.asarray(responsivity_rad_per_t, dtype=np.float64)
        r0, t2 = _fit_response_points(f, r)
        return cls(f, r, r0_rad_per_t=r0, t2_s=t2, s0_rad=s0_rad)

    def model_at(self, f_hz):
        """Fitted model evaluated at arbitrary frequencies."""
        if self.t2_s > 0:
            return response_model(f_hz, self.r0_rad_per_t, self.t2_s)
        out = np.full(np.shape(f_hz), self.r0_rad_per_t, dtype=np.float64)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {
            "frequencies_hz": [float(v) for v in self.frequencies_hz],
            "responsivity_rad_per_tesla": [float(v) for v in self.responsivity_rad_per_t],
            "fitted_dc_responsivity_rad_per_tesla": self.r0_rad_per_t,
            "fitted_t2_s": self.t2_s,
            "fitted_carrier_amplitude_rad": self.s0_rad,
        }


def _fit_response_points(freqs: np.ndarray, resp: np.ndarray):
    """Closed-form fit of R(f) = R0/sqrt(1+(2 pi f T2)^2).

    Linear regression of 1/R^2 against f^2: intercept 1/R0^2, slope
    (2 pi T2)^2 / R0^2.
    """
    y = 1.0 / resp**2
    design = np.column_stack([np.ones_like(freqs), freqs**2])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    a, b = coef
    if a <= 0:
        raise AnalysisError("response fit produced a non-positive DC level")
    r0 = 1.0 / math.sqrt(a)
    t2 = math.sqrt(max(b, 0.0) / a) / (2.0 * math.pi)
    return r0, t2


def _tone_rms_from_spectrum(sp: Spectrum, f_tone: float) -> float:
    """rms amplitude of a tone: band power around it minus the local floor."""
    enbw = sp.resolution_bandwidth_hz
    f = sp.frequencies_hz
    lo, hi = f_tone - 4.0 * enbw, f_tone + 4.0 * enbw
    if lo < f[0] or hi > f[-1]:
        raise ParameterError("tone too close to the edge of the spectrum grid")
    flank = []
    upper = (f >= f_tone + 6.0 * enbw) & (f <= f_tone + 20.0 * enbw)
    if np.any(upper):
        flank.append(sp.values[upper])
    lower = (f >= f_tone - 20.0 * enbw) & (f <= f_tone - 6.0 * enbw)
    if f_tone - 20.0 * enbw > f[0] and np.any(lower):
        flank.append(sp.values[lower])
    floor = float(np.median(np.concatenate(flank))) if flank else 0.0
    power = integrate_band(sp, lo, hi, floor=floor)
    return math.sqrt(max(power, 0.0))


def default_calibration_frequencies(t2_s: float) -> tuple:
    """Calibration tone placement {0.1, 0.5, 1, 2, 4} x 1/(2 pi T2)."""
    corner = 1.0 / (2.0 * math.pi * t2_s)
    return tuple(m * corner for m in (0.1, 0.5, 1.0, 2.0, 4.0))


def measure_response(
    cfg: ExperimentConfig,
    frequencies_hz=None,
    b_cal_rms_t: Optional[float] = None,
    tone_duration_s: Optional[float] = None,
    seed: Optional[int] = None,
    with_noise: bool = True,
    frame: str = "carrier",
) -> ResponseCurve:
    """Responsivity calibration: one field tone per frequency through the full chain.

    Each tone is synthesized, demodulated at the precession frequency (field
    information in the quadrature channel), and its rms amplitude read from
    the quadrature PSD; the low-pass droop of the demodulator is divided out
    so the curve reflects the atomic response alone.  Requires linear-regime
    amplitudes (peak phase excursion below 0.1 rad).
    """
    mag = cfg.magnetometer
    if mag.signal_amplitude_rad * mag.polarization <= 0:
        raise ParameterError("response measurement needs a polarized carrier (S0 * P > 0)")
    if frequencies_hz is None:
        frequencies_hz = cfg.calibration.frequencies_hz or default_calibration_frequencies(mag.t2_s)
    freqs = np.asarray(sorted(float(f) for f in frequencies_hz), dtype=np.float64)
    if freqs.size == 0 or np.any(freqs <= 0):
        raise ParameterError("calibration frequencies must be positive")
    b_cal = cfg.calibration.tone_rms_t if b_cal_rms_t is None else b_cal_rms_t
    duration = cfg.calibration.tone_duration_s if tone_duration_s is None else tone_duration_s
    master_seed = cfg.simulation.seed if seed is None else seed

    gamma = cfg.species.gyromagnetic_hz_per_t
    phase_index = 2.0 * math.pi * gamma * (math.sqrt(2.0) * b_cal) * mag.t2_s
    if phase_index >= 0.1:
        raise ParameterError(
            f"calibration amplitude outside the linear regime (phase index {phase_index:.3g} rad)"
        )
    if duration < 20.0 / freqs[0]:
        raise ParameterError("tone duration must cover at least 20 periods of the lowest tone")

    f_l = larmor_frequency(cfg.species, mag.b_z_t)
    ana = cfg.analysis
    fs = cfg.simulation.sample_rate_hz if frame == "carrier" else cfg.simulation.baseband_rate_hz

    resp = np.empty_like(freqs)
    for i, f_tone in enumerate(freqs):
        tone_seed = int(derive_seed(master_seed, f"cal{i}").generate_state(1, np.uint64)[0])
        ts = synthesize_polarimeter_output(
            cfg,
            field=SineWaveform(f_tone, b_cal),
            duration_s=duration,
            sample_rate_hz=fs,
            seed=tone_seed,
            frame=frame,
            include_noise=with_noise,
        )
        lock = lock_in_demodulate(
            ts, f_l, math.pi / 2.0, cutoff_hz=ana.lockin_cutoff_hz, order=ana.lockin_order
        )
        _, quad = lock.settled()
        seg = min(65536, 1 << (len(quad).bit_length() - 1))
        sp = welch_psd(quad, seg, overlap=ana.overlap, window=ana.window)
        amp = _tone_rms_from_spectrum(sp, f_tone)
        gain = lockin_gain(f_tone, ana.lockin_cutoff_hz, ana.lockin_order, fs)
        if amp <= 0 or gain <= 0:
            raise AnalysisError(f"calibration tone at {f_tone:.3g} Hz not detected")
        resp[i] = amp / (b_cal * gain)

    r0, t2 = _fit_response_points(freqs, resp)
    s0 = r0 / (2.0 * math.pi * gamma * t2) if t2 > 0 else None
    return ResponseCurve(
        frequencies_hz=freqs,
        responsivity_rad_per_t=resp,
        r0_rad_per_t=r0,
        t2_s=t2,
        s0_rad=s0,
    )


# ---------------------------------------------------------------------------
# Quantum-limited noise model and sensitivity


def noise_model_asd(
    f_hz,
    probe: ProbeConfig,
    species: AtomSpecies,
    cell: CellConfig,
    mag: MagnetometerConfig,
    f0_hz: float,
):
    """Rotation-noise amplitude density: shot floor plus spin Lorentzian.

    (1/sqrt(2 Phi)) * sqrt(1/eta + N_ab Gpr T2 beta / (1 + [2 pi (f-f0) T2]^2))
    in rad/rtHz, where N_ab is the resonant optical density.
    """
    n_ab = optical_density_on_resonance(species, cell)
    t2 = mag.t2_s
    x = 2.0 * np.pi * (np.asarray(f_hz, dtype=np.float64) - f0_hz) * t2
    spin = n_ab * probe.pumping_rate_per_s * t2 * mag.beta / (1.0 + x * x)
    out = np.sqrt((1.0 / probe.quantum_efficiency + spin) / (2.0 * probe.photon_flux_per_s))
    return float(out) if out.ndim == 0 else out


def sensitivity_spectrum(noise: Spectrum, response: ResponseCurve) -> Spectrum:
    """Field-equivalent noise: rotation ASD divided by the response model."""
    amp = noise.to_amplitude()
    if amp.unit not in ("rad", ""):
        raise ParameterError(f"expected a rotation-noise spectrum, got unit {amp.unit!r}")
    r = response.model_at(amp.frequencies_hz)
    if np.any(r <= 0):
        raise AnalysisError("response model is non-positive on the noise grid")
    return Spectrum(
        amp.frequencies_hz,
        amp.values / r,
        kind="amplitude",
        unit="tesla",
        resolution_bandwidth_hz=amp.resolution_bandwidth_hz,
        segment_count=amp.segment_count,
    )


def demolition_sensitivity(
    flat_asd: float,
    response: ResponseCurve,
    frequencies_hz,
    resolution_bandwidth_hz: float = 0.0,
) -> Spectrum:
    """Sensitivity a correlation-destroying readout of equal on-peak noise would give.

    A flat rotation-noise density divided by the same response: the comparison
    curve whose divergence from the actual sensitivity above the line width is
    the benefit of noise correlations surviving the measurement.
    """
    if flat_asd <= 0:
        raise ParameterError("flat noise density must be positive")
    f = np.asarray(frequencies_hz, dtype=np.float64)
    r = response.model_at(f)
    return Spectrum(
        f,
        flat_asd / r,
        kind="amplitude",
        unit="tesla",
        resolution_bandwidth_hz=resolution_bandwidth_hz,
    )


def _moving_median(v: np.ndarray, width: int) -> np.ndarray:
    if width <= 1 or v.shape[0] < width:
        return v
    half = width // 2
    out = v.copy()
    windows = np.lib.stride_tricks.sliding_window_view(v, width)
    out[half : half + windows.shape[0]] = np.median(windows, axis=1)
    return out


def plateau_level(sens: Spectrum) -> float:
    """Low-frequency level: median over the lowest decade above 3x the RBW.

    The median makes the estimate robust to narrow interference spikes.
    """
    amp = sens.to_amplitude()
    f = amp.frequencies_hz
    rbw = amp.resolution_bandwidth_hz
    if rbw <= 0:
        rbw = float(np.min(np.diff(f)))
    first_pos = f[f > 0]
    if first_pos.size == 0:
        raise ParameterError("spectrum grid has no positive frequencies")
    f_lo = max(3.0 * rbw, float(first_pos[0]))
    decade = (f >= f_lo) & (f <= 10.0 * f_lo)
    if np.count_nonzero(decade) < 4:
        raise AnalysisError("no resolvable low-frequency plateau decade")
    return float(np.median(amp.values[decade]))


def extract_bandwidth(sens: Spectrum, smooth_bins: int | None = None) -> float:
    """Frequency where the (smoothed) sensitivity has degraded by sqrt(2).

    The reference level is the plateau estimate of :func:`plateau_level`;
    the crossing is located by linear interpolation between grid points.
    Returns ``math.inf`` when the curve never crosses within the grid.

    Smoothing is a moving median, which leaves noise-free monotone curves
    untouched while suppressing single-bin excursions that would otherwise
    trigger the threshold early.  By default the window spans 2% of the
    grid; pass ``smooth_bins=1`` to disable smoothing.
    """
    amp = sens.to_amplitude()
    f = amp.frequencies_hz
    v = amp.values
    rbw = amp.resolution_bandwidth_hz
    if rbw <= 0:
        rbw = float(np.min(np.diff(f)))
    first_pos = f[f > 0]
    if first_pos.size == 0:
        raise ParameterError("sensitivity grid has no positive frequencies")
    f_lo = max(3.0 * rbw, float(first_pos[0]))
    plateau = plateau_level(sens)
    threshold = math.sqrt(2.0) * plateau

    if smooth_bins is None:
        smooth_bins = max(5, v.shape[0] // 50)
    if smooth_bins % 2 == 0:
        smooth_bins += 1
    smoothed = _moving_median(v, smooth_bins)
    start = int(np.argmax(f >= f_lo))
    above = smoothed > threshold
    for k in range(max(start, 1), f.shape[0]):
        if above[k] and not above[k - 1]:
            f1, f2 = f[k - 1], f[k]
            v1, v2 = smoothed[k - 1], smoothed[k]
            if v2 == v1:
                return float(f2)
            return float(f1 + (threshold - v1) * (f2 - f1) / (v2 - v1))
        if above[k] and k == start:
            return float(f[k])
    return math.inf


def qnd_bandwidth(eta: float, n_ab: float, gamma_pr: float, t2_s: float, beta: float) -> float:
    """Closed-form measurement bandwidth sqrt(eta N_ab Gpr T2 beta + 1)/(2 pi T2).

    Reduces to the response half-width 1/(2 pi T2) when the spin-noise term
    vanishes, and grows as the root of the on-resonance noise contrast.
    """
    if not 0 < eta <= 1:
        raise ParameterError("quantum efficiency must be in (0, 1]")
    if n_ab < 0 or gamma_pr < 0 or beta <= 0 or t2_s <= 0:
        raise ParameterError("bandwidth arguments must be positive (N_ab, Gpr >= 0)")
    return math.sqrt(eta * n_ab * gamma_pr * t2_s * beta + 1.0) / (2.0 * math.pi * t2_s)


# ---------------------------------------------------------------------------
# Report


@dataclass
class SensitivityReport:
    sensitivity: Spectrum  # tesla/rtHz vs frequency offset
    demolition: Spectrum
    dc_sensitivity_t: float
    measured_bandwidth_hz: float
    closed_form_bandwidth_hz: float
    demolition_bandwidth_hz: float
    demolition_closed_form_hz: float
    fit: Optional[LorentzianFitResult]
    response: ResponseCurve
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dc_sensitivity_t <= 0:
            raise ParameterError("DC sensitivity must be positive")
        if self.measured_bandwidth_hz <= 0:
            raise ParameterError("measured bandwidth must be positive")

    @property
    def enhancement(self) -> float:
        if math.isinf(self.measured_bandwidth_hz) or self.demolition_bandwidth_hz <= 0:
            return math.inf
        return self.measured_bandwidth_hz / self.demolition_bandwidth_hz

    def to_json_dict(self) -> dict:
        def _bw(value):
            return None if math.isinf(value) else value

        return {
            "dc_sensitivity_tesla_per_sqrt_hz": self.dc_sensitivity_t,
            "measured_bandwidth_hz": _bw(self.measured_bandwidth_hz),
            "measured_bandwidth_beyond_nyquist": math.isinf(self.measured_bandwidth_hz),
            "closed_form_bandwidth_hz": self.closed_form_bandwidth_hz,
            "demolition_bandwidth_hz": _bw(self.demolition_bandwidth_hz),
            "demolition_closed_form_bandwidth_hz": self.demolition_closed_form_hz,
            "bandwidth_enhancement": None if math.isinf(self.enhancement) else self.enhancement,
            "noise_fit": self.fit.to_dict() if self.fit is not None else None,
            "response": self.response.to_dict(),
            **self.meta,
        }
