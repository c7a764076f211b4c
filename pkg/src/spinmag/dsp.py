"""Lock-in demodulation and spectral estimation.

Conventions: one-sided densities throughout (power in unit^2/Hz, amplitude in
unit/rtHz); Welch averaging with Hann window and 50% overlap by default, with
the window's equivalent noise bandwidth reported as the resolution bandwidth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ParameterError
from .kernels import onepole_cascade_complex, onepole_cascade_real
from .series import TimeSeries, _read_comment_header, _skip_rows

__all__ = [
    "Spectrum",
    "LockInOutput",
    "lock_in_demodulate",
    "lockin_gain",
    "welch_psd",
    "integrate_band",
]

_MAGIC = "spinmag-spectrum"

# Periodic (DFT-even) windows, the standard choice for spectral averaging:
# an N-point periodic window is the first N samples of the (N+1)-point
# symmetric one.
_WINDOWS = {
    "hann": lambda n: np.hanning(n + 1)[:n],
    "hamming": lambda n: np.hamming(n + 1)[:n],
    "rectangular": np.ones,
}


@dataclass
class Spectrum:
    """One-sided spectral density on an increasing frequency grid."""

    frequencies_hz: np.ndarray
    values: np.ndarray
    kind: str  # "power" | "amplitude"
    unit: str = ""  # base unit of the underlying series (e.g. "rad")
    resolution_bandwidth_hz: float = 0.0
    segment_count: int = 0

    def __post_init__(self):
        f = np.ascontiguousarray(self.frequencies_hz, dtype=np.float64)
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if f.ndim != 1 or f.shape != v.shape:
            raise ParameterError("frequency and value arrays must be 1-D and equal length")
        if f.shape[0] < 2 or np.any(np.diff(f) <= 0) or f[0] < 0:
            raise ParameterError("frequencies must be strictly increasing and non-negative")
        if self.kind not in ("power", "amplitude"):
            raise ParameterError(f"kind must be 'power' or 'amplitude', got {self.kind!r}")
        if self.kind == "power" and np.any(v < 0):
            raise ParameterError("power densities must be non-negative")
        self.frequencies_hz = f
        self.values = v

    @property
    def density_unit(self) -> str:
        base = self.unit or "1"
        return f"{base}^2/Hz" if self.kind == "power" else f"{base}/sqrt(Hz)"

    def to_amplitude(self) -> "Spectrum":
        if self.kind == "amplitude":
            return self
        return Spectrum(
            self.frequencies_hz,
            np.sqrt(self.values),
            "amplitude",
            self.unit,
            self.resolution_bandwidth_hz,
            self.segment_count,
        )

    def to_power(self) -> "Spectrum":
        if self.kind == "power":
            return self
        return Spectrum(
            self.frequencies_hz,
            self.values**2,
            "power",
            self.unit,
            self.resolution_bandwidth_hz,
            self.segment_count,
        )

    def band(self, f_lo: float, f_hi: float) -> "Spectrum":
        """Sub-spectrum restricted to grid points inside [f_lo, f_hi]."""
        mask = (self.frequencies_hz >= f_lo) & (self.frequencies_hz <= f_hi)
        if mask.sum() < 2:
            raise ParameterError("band contains fewer than two grid points")
        return Spectrum(
            self.frequencies_hz[mask],
            self.values[mask],
            self.kind,
            self.unit,
            self.resolution_bandwidth_hz,
            self.segment_count,
        )

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# {_MAGIC}\n")
            fh.write(f"# kind: {self.kind}\n")
            fh.write(f"# unit: {self.density_unit}\n")
            fh.write(f"# base_unit: {self.unit}\n")
            fh.write(f"# resolution_bandwidth_hz: {self.resolution_bandwidth_hz!r}\n")
            fh.write(f"# segment_count: {self.segment_count}\n")
            fh.write("frequency_hz,density\n")
            np.savetxt(fh, np.column_stack([self.frequencies_hz, self.values]), fmt="%.17g", delimiter=",")

    @classmethod
    def from_csv(cls, path) -> "Spectrum":
        path = Path(path)
        meta = _read_comment_header(path, _MAGIC)
        raw = np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#", skiprows=_skip_rows(path)))
        if raw.shape[1] != 2:
            raise ParameterError(f"{path.name}: expected 2 columns")
        return cls(
            raw[:, 0],
            raw[:, 1],
            kind=meta.get("kind", "power"),
            unit=meta.get("base_unit", ""),
            resolution_bandwidth_hz=float(meta.get("resolution_bandwidth_hz", 0.0)),
            segment_count=int(meta.get("segment_count", 0)),
        )


# ---------------------------------------------------------------------------
# Lock-in


@dataclass
class LockInOutput:
    in_phase: TimeSeries
    quadrature: TimeSeries
    reference_frequency_hz: float
    reference_phase_rad: float
    lowpass_cutoff_hz: float
    lowpass_order: int

    def __post_init__(self):
        if len(self.in_phase) != len(self.quadrature) or (
            self.in_phase.sample_rate_hz != self.quadrature.sample_rate_hz
        ):
            raise ParameterError("lock-in channels must share rate and length")
        if self.lowpass_cutoff_hz >= self.reference_frequency_hz:
            raise ParameterError("lock-in cutoff must be below the reference frequency")

    @property
    def settle_samples(self) -> int:
        """Samples to discard before statistics: 10 lowpass time scales."""
        return int(math.ceil(10.0 / self.lowpass_cutoff_hz * self.in_phase.sample_rate_hz))

    def settled(self):
        """(in_phase, quadrature) series with the settling transient removed."""
        skip = self.settle_samples
        if skip >= len(self.in_phase):
            raise ParameterError("series shorter than the lock-in settling time")
        return self.in_phase.sliced(skip), self.quadrature.sliced(skip)


def _stage_coefficient(cutoff_hz: float, order: int, fs: float) -> float:
    """Pole of each stage so the cascade's analog -3 dB point is ``cutoff_hz``."""
    stage_cutoff = cutoff_hz / math.sqrt(2.0 ** (1.0 / order) - 1.0)
    return math.exp(-2.0 * math.pi * stage_cutoff / fs)


def lockin_gain(f_hz, cutoff_hz: float, order: int, fs: float):
    """Exact magnitude response of the demodulator's low-pass cascade.

    Evaluated from the discrete transfer function of the implemented
    recursion, |(1-a) / (1 - a e^{-i 2 pi f/fs})|^order, so measured tone
    amplitudes and noise densities can be referred to the mixer output.
    """
    a = _stage_coefficient(cutoff_hz, order, fs)
    z = np.exp(-2j * np.pi * np.asarray(f_hz, dtype=np.float64) / fs)
    gain = np.abs((1.0 - a) / (1.0 - a * z)) ** order
    return float(gain) if gain.ndim == 0 else gain


def lock_in_demodulate(
    ts: TimeSeries,
    reference_frequency_hz: float,
    reference_phase_rad: float = 0.0,
    cutoff_hz: float = 8e3,
    order: int = 4,
) -> LockInOutput:
    """Dual-phase demodulation at a reference frequency.

    Real input x(t) is mixed with 2 cos(2 pi f_r t + theta) and
    2 sin(2 pi f_r t + theta) and each product is low-passed by ``order``
    cascaded one-pole stages with combined -3 dB frequency ``cutoff_hz``;
    a tone A cos(2 pi f_r t + theta) settles to (A, 0).  Complex-envelope
    input w (signal = Re[w e^{i 2 pi f_r t}]) is transformed algebraically:
    I + iQ = conj(w) e^{i theta}, then low-passed the same way.
    """
    fs = ts.sample_rate_hz
    if order < 1:
        raise ParameterError("lock-in order must be >= 1")
    if cutoff_hz <= 0 or cutoff_hz >= reference_frequency_hz:
        raise ParameterError("need 0 < cutoff < reference frequency")
    a = _stage_coefficient(cutoff_hz, order, fs)

    if ts.is_complex:
        if cutoff_hz >= fs / 2:
            raise ParameterError("cutoff must be below Nyquist")
        u = np.conj(ts.data) * complex(math.cos(reference_phase_rad), math.sin(reference_phase_rad))
        u = onepole_cascade_complex(u, a, order)
        i_data, q_data = u.real.copy(), u.imag.copy()
    else:
        if reference_frequency_hz >= fs / 2:
            raise ParameterError("reference frequency must be below Nyquist")
        angle = (2.0 * np.pi * reference_frequency_hz / fs) * np.arange(len(ts)) + reference_phase_rad
        i_data = onepole_cascade_real(2.0 * ts.data * np.cos(angle), a, order)
        q_data = onepole_cascade_real(2.0 * ts.data * np.sin(angle), a, order)
        del angle

    mk = lambda d, lab: TimeSeries(
        d, fs, start_time_s=ts.start_time_s, unit=ts.unit, label=f"{ts.label}:{lab}"
    )
    return LockInOutput(
        in_phase=mk(i_data, "I"),
        quadrature=mk(q_data, "Q"),
        reference_frequency_hz=reference_frequency_hz,
        reference_phase_rad=reference_phase_rad,
        lowpass_cutoff_hz=cutoff_hz,
        lowpass_order=order,
    )


# ---------------------------------------------------------------------------
# Welch PSD


def welch_psd(
    ts: TimeSeries,
    segment_length: int,
    overlap: float = 0.5,
    window: str = "hann",
    center_frequency_hz: Optional[float] = None,
) -> Spectrum:
    """Averaged-periodogram one-sided power spectral density.

    Windowed segments with the given overlap are transformed and averaged in
    a fixed order; normalization is by the window power (sum w^2), so white
    noise of variance sigma^2 gives a flat density 2 sigma^2/fs.  Complex
    envelope input yields the equivalent one-sided density of the underlying
    real signal on the absolute grid ``center_frequency_hz + [-fs/2, fs/2)``
    (``center_frequency_hz`` required, must exceed fs/2).
    """
    x = ts.data
    fs = ts.sample_rate_hz
    n = x.shape[0]
    if segment_length < 2 or segment_length & (segment_length - 1):
        raise ParameterError("segment length must be a power of two >= 2")
    if segment_length > n:
        raise ParameterError(f"segment length {segment_length} exceeds series length {n}")
    if not 0 <= overlap < 1:
        raise ParameterError("overlap must be in [0, 1)")
    if window not in _WINDOWS:
        raise ParameterError(f"unsupported window {window!r} (hann | hamming | rectangular)")

    w = _WINDOWS[window](segment_length).astype(np.float64)
    u = float(np.sum(w * w))
    enbw = fs * u / float(np.sum(w)) ** 2
    step = max(1, int(round(segment_length * (1.0 - overlap))))
    starts = range(0, n - segment_length + 1, step)
    count = len(starts)

    if ts.is_complex:
        if center_frequency_hz is None:
            raise ParameterError("complex-envelope PSD needs center_frequency_hz")
        if center_frequency_hz < fs / 2:
            raise ParameterError("center frequency must be at least fs/2 for a one-sided grid")
        acc = np.zeros(segment_length, dtype=np.float64)
        for s in starts:
            seg = np.fft.fft(w * x[s : s + segment_length])
            acc += seg.real**2 + seg.imag**2
        acc *= 1.0 / (count * fs * u)
        # envelope density S_w maps to the real signal's one-sided S at
        # f0 + delta as S_w(delta)/2
        psd = 0.5 * np.fft.fftshift(acc)
        freqs = center_frequency_hz + np.fft.fftshift(np.fft.fftfreq(segment_length, d=1.0 / fs))
    else:
        n_freq = segment_length // 2 + 1
        acc = np.zeros(n_freq, dtype=np.float64)
        for s in starts:
            seg = np.fft.rfft(w * x[s : s + segment_length])
            acc += seg.real**2 + seg.imag**2
        acc *= 2.0 / (count * fs * u)
        acc[0] *= 0.5
        acc[-1] *= 0.5  # Nyquist bin is not doubled
        psd = acc
        freqs = np.arange(n_freq) * (fs / segment_length)

    return Spectrum(
        freqs,
        psd,
        kind="power",
        unit=ts.unit,
        resolution_bandwidth_hz=enbw,
        segment_count=count,
    )


def integrate_band(sp: Spectrum, f_lo: float, f_hi: float, floor: float = 0.0) -> float:
    """Trapezoidal band power of a power-kind spectrum, optional floor removal.

    Returns the variance contributed by [f_lo, f_hi]; endpoint densities are
    interpolated so the result is additive over adjacent bands.  ``floor`` is
    a constant density subtracted before integration (e.g. a fitted shot
    floor), giving the excess variance in the band.
    """
    if sp.kind != "power":
        raise ParameterError("band integration requires a power-kind spectrum")
    if f_lo > f_hi:
        raise ParameterError("band must have f_lo <= f_hi")
    f = sp.frequencies_hz
    if f_lo < f[0] or f_hi > f[-1]:
        raise ParameterError("band extends outside the spectrum grid")
    if f_lo == f_hi:
        return 0.0
    inner = (f > f_lo) & (f < f_hi)
    grid = np.concatenate([[f_lo], f[inner], [f_hi]])
    vals = np.concatenate(
        [
            [np.interp(f_lo, f, sp.values)],
            sp.values[inner],
            [np.interp(f_hi, f, sp.values)],
        ]
    )
    return float(np.trapezoid(vals - floor, grid))
