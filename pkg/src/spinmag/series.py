"""Sampled-time-series value type and its CSV form.

A :class:`TimeSeries` is an immutable-ish record of uniformly sampled data
(float64 or complex128) with its rate and a unit tag.  CSV export writes two
columns (time_s, value) for real data and three (time_s, real, imag) for
complex envelopes, with ``# key: value`` comment headers carrying the
metadata needed to round-trip.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError

_MAGIC = "spinmag-timeseries"


@dataclass
class TimeSeries:
    data: np.ndarray
    sample_rate_hz: float
    start_time_s: float = 0.0
    unit: str = ""
    label: str = ""

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.dtype.kind == "c":
            data = np.ascontiguousarray(data, dtype=np.complex128)
        else:
            data = np.ascontiguousarray(data, dtype=np.float64)
        if data.ndim != 1:
            raise ParameterError("time series data must be one-dimensional")
        if self.sample_rate_hz <= 0:
            raise ParameterError("sample rate must be positive")
        self.data = data

    def __len__(self):
        return self.data.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    @property
    def is_complex(self) -> bool:
        return self.data.dtype.kind == "c"

    def times(self) -> np.ndarray:
        return self.start_time_s + np.arange(len(self)) / self.sample_rate_hz

    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.abs(self.data) ** 2)))

    def sliced(self, start: int, stop=None) -> "TimeSeries":
        """View of samples [start:stop) with the start time advanced."""
        return TimeSeries(
            self.data[start:stop],
            self.sample_rate_hz,
            start_time_s=self.start_time_s + start / self.sample_rate_hz,
            unit=self.unit,
            label=self.label,
        )

    def to_csv(self, path) -> None:
        path = Path(path)
        t = self.times()
        if self.is_complex:
            cols = np.column_stack([t, self.data.real, self.data.imag])
            names = "time_s,real,imag"
        else:
            cols = np.column_stack([t, self.data])
            names = "time_s,value"
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# {_MAGIC}\n")
            fh.write(f"# unit: {self.unit}\n")
            fh.write(f"# label: {self.label}\n")
            fh.write(f"# sample_rate_hz: {self.sample_rate_hz!r}\n")
            fh.write(f"# start_time_s: {self.start_time_s!r}\n")
            fh.write(names + "\n")
            np.savetxt(fh, cols, fmt="%.17g", delimiter=",")

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        path = Path(path)
        meta = _read_comment_header(path, _MAGIC)
        raw = np.loadtxt(path, delimiter=",", comments="#", skiprows=_skip_rows(path))
        raw = np.atleast_2d(raw)
        if raw.shape[1] == 3:
            data = raw[:, 1] + 1j * raw[:, 2]
        elif raw.shape[1] == 2:
            data = raw[:, 1]
        else:
            raise ParameterError(f"{path.name}: expected 2 or 3 columns")
        return cls(
            data,
            sample_rate_hz=float(meta["sample_rate_hz"]),
            start_time_s=float(meta.get("start_time_s", 0.0)),
            unit=meta.get("unit", ""),
            label=meta.get("label", ""),
        )


def _read_comment_header(path: Path, magic: str) -> dict:
    """Parse leading ``# key: value`` lines; require the magic tag first."""
    meta = {}
    with path.open("r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# {magic}":
            raise ParameterError(f"{path.name}: not a {magic} file")
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if ":" in body:
                key, _, value = body.partition(":")
                meta[key.strip()] = value.strip()
    return meta


def _skip_rows(path: Path) -> int:
    """Number of leading comment lines plus the column-name row."""
    count = 0
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            count += 1
            if not line.startswith("#"):
                break
    return count
