"""Synthetic detector readouts under additive white Gaussian noise.

Every random draw comes from a generator keyed by (seed, stream, index), so any
trial can be regenerated on its own and parallel schedules give identical data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def trial_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Counter-style generator for one (seed, stream, index) triple."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream), int(index)])
    return np.random.Generator(np.random.Philox(ss))


def normal_block(seed: int, stream: int, indices, shape) -> np.ndarray:
    """Standard normals for each index, stacked: result shape (len(indices),) + shape."""
    shape = tuple(np.atleast_1d(shape))
    out = np.empty((len(indices),) + shape)
    for r, idx in enumerate(indices):
        out[r] = trial_rng(seed, stream, idx).standard_normal(shape)
    return out


@dataclass(frozen=True)
class NoiseSpec:
    """Noise standard deviation (response units) and master seed."""

    sigma0: float
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.sigma0) and self.sigma0 >= 0):
            raise ValueError("sigma0 must be finite and non-negative")


@dataclass
class SamplingPlan:
    """Per-side probe frequencies for a splitting scan.

    ``strategy`` is ``uniform``, ``max-slope`` or ``explicit``. ``design_shift`` is
    the nominal peak position the plan was laid out around.
    """

    strategy: str
    frequencies: np.ndarray
    side: str = "right"
    span: float | None = None
    design_shift: float | None = None
    window: float = 0.0

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, float)
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        if self.side == "right" and np.any(self.frequencies <= 0):
            raise ValueError("right-side plan frequencies must exceed the probe resonance")
        if self.side == "left" and np.any(self.frequencies >= 0):
            raise ValueError("left-side plan frequencies must be below the probe resonance")

    @property
    def n(self) -> int:
        return int(self.frequencies.size)

    @property
    def distinct(self) -> int:
        return int(np.unique(self.frequencies).size)


@dataclass
class ScanData:
    """One side of a frequency scan: probe detunings (MHz) and averaged readouts."""

    frequencies: np.ndarray
    voltages: np.ndarray
    n_avg: int = 1
    side: str = "right"
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, float)
        self.voltages = np.asarray(self.voltages, float)
        if self.frequencies.shape != self.voltages.shape or self.frequencies.ndim != 1:
            raise ValueError("frequencies and voltages must be equal-length vectors")
        if self.n_avg < 1:
            raise ValueError("n_avg must be >= 1")
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        if self.side == "right" and np.any(self.frequencies <= 0):
            raise ValueError("right-side scan must satisfy f > f_p,o")
        if self.side == "left" and np.any(self.frequencies >= 0):
            raise ValueError("left-side scan must satisfy f < f_p,o")

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# side={self.side}\n# n_avg={self.n_avg}\n# seed={self.seed}\n")
            fh.write("f,z\n")
            for f, z in zip(self.frequencies, self.voltages):
                fh.write(f"{float(f)!r},{float(z)!r}\n")

    @classmethod
    def from_csv(cls, path) -> "ScanData":
        meta = {}
        rows = []
        for line in Path(path).read_text().splitlines():
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k.strip()] = v.strip()
            elif line and not line.startswith("f,"):
                rows.append([float(t) for t in line.split(",")])
        d = np.array(rows, float).reshape(-1, 2)
        seed = None if meta.get("seed", "None") == "None" else int(meta["seed"])
        return cls(d[:, 0], d[:, 1], n_avg=int(meta.get("n_avg", 1)), side=meta.get("side", "right"), seed=seed)


# stream ids keep the different readout modes on disjoint random streams
STREAM_IDD = 1
STREAM_ISD = 2
STREAM_SCAN_RIGHT = 3
STREAM_SCAN_LEFT = 4


def sample_idd(curve, x: float, n_samples: int, noise: NoiseSpec, stream: int = STREAM_IDD,
               index: int = 0) -> np.ndarray:
    """N i.i.d. readouts F_I[x] + n0 at a fixed laser frequency."""
    y = float(curve(x))
    return y + noise.sigma0 * trial_rng(noise.seed, stream, index).standard_normal(int(n_samples))


def isd_waveform(level: float, slope: float, x: float, phase: float, n_periods: int, per_period: int) -> np.ndarray:
    """Noise-free beat waveform level + slope*x*cos(2 pi k / N2 + phase), k = 0..N-1."""
    if per_period < 4:
        raise ValueError("per_period must be >= 4")
    k = np.arange(int(n_periods) * int(per_period))
    return level + slope * x * np.cos(2 * np.pi * k / per_period + phase)


def sample_isd(curve, x_lo: float, x: float, phase: float, n_periods: int, per_period: int,
               noise: NoiseSpec, stream: int = STREAM_ISD, index: int = 0) -> np.ndarray:
    """Superheterodyne readout over ``n_periods`` beat periods of ``per_period`` samples.

    The small-signal regime x << x_lo is the caller's responsibility.
    """
    clean = isd_waveform(float(curve(x_lo)), float(curve.derivative(x_lo)), x, phase, n_periods, per_period)
    return clean + noise.sigma0 * trial_rng(noise.seed, stream, index).standard_normal(clean.size)


def _scan_means(source, frequencies, shift):
    f = np.asarray(frequencies, float)
    if hasattr(source, "center") and hasattr(source, "kind"):
        s = source.center if shift is None else shift
        return np.asarray(source(f - s), float)
    return np.asarray(source(f), float)


def scan_noise(n_avg: int, n_points: int, sigma0: float, seed: int, stream: int, index: int) -> np.ndarray:
    """Column averages of an (n_avg, n_points) matrix of N(0, sigma0^2) draws."""
    draws = trial_rng(seed, stream, index).standard_normal((int(n_avg), int(n_points)))
    return sigma0 * draws.mean(axis=0)


def scan_noise_block(n_avg: int, n_points: int, sigma0: float, seed: int, stream: int, indices) -> np.ndarray:
    """``scan_noise`` for each index, stacked into shape (len(indices), n_points)."""
    out = np.empty((len(indices), int(n_points)))
    for r, idx in enumerate(indices):
        out[r] = scan_noise(n_avg, n_points, sigma0, seed, stream, idx)
    return out


def sample_scan(source, frequencies, n_avg: int, noise: NoiseSpec, side: str = "right", shift: float | None = None,
                stream: int | None = None, index: int = 0) -> ScanData:
    """Averaged scan z_i ~ N(F_S[f_i], sigma0^2 / n_avg).

    Args:
        source: a curve F_S(f) or a PeakLineshape evaluated at f - shift.
        frequencies: probe detunings in MHz (or a SamplingPlan).
        n_avg: readouts averaged per frequency.
        shift: peak position for lineshape sources (defaults to the lineshape centre).
    """
    if isinstance(frequencies, SamplingPlan):
        side = frequencies.side
        frequencies = frequencies.frequencies
    if stream is None:
        stream = STREAM_SCAN_RIGHT if side == "right" else STREAM_SCAN_LEFT
    mean = _scan_means(source, frequencies, shift)
    z = mean + scan_noise(n_avg, mean.size, noise.sigma0, noise.seed, stream, index)
    return ScanData(np.asarray(frequencies, float), z, n_avg=int(n_avg), side=side, seed=noise.seed)
