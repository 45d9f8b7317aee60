"""Complex-baseband signal containers and measurement utilities.

Everything downstream exchanges :class:`SignalBuffer` objects: a uniformly
sampled complex trace tagged with its sample rate and the probe point it was
taken from. Buffers are treated as immutable once produced; all operations
here are pure functions and safe to evaluate in parallel across trials.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sps


@dataclass(frozen=True)
class SignalBuffer:
    """Uniformly sampled complex baseband trace.

    Attributes:
        samples: complex amplitude samples (unitless).
        sample_rate: sampling rate in Hz, > 0.
        origin_tag: probe-point label ("tx", "channel", "I".."V", "a".."c", ...).
    """

    samples: np.ndarray
    sample_rate: float
    origin_tag: str = ""

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        arr = np.asarray(self.samples)
        if arr.dtype not in (np.complex64, np.complex128):
            arr = arr.astype(np.complex128)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        """Trace duration in seconds."""
        return len(self.samples) / self.sample_rate

    def time_axis(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.sample_rate

    def with_samples(self, samples: np.ndarray, origin_tag: str | None = None) -> "SignalBuffer":
        """New buffer at the same rate (convenience for chain stages)."""
        return SignalBuffer(samples, self.sample_rate, self.origin_tag if origin_tag is None else origin_tag)


@dataclass(frozen=True)
class SpectrumEstimate:
    """Averaged-periodogram PSD estimate.

    ``psd_db`` is the density in dB (10*log10 of power per Hz) so that
    integrating the linear density over frequency recovers the signal power.
    """

    frequencies: np.ndarray
    psd_db: np.ndarray
    resolution_bw: float

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        p = np.asarray(self.psd_db, dtype=float)
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(p)):
            raise ValueError("psd must be finite at every bin")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "psd_db", p)

    def linear_density(self) -> np.ndarray:
        return 10.0 ** (self.psd_db / 10.0)

    def integrated_power(self) -> float:
        df = self.frequencies[1] - self.frequencies[0]
        return float(np.sum(self.linear_density()) * df)


_PSD_FLOOR = 1e-300  # keeps log10 finite for empty bins


def measure_power(buf: SignalBuffer, band: tuple[float, float] | None = None) -> float:
    """Mean squared magnitude of a buffer, optionally restricted to a band.

    When ``band=(lo, hi)`` is given, power is integrated over the periodogram
    bins whose absolute frequency falls in [lo, hi] (both spectral sides, so a
    band covering half the |f| range of white noise returns half its power).

    Raises:
        ValueError: empty buffer, or band outside [0, sample_rate/2].
    """
    x = buf.samples
    if len(x) == 0:
        raise ValueError("cannot measure power of an empty buffer")
    if band is None:
        return float(np.mean(np.abs(x) ** 2))
    lo, hi = band
    nyq = buf.sample_rate / 2.0
    if not (0.0 <= lo <= hi <= nyq * (1 + 1e-12)):
        raise ValueError(f"band {band} outside [0, {nyq}] Hz")
    spec = np.fft.fft(x)
    freqs = np.fft.fftfreq(len(x), d=1.0 / buf.sample_rate)
    mask = (np.abs(freqs) >= lo) & (np.abs(freqs) <= hi)
    return float(np.sum(np.abs(spec[mask]) ** 2) / len(x) ** 2)


def estimate_psd(buf: SignalBuffer, segment_len: int) -> SpectrumEstimate:
    """Averaged modified periodogram (Hann window, 50% overlap), density scaled.

    Raises:
        ValueError: segment longer than the buffer.
    """
    x = buf.samples
    if segment_len > len(x):
        raise ValueError(f"segment_len {segment_len} exceeds buffer length {len(x)}")
    freqs, pxx = sps.welch(
        x,
        fs=buf.sample_rate,
        window="hann",
        nperseg=segment_len,
        noverlap=segment_len // 2,
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    freqs = np.fft.fftshift(freqs)
    pxx = np.fft.fftshift(pxx)
    # Hann equivalent noise bandwidth is 1.5 bins.
    enbw = 1.5 * buf.sample_rate / segment_len
    return SpectrumEstimate(freqs, 10.0 * np.log10(np.maximum(pxx.real, _PSD_FLOOR)), enbw)


def _anti_alias_taps(rate_fast: float, ratio: int, passband_frac: float, atten_db: float) -> np.ndarray:
    """Linear-phase lowpass for integer-ratio conversion between rate_fast and
    rate_fast/ratio. Cut at the slow Nyquist; transition symmetric about it so
    everything that would alias onto the passband is attenuated. Length is
    rounded up to 2*K*ratio+1, making the group delay an integer number of
    slow-rate samples."""
    rate_slow = rate_fast / ratio
    width = rate_slow * (1.0 - passband_frac)
    beta = sps.kaiser_beta(atten_db)
    ntaps_min = int(np.ceil((atten_db - 8) / (2.285 * 2 * np.pi * width / rate_fast)))
    k = max(1, int(np.ceil((ntaps_min - 1) / (2 * ratio))))
    ntaps = 2 * k * ratio + 1
    taps = sps.firwin(ntaps, cutoff=rate_slow / 2.0, window=("kaiser", beta), fs=rate_fast)
    return taps


def resample(buf: SignalBuffer, target_rate: float, passband_frac: float = 0.75,
             atten_db: float = 75.0) -> SignalBuffer:
    """Integer-ratio rate conversion with anti-alias / image-reject filtering.

    Downward conversion decimates behind a lowpass; upward conversion
    zero-stuffs and interpolates with the same kernel. The kernel's group
    delay is compensated internally so sample 0 of the output aligns with
    sample 0 of the input, and duration is preserved to within one output
    sample period. ``passband_frac`` is the flat fraction of the slow-side
    Nyquist interval.

    Raises:
        ValueError: non-integer rate ratio.
    """
    rate_in = buf.sample_rate
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if abs(target_rate - rate_in) / rate_in < 1e-12:
        return SignalBuffer(buf.samples.copy(), rate_in, buf.origin_tag)
    x = buf.samples
    if target_rate < rate_in:
        ratio_f = rate_in / target_rate
        ratio = int(round(ratio_f))
        if abs(ratio_f - ratio) > 1e-9:
            raise ValueError(f"rate ratio {ratio_f} is not an integer")
        taps = _anti_alias_taps(rate_in, ratio, passband_frac, atten_db)
        k = (len(taps) - 1) // (2 * ratio)
        n_out = int(np.ceil(len(x) / ratio))
        xp = np.concatenate([x, np.zeros(len(taps), dtype=x.dtype)])
        y = sps.upfirdn(taps, xp, up=1, down=ratio)
        y = y[k:k + n_out]
    else:
        ratio_f = target_rate / rate_in
        ratio = int(round(ratio_f))
        if abs(ratio_f - ratio) > 1e-9:
            raise ValueError(f"rate ratio {ratio_f} is not an integer")
        taps = _anti_alias_taps(target_rate, ratio, passband_frac, atten_db) * ratio
        k = (len(taps) - 1) // (2 * ratio)
        n_out = len(x) * ratio
        xp = np.concatenate([x, np.zeros(2 * k + 1, dtype=x.dtype)])
        y = sps.upfirdn(taps, xp, up=ratio, down=1)
        y = y[k * ratio:k * ratio + n_out]
    return SignalBuffer(y, target_rate, buf.origin_tag)


@dataclass(frozen=True)
class AmplitudeHistogram:
    """Normalized amplitude densities of the real and imaginary rails."""

    bin_centers: np.ndarray
    real_density: np.ndarray
    imag_density: np.ndarray
    bin_width: float


def amplitude_histogram(buf: SignalBuffer, bins: int) -> AmplitudeHistogram:
    """Histogram of the real and imaginary parts on a shared grid, each
    normalized to integrate to 1.

    Raises:
        ValueError: empty buffer or fewer than 2 bins.
    """
    if len(buf) == 0:
        raise ValueError("cannot histogram an empty buffer")
    if bins < 2:
        raise ValueError("need at least 2 bins")
    re = buf.samples.real
    im = buf.samples.imag
    lo = min(re.min(), im.min())
    hi = max(re.max(), im.max())
    if hi - lo <= 0:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    rd, _ = np.histogram(re, bins=edges, density=True)
    id_, _ = np.histogram(im, bins=edges, density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return AmplitudeHistogram(centers, rd, id_, float(edges[1] - edges[0]))


def write_trace_csv(buf: SignalBuffer, path: str | Path) -> None:
    """Dump one probe trace as (t_seconds, re, im) rows."""
    path = Path(path)
    t = buf.time_axis()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_seconds", "re", "im"])
        for ti, s in zip(t, buf.samples):
            w.writerow([f"{ti:.12g}", f"{s.real:.10g}", f"{s.imag:.10g}"])


def write_psd_csv(est: SpectrumEstimate, path: str | Path) -> None:
    """Dump a PSD estimate as (f_hz, psd_db) rows."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f_hz", "psd_db"])
        for f, p in zip(est.frequencies, est.psd_db):
            w.writerow([f"{f:.10g}", f"{p:.10g}"])
