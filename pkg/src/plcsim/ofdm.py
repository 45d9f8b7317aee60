"""PRIME-style OFDM transmitter and receiver.

The transmit grid runs at ``fs_adc`` (250 kHz, N=512, carriers 86..182 by
default, so the loaded band sits at 42..89 kHz). The "analog" domain is the
same stream interpolated by ``oversample_factor`` with a root-raised-cosine
kernel; the receiver decimates back, applies the (optionally modified)
matched filter and takes symbol-aligned FFTs. The RRC interpolation kernel
and the receive RRC form a Nyquist pair at the 250 kHz grid, which keeps the
noiseless loopback bit-exact without a cyclic prefix.

The modified matched filter ``h + tau*dh/dt`` undoes the first-order lowpass
that the difference limiter presents to in-range signals: its frequency
response is H(f)*(1 + j*2*pi*f*tau), the exact inverse of a one-pole rolloff
with time constant tau.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal as sps

from .signals import SignalBuffer


@dataclass(frozen=True)
class OfdmConfig:
    """OFDM PHY parameters.

    ``signal_bandwidth`` (B_x) feeds the front-end time constants; the
    matched-filter design rate is pinned at 8*B_x. Defaults reproduce the
    PRIME narrowband profile.
    """

    fft_size: int = 512
    data_carrier_lo: int = 86
    data_carrier_hi: int = 182  # inclusive
    modulation: str = "bpsk"  # bpsk | qpsk
    fs_adc_hz: float = 250e3
    rrc_rolloff: float = 0.25
    oversample_factor: int = 64
    mf_span_symbols: int = 16
    signal_bandwidth_hz: float = 50e3
    mf_sampling_rate_hz: float = 400e3
    cyclic_prefix: int = 0
    use_modified_mf: bool = False

    def __post_init__(self):
        if not (0 <= self.data_carrier_lo <= self.data_carrier_hi < self.fft_size):
            raise ValueError("data carriers must lie inside [0, fft_size)")
        if self.modulation not in ("bpsk", "qpsk"):
            raise ValueError(f"unsupported modulation {self.modulation!r}")
        if abs(self.mf_sampling_rate_hz - 8.0 * self.signal_bandwidth_hz) > 1e-6 * self.mf_sampling_rate_hz:
            raise ValueError("mf_sampling_rate must equal 8 * signal_bandwidth")
        if self.oversample_factor < 1:
            raise ValueError("oversample_factor must be >= 1")

    @property
    def subcarrier_spacing_hz(self) -> float:
        return self.fs_adc_hz / self.fft_size

    @property
    def symbol_duration_s(self) -> float:
        return self.fft_size / self.fs_adc_hz

    @property
    def data_carriers(self) -> np.ndarray:
        return np.arange(self.data_carrier_lo, self.data_carrier_hi + 1)

    @property
    def n_data_carriers(self) -> int:
        return self.data_carrier_hi - self.data_carrier_lo + 1

    @property
    def bits_per_symbol(self) -> int:
        return 1 if self.modulation == "bpsk" else 2

    @property
    def bits_per_ofdm_symbol(self) -> int:
        return self.n_data_carriers * self.bits_per_symbol

    @property
    def analog_rate_hz(self) -> float:
        return self.fs_adc_hz * self.oversample_factor

    @property
    def band_hz(self) -> tuple[float, float]:
        """Occupied band (lower carrier edge to upper carrier edge), Hz."""
        df = self.subcarrier_spacing_hz
        return (self.data_carrier_lo - 0.5) * df, (self.data_carrier_hi + 0.5) * df

    @property
    def default_mf_tau(self) -> float:
        """Lowpass time constant the modified matched filter compensates."""
        return 1.0 / (4.0 * np.pi * self.signal_bandwidth_hz)

    @property
    def samples_per_symbol(self) -> int:
        return self.fft_size + self.cyclic_prefix


@dataclass(frozen=True)
class BitFrame:
    """Payload bits plus the seed that produced them."""

    bits: np.ndarray
    seed: int

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=np.int8)
        if b.size and not np.isin(b, (0, 1)).all():
            raise ValueError("bits must be 0/1")
        object.__setattr__(self, "bits", b)

    def __len__(self) -> int:
        return len(self.bits)


def random_bit_frame(n_bits: int, seed: int) -> BitFrame:
    rng = np.random.default_rng(seed)
    return BitFrame(rng.integers(0, 2, size=n_bits, dtype=np.int8), seed)


def map_bits(frame: BitFrame | np.ndarray, modulation: str) -> np.ndarray:
    """Map bits to unit-average-energy constellation points.

    BPSK: 0 -> +1, 1 -> -1. QPSK: bit pairs to {+-1 +-1j}/sqrt(2) (first bit
    on the real rail).

    Raises:
        ValueError: bit count not divisible by bits per symbol.
    """
    bits = frame.bits if isinstance(frame, BitFrame) else np.asarray(frame, dtype=np.int8)
    if modulation == "bpsk":
        return (1.0 - 2.0 * bits).astype(np.complex128)
    if modulation == "qpsk":
        if len(bits) % 2:
            raise ValueError("qpsk needs an even number of bits")
        pairs = bits.reshape(-1, 2)
        return ((1.0 - 2.0 * pairs[:, 0]) + 1j * (1.0 - 2.0 * pairs[:, 1])) / np.sqrt(2.0)
    raise ValueError(f"unsupported modulation {modulation!r}")


def _rrc_impulse(t: np.ndarray, symbol_rate: float, rolloff: float) -> np.ndarray:
    """Root-raised-cosine impulse response evaluated at times ``t`` (seconds),
    unit symbol rate scaling (peak near t=0). Singularities handled exactly."""
    ts = 1.0 / symbol_rate
    b = rolloff
    x = t / ts
    h = np.empty_like(x)
    if b == 0:
        return np.sinc(x)
    # t = 0
    mask0 = np.isclose(x, 0.0, atol=1e-12)
    h[mask0] = 1.0 - b + 4.0 * b / np.pi
    # |t| = ts/(4 b)
    xs = 1.0 / (4.0 * b)
    masks = np.isclose(np.abs(x), xs, atol=1e-9) & ~mask0
    h[masks] = (b / np.sqrt(2.0)) * ((1 + 2 / np.pi) * np.sin(np.pi / (4 * b))
                                     + (1 - 2 / np.pi) * np.cos(np.pi / (4 * b)))
    rest = ~(mask0 | masks)
    xr = x[rest]
    num = np.sin(np.pi * xr * (1 - b)) + 4 * b * xr * np.cos(np.pi * xr * (1 + b))
    den = np.pi * xr * (1 - (4 * b * xr) ** 2)
    h[rest] = num / den
    return h


@lru_cache(maxsize=32)
def _tx_kernel_cached(analog_rate: float, symbol_rate: float, rolloff: float,
                      span_symbols: int, up: int) -> np.ndarray:
    half = (span_symbols // 2) * up
    t = np.arange(-half, half + 1) / analog_rate
    h = _rrc_impulse(t, symbol_rate, rolloff)
    return h * (up / np.sum(h))  # passband gain `up` preserves sample amplitude


def tx_pulse_taps(cfg: OfdmConfig) -> np.ndarray:
    """Interpolation pulse p(t): RRC at the grid symbol rate, sampled at the
    analog rate, spanning ``mf_span_symbols`` grid periods."""
    return _tx_kernel_cached(cfg.analog_rate_hz, cfg.fs_adc_hz, cfg.rrc_rolloff,
                             cfg.mf_span_symbols, cfg.oversample_factor)


def _symbols_to_grid(symbols: np.ndarray, cfg: OfdmConfig) -> np.ndarray:
    """Accepts data-carrier values (1D or (n_sym, n_data)) or a full carrier
    grid (n_sym, fft_size); returns the validated full grid."""
    s = np.asarray(symbols, dtype=np.complex128)
    nd = cfg.n_data_carriers
    if s.ndim == 1:
        if len(s) % nd:
            raise ValueError(f"symbol count {len(s)} not a multiple of {nd} data carriers")
        s = s.reshape(-1, nd)
    if s.ndim != 2:
        raise ValueError("symbols must be 1D or 2D")
    if s.shape[1] == nd:
        grid = np.zeros((s.shape[0], cfg.fft_size), dtype=np.complex128)
        grid[:, cfg.data_carriers] = s
        return grid
    if s.shape[1] == cfg.fft_size:
        mask = np.ones(cfg.fft_size, dtype=bool)
        mask[cfg.data_carriers] = False
        if np.any(np.abs(s[:, mask]) > 0):
            raise ValueError("symbol placed on non-data carrier")
        return s
    raise ValueError(f"cannot interpret symbol array of width {s.shape[1]}")


def ofdm_serialize(symbols: np.ndarray, cfg: OfdmConfig) -> np.ndarray:
    """IDFT per symbol (orthonormal), optional cyclic prefix, serialized to the
    grid-rate sample stream."""
    grid = _symbols_to_grid(symbols, cfg)
    blocks = np.fft.ifft(grid, axis=1, norm="ortho")
    if cfg.cyclic_prefix:
        blocks = np.concatenate([blocks[:, -cfg.cyclic_prefix:], blocks], axis=1)
    return blocks.reshape(-1)


def ofdm_modulate(symbols: np.ndarray, cfg: OfdmConfig) -> SignalBuffer:
    """Serialize symbols and interpolate to the analog emulation rate with the
    RRC pulse. Kernel delay is compensated, so output sample 0 is symbol 0's
    first grid sample (leading filter tail truncated).

    Raises:
        ValueError: energy on a non-data carrier of a full-grid input.
    """
    x = ofdm_serialize(symbols, cfg)
    up = cfg.oversample_factor
    taps = tx_pulse_taps(cfg)
    k = (len(taps) - 1) // (2 * up)
    xp = np.concatenate([x, np.zeros(2 * k + 1, dtype=x.dtype)])
    y = sps.upfirdn(taps, xp, up=up, down=1)
    y = y[k * up:k * up + len(x) * up]
    return SignalBuffer(y, cfg.analog_rate_hz, "tx")


def matched_filter_taps(cfg: OfdmConfig, rate: float | None = None) -> np.ndarray:
    """Receive RRC taps (matched to the transmit pulse) at ``rate``
    (default: the configured matched-filter design rate). Unit energy,
    symmetric, odd length spanning ``mf_span_symbols`` grid periods."""
    rate = cfg.mf_sampling_rate_hz if rate is None else rate
    half = int(round((cfg.mf_span_symbols / 2) * rate / cfg.fs_adc_hz))
    t = np.arange(-half, half + 1) / rate
    h = _rrc_impulse(t, cfg.fs_adc_hz, cfg.rrc_rolloff)
    return h / np.sqrt(np.sum(h ** 2))


def _derivative_weight(freqs: np.ndarray, rate: float,
                       band_limit: tuple[float, float] | None) -> np.ndarray:
    """Raised-cosine rolloff of the differentiator above the band of
    interest. Sampled responses cannot be differentiated across the Nyquist
    fold; tapering the jw weighting between f1 and f2 keeps the derivative
    exact below f1 and bounded at the edge."""
    if band_limit is None:
        f1, f2 = 0.75 * rate / 2.0, rate / 2.0
    else:
        f1, f2 = band_limit
    af = np.abs(freqs)
    w = np.ones_like(af)
    taper = (af > f1) & (af < f2)
    w[taper] = np.cos(0.5 * np.pi * (af[taper] - f1) / (f2 - f1)) ** 2
    w[af >= f2] = 0.0
    return w


def spectral_derivative(h: np.ndarray, rate: float, pad_factor: int = 16,
                        band_limit: tuple[float, float] | None = None) -> np.ndarray:
    """Time derivative of a sampled impulse response via frequency-domain
    differentiation on a zero-padded grid (same length and alignment as the
    input). Exact below the band limit, unlike low-order finite differences;
    the weighting rolls off toward Nyquist (see :func:`_derivative_weight`)."""
    n = len(h)
    m = 1 << int(np.ceil(np.log2(pad_factor * max(n, 2))))
    spec = np.fft.fft(h, m)
    freqs = np.fft.fftfreq(m, d=1.0 / rate)
    omega = 2j * np.pi * freqs * _derivative_weight(freqs, rate, band_limit)
    dh = np.fft.ifft(spec * omega)[:n]
    return dh.real if np.isrealobj(h) else dh


def modified_matched_filter_taps(cfg: OfdmConfig, tau: float | None = None,
                                 rate: float | None = None,
                                 band_limit: tuple[float, float] | None = None) -> np.ndarray:
    """Taps of ``h + tau * dh/dt``: the matched filter augmented so its
    response equals H(f) * (1 + j*2*pi*f*tau) across the filter passband,
    the exact inverse of a one-pole lowpass with time constant ``tau``.

    The derivative term spreads slightly beyond the matched filter's span,
    so the returned filter is extended symmetrically (length 3x), keeping an
    odd tap count with the group-delay center in the middle. ``tau`` defaults
    to 1/(4*pi*B_x); tau = 0 degenerates to the plain matched filter.

    Raises:
        ValueError: negative tau.
    """
    tau = cfg.default_mf_tau if tau is None else tau
    if tau < 0:
        raise ValueError("tau must be non-negative")
    rate = cfg.mf_sampling_rate_hz if rate is None else rate
    h = matched_filter_taps(cfg, rate)
    n = len(h)
    if tau == 0:
        return h.copy()
    m = 1 << int(np.ceil(np.log2(16 * n)))
    spec = np.fft.fft(h, m)
    freqs = np.fft.fftfreq(m, d=1.0 / rate)
    w = _derivative_weight(freqs, rate, band_limit)
    spec = spec * (1.0 + 2j * np.pi * freqs * tau * w)
    y = np.fft.ifft(spec).real
    ext = n  # extra support on each side for the derivative tails
    idx = np.arange(-ext, n + ext) % m
    return y[idx]


def _mf_filter(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Apply a linear-phase FIR and remove its group delay."""
    d = (len(taps) - 1) // 2
    y = sps.fftconvolve(x, taps, mode="full")
    return y[d:d + len(x)]


def decision_variables(buf: SignalBuffer, cfg: OfdmConfig, which_mf: str = "standard",
                       delay_samples: int = 0, n_symbols: int | None = None,
                       mf_tau: float | None = None) -> np.ndarray:
    """Matched-filter, symbol-align and FFT a received grid-rate buffer;
    returns the complex decision matrix (n_symbols, n_data_carriers).

    ``delay_samples`` is the known front-end chain group delay at the buffer
    rate (compensated by discarding leading samples).

    Raises:
        ValueError: rate mismatch with the config grid, unknown filter kind,
            or too few samples for the requested symbol count.
    """
    if abs(buf.sample_rate - cfg.fs_adc_hz) > 1e-6 * cfg.fs_adc_hz:
        raise ValueError(f"buffer rate {buf.sample_rate} != grid rate {cfg.fs_adc_hz}")
    if which_mf == "standard":
        taps = matched_filter_taps(cfg, rate=cfg.fs_adc_hz)
    elif which_mf == "modified":
        taps = modified_matched_filter_taps(cfg, tau=mf_tau, rate=cfg.fs_adc_hz)
    else:
        raise ValueError(f"unknown matched filter kind {which_mf!r}")
    x = buf.samples[delay_samples:]
    sps_len = cfg.samples_per_symbol
    n_avail = len(x) // sps_len
    n_symbols = n_avail if n_symbols is None else n_symbols
    if n_symbols > n_avail:
        raise ValueError(f"need {n_symbols} symbols, buffer holds {n_avail}")
    y = _mf_filter(x, taps)[:n_symbols * sps_len].reshape(n_symbols, sps_len)
    if cfg.cyclic_prefix:
        y = y[:, cfg.cyclic_prefix:]
    spec = np.fft.fft(y, axis=1, norm="ortho")
    return spec[:, cfg.data_carriers]


def hard_decisions(decisions: np.ndarray, modulation: str) -> np.ndarray:
    """Constellation hard decision to bits (flattened, symbol-major)."""
    if modulation == "bpsk":
        return (decisions.real < 0).astype(np.int8).reshape(-1)
    if modulation == "qpsk":
        b0 = (decisions.real < 0).astype(np.int8)
        b1 = (decisions.imag < 0).astype(np.int8)
        return np.stack([b0, b1], axis=-1).reshape(-1)
    raise ValueError(f"unsupported modulation {modulation!r}")


def demodulate(buf: SignalBuffer, cfg: OfdmConfig, which_mf: str = "standard",
               delay_samples: int = 0, n_symbols: int | None = None,
               mf_tau: float | None = None) -> np.ndarray:
    """Recover bits from a symbol-aligned grid-rate buffer (matched filter,
    per-symbol FFT, hard decision on the data carriers)."""
    dec = decision_variables(buf, cfg, which_mf, delay_samples, n_symbols, mf_tau)
    return hard_decisions(dec, cfg.modulation)


def count_ber(sent: BitFrame | np.ndarray, received: np.ndarray) -> dict:
    """Exact Hamming-distance error ratio.

    Raises:
        ValueError: length mismatch.
    """
    a = sent.bits if isinstance(sent, BitFrame) else np.asarray(sent, dtype=np.int8)
    b = np.asarray(received, dtype=np.int8)
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    errors = int(np.count_nonzero(a != b))
    return {"errors": errors, "total": len(a), "ber": errors / len(a) if len(a) else 0.0}
