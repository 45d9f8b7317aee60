"""Adaptive canonical differential limiter (ACDL) and its linear twin.

The chain emulates the analog front end sample by sample at the oversampled
rate: wideband front-end lowpass and gain staging, then a clipped mean
tracking filter (CMTF) whose clipping window follows the quartiles of the
difference signal (quartile tracking filters, QTFs, combined into a Tukey
range), then anti-aliasing and baseband selection filters.

Inside the clipping window the CMTF is a plain one-pole lowpass with time
constant ``tau``; outside it the state slews at a bounded rate, which is what
removes impulsive outliers regardless of their amplitude. Integration is
forward Euler at the emulation rate (enforced well below ``tau``).

Both quadrature rails run independent CMTF/QTF state, mirroring a two-rail
analog implementation of a complex baseband.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy import signal as sps

from .signals import SignalBuffer

_RANGE_FLOOR_FRAC = 1e-6  # minimum Tukey width as a fraction of the rail V_c


@dataclass(frozen=True)
class AcdlConfig:
    """Limiter chain parameters.

    ``tau_s`` sets both the CMTF time constant and the anti-aliasing corner
    1/(2*pi*tau); ``t0_s`` is the (much slower) QTF time constant. ``xi`` is
    the front-end bandwidth in units of the signal bandwidth (``inf`` =
    bypass). Gains: ``gain_k`` fixed (~sqrt(xi)), ``gain_g_big`` (G) and
    ``gain_g`` (g) are the AGC-tuned stages. ``qtf_step_a`` is the QTF slope
    constant A; leave 0 to have :func:`agc_tune` choose it.
    """

    signal_bandwidth_hz: float = 50e3
    tau_s: float | None = None
    t0_s: float | None = None
    beta: float = 3.0
    v_c: float = 1.0
    xi: float = 16.0
    gain_k: float | None = None
    gain_g_big: float = 1.0
    gain_g: float = 1.0
    qtf_step_a: float = 0.0
    qtf_step_fraction: float = 0.002
    agc_target_mean_abs: float = 0.1
    agc_target_iqr: float = 0.1
    clip_startup_s: float = 0.0
    probe_dump: bool = False

    def __post_init__(self):
        if self.signal_bandwidth_hz <= 0 or self.v_c <= 0 or self.xi <= 0:
            raise ValueError("signal_bandwidth, v_c and xi must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.tau_s is None:
            object.__setattr__(self, "tau_s", 1.0 / (4.0 * np.pi * self.signal_bandwidth_hz))
        if self.t0_s is None:
            object.__setattr__(self, "t0_s", 300.0 / self.signal_bandwidth_hz)
        if self.gain_k is None:
            object.__setattr__(self, "gain_k", float(np.sqrt(self.xi)) if np.isfinite(self.xi) else 1.0)
        if self.tau_s <= 0 or self.t0_s <= 0:
            raise ValueError("tau and t0 must be positive")

    def replace(self, **kw) -> "AcdlConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class CmtfState:
    """Tracking-filter state, one complex value covering both rails."""

    chi: complex = 0.0


@dataclass(frozen=True)
class QtfState:
    """Quartile estimates for one real rail."""

    q1: float = 0.0
    q3: float = 0.0


def clip(x: float, alpha_minus: float, alpha_plus: float) -> float:
    """Clamp ``x`` into [alpha_minus, alpha_plus].

    Raises:
        ValueError: inverted range.
    """
    if alpha_minus > alpha_plus:
        raise ValueError(f"inverted clipping range [{alpha_minus}, {alpha_plus}]")
    return min(max(x, alpha_minus), alpha_plus)


def cmtf_step(state: CmtfState, x: complex, rng: tuple[float, float], tau: float, dt: float) -> CmtfState:
    """One forward-Euler step of the clipped mean tracking filter,
    chi += (dt/tau) * clip(x - chi), applied per quadrature rail.

    Raises:
        ValueError: dt > tau/20 (stability guard) or inverted range.
    """
    if dt > tau / 20.0:
        raise ValueError(f"dt={dt} too coarse for tau={tau} (need dt <= tau/20)")
    lo, hi = rng
    chi = state.chi
    new_re = chi.real + (dt / tau) * clip(x.real - chi.real, lo, hi)
    new_im = chi.imag + (dt / tau) * clip(x.imag - chi.imag, lo, hi)
    return CmtfState(complex(new_re, new_im))


def qtf_step(state: QtfState, y: float, a: float, t0: float, dt: float) -> QtfState:
    """One step of the sign-driven quartile trackers:
    Q3 += (A dt/T0)(sgn(y-Q3) + 1/2), Q1 += (A dt/T0)(sgn(y-Q1) - 1/2).
    sgn(0) is taken as 0."""
    k = a * dt / t0
    q3 = state.q3 + k * (np.sign(y - state.q3) + 0.5)
    q1 = state.q1 + k * (np.sign(y - state.q1) - 0.5)
    return QtfState(q1=float(q1), q3=float(q3))


def tukey_range(q1: float, q3: float, beta: float) -> tuple[float, float]:
    """Outlier-exclusion interval [Q1 - beta*(Q3-Q1), Q3 + beta*(Q3-Q1)].

    Raises:
        ValueError: inverted quartiles.
    """
    if q1 > q3:
        raise ValueError(f"inverted quartiles: q1={q1} > q3={q3}")
    iqr = q3 - q1
    return q1 - beta * iqr, q3 + beta * iqr


@lru_cache(maxsize=16)
def _front_end_taps(rate: float, cutoff: float, oversample: int) -> np.ndarray:
    # Length 2*oversample+1 keeps the group delay at exactly one grid-rate
    # sample; the wide transition is intentional (impulses must stay narrow).
    ntaps = 2 * oversample + 1
    return sps.firwin(ntaps, cutoff=cutoff, fs=rate)


@lru_cache(maxsize=16)
def _band_select_taps(rate: float, oversample: int, flat_to: float, stop_from: float) -> np.ndarray:
    # Anti-aliasing / baseband selection: flat over the occupied band, strong
    # rejection beyond; delay pinned to an integer number of grid samples.
    ntaps = 2 * 16 * oversample + 1
    beta = sps.kaiser_beta(70.0)
    return sps.firwin(ntaps, cutoff=0.5 * (flat_to + stop_from), window=("kaiser", beta), fs=rate)


def front_end_lowpass(buf: SignalBuffer, cfg: AcdlConfig, oversample: int = 64) -> SignalBuffer:
    """Wideband input lowpass (bandwidth xi*B_x, DC gain 1, linear phase,
    group delay = ``oversample`` samples). ``xi = inf`` bypasses it."""
    if not np.isfinite(cfg.xi):
        return buf.with_samples(buf.samples.copy(), "II")
    cutoff = cfg.xi * cfg.signal_bandwidth_hz
    if cutoff >= buf.sample_rate / 2:
        return buf.with_samples(buf.samples.copy(), "II")
    taps = _front_end_taps(buf.sample_rate, cutoff, oversample)
    y = sps.oaconvolve(buf.samples, taps, mode="full")[:len(buf.samples)]
    return buf.with_samples(y, "II")


def front_end_delay(cfg: AcdlConfig, sample_rate: float, oversample: int = 64) -> int:
    """Group delay of the front-end stage in analog-rate samples."""
    if not np.isfinite(cfg.xi) or cfg.xi * cfg.signal_bandwidth_hz >= sample_rate / 2:
        return 0
    return oversample


@njit(cache=True, fastmath=True)
def _limiter_loop(u_re, u_im, dt, tau, t0, a_step, beta, v_c, g,
                  chi0_re, chi0_im, q1r0, q3r0, q1i0, q3i0,
                  clip_from, wmin,
                  chi_re, chi_im, aux_stride, aux_q1r, aux_q3r, aux_lor, aux_hir):
    """Sequential CMTF+QTF update over one trace. ``aux_*`` arrays (sized
    ceil(n/aux_stride) or empty) record the real-rail window evolution."""
    n = u_re.shape[0]
    kq = a_step * dt / t0
    kc = dt / tau
    inv_g = 1.0 / g
    chi_r = chi0_re
    chi_i = chi0_im
    q1r = q1r0
    q3r = q3r0
    q1i = q1i0
    q3i = q3i0
    record = aux_q1r.shape[0] > 0
    big = 1e300
    for i in range(n):
        # real rail
        y = g * (u_re[i] - chi_r)
        s = 0.0
        d = y - q3r
        if d > 0.0:
            s = 1.0
        elif d < 0.0:
            s = -1.0
        q3r = q3r + kq * (s + 0.5)
        s = 0.0
        d = y - q1r
        if d > 0.0:
            s = 1.0
        elif d < 0.0:
            s = -1.0
        q1r = q1r + kq * (s - 0.5)
        if i >= clip_from:
            iqr = q3r - q1r
            lo = q1r - beta * iqr
            hi = q3r + beta * iqr
            if lo < -v_c:
                lo = -v_c
            if hi > v_c:
                hi = v_c
            if hi - lo < wmin:
                c = 0.5 * (hi + lo)
                lo = c - 0.5 * wmin
                hi = c + 0.5 * wmin
        else:
            lo = -big
            hi = big
        yc = y
        if yc > hi:
            yc = hi
        elif yc < lo:
            yc = lo
        chi_r = chi_r + kc * (yc * inv_g)
        if record and i % aux_stride == 0:
            j = i // aux_stride
            aux_q1r[j] = q1r
            aux_q3r[j] = q3r
            aux_lor[j] = lo
            aux_hir[j] = hi
        # imaginary rail
        y = g * (u_im[i] - chi_i)
        s = 0.0
        d = y - q3i
        if d > 0.0:
            s = 1.0
        elif d < 0.0:
            s = -1.0
        q3i = q3i + kq * (s + 0.5)
        s = 0.0
        d = y - q1i
        if d > 0.0:
            s = 1.0
        elif d < 0.0:
            s = -1.0
        q1i = q1i + kq * (s - 0.5)
        if i >= clip_from:
            iqr = q3i - q1i
            lo = q1i - beta * iqr
            hi = q3i + beta * iqr
            if lo < -v_c:
                lo = -v_c
            if hi > v_c:
                hi = v_c
            if hi - lo < wmin:
                c = 0.5 * (hi + lo)
                lo = c - 0.5 * wmin
                hi = c + 0.5 * wmin
        else:
            lo = -big
            hi = big
        yc = y
        if yc > hi:
            yc = hi
        elif yc < lo:
            yc = lo
        chi_i = chi_i + kc * (yc * inv_g)
        chi_re[i] = chi_r
        chi_im[i] = chi_i
    return chi_r, chi_i, q1r, q3r, q1i, q3i


@dataclass
class ChainResult:
    """Output of a limiter-chain run.

    ``output`` is the baseband probe (point IV for the adaptive chain, point
    c for the linear twin); ``probes`` maps probe tags to traces; ``qtf_re``
    and ``qtf_im`` hold the final quartile states; ``aux`` optionally holds
    strided window-evolution arrays."""

    output: SignalBuffer
    probes: dict
    chi_final: complex
    qtf_re: QtfState
    qtf_im: QtfState
    delay_samples: int
    aux: dict | None = None


def _run_chain(buf: SignalBuffer, cfg: AcdlConfig, oversample: int, clip_enabled: bool,
               collect_probes: bool, probe_tags: tuple[str, ...],
               init_chi: complex | None, init_qtf: tuple[QtfState, QtfState] | None,
               aux_stride: int = 0, pre_conditioned: SignalBuffer | None = None) -> ChainResult:
    rate = buf.sample_rate
    dt = 1.0 / rate
    if dt > cfg.tau_s / 20.0:
        raise ValueError(f"emulation rate too low: dt={dt} > tau/20={cfg.tau_s / 20.0}")
    conditioned = pre_conditioned if pre_conditioned is not None else front_end_lowpass(buf, cfg, oversample)
    u = conditioned.samples * (cfg.gain_k * cfg.gain_g_big)
    n = len(u)

    if clip_enabled:
        clip_from = int(round(cfg.clip_startup_s * rate))
    else:
        clip_from = n + 1
    if init_chi is None:
        chi0 = complex(u[0]) if n else 0.0
    else:
        chi0 = init_chi
    if init_qtf is None:
        qr = QtfState()
        qi = QtfState()
    else:
        qr, qi = init_qtf

    chi_re = np.empty(n)
    chi_im = np.empty(n)
    if aux_stride > 0:
        m = (n + aux_stride - 1) // aux_stride
        aux_arrays = [np.empty(m) for _ in range(4)]
    else:
        aux_arrays = [np.empty(0) for _ in range(4)]
    a_step = cfg.qtf_step_a if cfg.qtf_step_a > 0 else cfg.qtf_step_fraction * cfg.v_c * cfg.signal_bandwidth_hz * cfg.t0_s
    wmin = _RANGE_FLOOR_FRAC * cfg.v_c if np.isfinite(cfg.v_c) else 0.0
    fr, fi, q1r, q3r, q1i, q3i = _limiter_loop(
        np.ascontiguousarray(u.real), np.ascontiguousarray(u.imag), dt, cfg.tau_s,
        cfg.t0_s, a_step, cfg.beta, cfg.v_c, cfg.gain_g, chi0.real, chi0.imag,
        qr.q1, qr.q3, qi.q1, qi.q3, clip_from, wmin,
        chi_re, chi_im, max(aux_stride, 1), *aux_arrays)
    chi = chi_re + 1j * chi_im

    band_taps = _band_select_taps(rate, oversample,
                                  2.0 * cfg.signal_bandwidth_hz * 0.92,
                                  2.0 * cfg.signal_bandwidth_hz * 1.32)
    aa_delay = (len(band_taps) - 1) // 2
    out = sps.oaconvolve(chi, band_taps, mode="full")[:n]

    t_cond, t_chi, t_aa, t_out, t_diff = probe_tags
    probes = {}
    if collect_probes:
        diff = np.empty(n, dtype=np.complex128)
        if n:
            diff[0] = cfg.gain_g * (u[0] - chi0)
            diff[1:] = cfg.gain_g * (u[1:] - chi[:-1])
        probes = {
            t_cond: conditioned.with_samples(u, t_cond),
            t_chi: buf.with_samples(chi, t_chi),
            t_aa: buf.with_samples(out, t_aa),
            t_out: buf.with_samples(out, t_out),  # unit output gain
            t_diff: buf.with_samples(diff, t_diff),
        }
    delay = front_end_delay(cfg, rate, oversample) + aa_delay
    aux = None
    if aux_stride > 0:
        aux = {"q1_re": aux_arrays[0], "q3_re": aux_arrays[1],
               "lo_re": aux_arrays[2], "hi_re": aux_arrays[3], "stride": aux_stride}
    return ChainResult(
        output=buf.with_samples(out, t_out),
        probes=probes,
        chi_final=complex(fr, fi),
        qtf_re=QtfState(q1r, q3r),
        qtf_im=QtfState(q1i, q3i),
        delay_samples=delay,
        aux=aux,
    )


def acdl_process(buf: SignalBuffer, cfg: AcdlConfig, oversample: int = 64,
                 collect_probes: bool = False, init_chi: complex | None = None,
                 init_qtf: tuple[QtfState, QtfState] | None = None,
                 aux_stride: int = 0, clip_enabled: bool = True,
                 pre_conditioned: SignalBuffer | None = None) -> ChainResult:
    """Run the full adaptive chain on an analog-rate buffer.

    Probe map: II = conditioned input (front end and K*G), I = limiter
    output, III = anti-aliased, IV = baseband output (unit output gain),
    V = g-scaled difference signal. The QTF-derived Tukey window is capped at
    the comparator rails +-V_c (in the g-scaled domain) and floored to a
    minimal width so a degenerate window cannot freeze the tracker.

    ``clip_enabled=False`` forces the clipping window to +-inf (the linear
    regime) on the identical arithmetic path. ``pre_conditioned`` supplies an
    already front-end-filtered trace so several chains can share it.
    """
    return _run_chain(buf, cfg, oversample, clip_enabled, collect_probes,
                      ("II", "I", "III", "IV", "V"), init_chi, init_qtf,
                      aux_stride, pre_conditioned)


def linear_chain_process(buf: SignalBuffer, cfg: AcdlConfig, oversample: int = 64,
                         collect_probes: bool = False, init_chi: complex | None = None,
                         init_qtf: tuple[QtfState, QtfState] | None = None,
                         pre_conditioned: SignalBuffer | None = None) -> ChainResult:
    """Reference chain with the clipping disabled: identical arithmetic with
    the tracking filter reduced to a plain one-pole lowpass.

    Probe map mirrors the adaptive chain: a = lowpass output, b = anti-
    aliased, c = baseband output (plus the conditioned input and difference
    traces under 'in'/'d')."""
    return _run_chain(buf, cfg, oversample, False, collect_probes,
                      ("in", "a", "b", "c", "d"), init_chi, init_qtf, 0,
                      pre_conditioned)


def chain_group_delay(cfg: AcdlConfig, sample_rate: float, oversample: int = 64) -> int:
    """Total linear-stage group delay of either chain, in analog samples.
    (The tracking filter's own one-pole response is not a pure delay; the
    modified matched filter compensates it.)"""
    band_taps = _band_select_taps(sample_rate, oversample,
                                  2.0 * cfg.signal_bandwidth_hz * 0.92,
                                  2.0 * cfg.signal_bandwidth_hz * 1.32)
    return front_end_delay(cfg, sample_rate, oversample) + (len(band_taps) - 1) // 2


def agc_tune(buf: SignalBuffer, cfg: AcdlConfig, oversample: int = 64) -> dict:
    """Tune the gain stages on a representative calibration segment.

    Runs the chain in linear mode with G = g = 1 and returns gains meeting
    the rail utilization targets (mean |output| ~= v_c * agc_target_mean_abs
    per rail, g-scaled difference IQR ~= v_c * agc_target_iqr), along with the
    QTF slope constant A derived from the measured difference-signal IQR and
    its quartile crossing rate, and warm-start states for subsequent runs.

    Raises:
        ValueError: all-zero calibration input.
    """
    if not np.any(buf.samples):
        raise ValueError("calibration segment is identically zero")
    probe_cfg = cfg.replace(gain_g_big=1.0, gain_g=1.0, qtf_step_a=1e-12)
    res = linear_chain_process(buf, probe_cfg, oversample, collect_probes=True)
    # Discard the settling head: filter transients plus a few tau.
    skip = min(len(buf) // 4, res.delay_samples + int(20 * cfg.tau_s * buf.sample_rate))
    out = res.probes["c"].samples[skip:]
    diff = res.probes["d"].samples[skip:]
    mean_abs = 0.5 * (np.mean(np.abs(out.real)) + np.mean(np.abs(out.imag)))
    if mean_abs == 0:
        raise ValueError("calibration output is zero after settling")
    gain_g_big = (cfg.agc_target_mean_abs * cfg.v_c) / mean_abs

    # Difference signal scales with G; rescale before sizing g.
    d_re = diff.real * gain_g_big
    d_im = diff.imag * gain_g_big
    q1 = 0.5 * (np.quantile(d_re, 0.25) + np.quantile(d_im, 0.25))
    q3 = 0.5 * (np.quantile(d_re, 0.75) + np.quantile(d_im, 0.75))
    iqr = q3 - q1
    if iqr <= 0:
        raise ValueError("degenerate difference-signal distribution")
    gain_g = (cfg.agc_target_iqr * cfg.v_c) / iqr

    # Crossing rate of the third quartile drives the QTF slope budget.
    above = d_re > q3
    crossings = np.count_nonzero(above[1:] != above[:-1])
    f0 = crossings / (len(d_re) / buf.sample_rate)
    iqr_scaled = cfg.agc_target_iqr * cfg.v_c
    a_step = cfg.qtf_step_fraction * iqr_scaled * f0 * cfg.t0_s

    return {
        "gain_G": float(gain_g_big),
        "gain_g": float(gain_g),
        "qtf_step_a": float(a_step),
        "iqr_est": float(iqr_scaled),
        "crossing_rate_hz": float(f0),
        "warm_qtf": (QtfState(q1=float(gain_g * q1), q3=float(gain_g * q3)),
                     QtfState(q1=float(gain_g * q1), q3=float(gain_g * q3))),
    }
