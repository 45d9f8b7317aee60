"""Synthesis and calibration of the three-part channel noise.

Components: (i) thermal complex Gaussian noise, (ii) cyclostationary bursts,
exponentially decaying white-noise packets repeating at twice the AC line
frequency, (iii) asynchronous impulses with Poisson arrivals, Gaussian
amplitudes and a microsecond-scale decay. Components (i) and (ii) are
spectrally shaped to fall off at 30 dB per MHz; the asynchronous component is
left broadband.

Each burst/impulse modulates an independent white process, so overlapping
events add in power: the generators build the summed power envelope with an
exact one-pole recursion and multiply its square root by unit white noise.

Component powers are set by explicit normalization after generation, not by
analytic constants; :func:`calibrate` converts the configured Eb/N0 and SIR
into per-component power targets.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize
from scipy import signal as sps

from .signals import SignalBuffer

_ENVELOPE_CUTOFF = 1e-8  # drop noise synthesis where the power envelope is below this fraction of its peak


@dataclass(frozen=True)
class NoiseConfig:
    """Noise environment parameters.

    ``inv_lambda_s`` is the mean inter-arrival time of the asynchronous
    impulses (1/lambda). ``cs_as_ratio`` splits the impulsive power budget
    between the cyclostationary and asynchronous parts. ``ac_phase_s`` offsets
    the burst train; None derives a per-seed random phase.
    """

    eb_n0_db: float = 10.0
    sir_db: float = 0.0
    inv_lambda_s: float = 2e-5
    tau_cs_s: float = 200e-6
    tau_as_s: float = 2e-6
    f_ac_hz: float = 60.0
    cs_as_ratio: float = 3.0
    as_amp_std: float = 1.0
    psd_shaping: bool = True
    ac_phase_s: float | None = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("inv_lambda_s", "tau_cs_s", "tau_as_s", "f_ac_hz"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.cs_as_ratio < 0:
            raise ValueError("cs_as_ratio must be non-negative")

    @property
    def lambda_rate(self) -> float:
        return 1.0 / self.inv_lambda_s

    @property
    def burst_period_s(self) -> float:
        return 1.0 / (2.0 * self.f_ac_hz)


@dataclass(frozen=True)
class NoiseRealization:
    """One generated noise draw: per-component traces plus the arrival times
    actually used. Component powers are normalized to the calibration
    targets exactly (zero target gives a zero trace)."""

    awgn: SignalBuffer
    cyclostationary: SignalBuffer
    asynchronous: SignalBuffer
    arrival_times: np.ndarray
    targets: dict
    realized: dict

    def total(self) -> np.ndarray:
        return self.awgn.samples + self.cyclostationary.samples + self.asynchronous.samples


def _n_samples(duration_s: float, rate: float, n_samples: int | None) -> int:
    n = int(round(duration_s * rate)) if n_samples is None else int(n_samples)
    if n <= 0:
        raise ValueError("duration must cover at least one sample")
    return n


def gen_awgn(duration_s: float, power: float, seed: int, sample_rate: float,
             n_samples: int | None = None) -> SignalBuffer:
    """Circularly symmetric complex Gaussian noise of the given mean-square
    power (statistically; no post-normalization here).

    Raises:
        ValueError: negative power.
    """
    if power < 0:
        raise ValueError("power must be non-negative")
    n = _n_samples(duration_s, sample_rate, n_samples)
    if power == 0:
        return SignalBuffer(np.zeros(n, dtype=np.complex128), sample_rate, "awgn")
    rng = np.random.default_rng(seed)
    # single-precision synthesis keeps the generator memory-bound cost low;
    # the buffer upcasts to complex128 at the boundary
    x = rng.standard_normal(2 * n, dtype=np.float32).view(np.complex64)
    x *= np.float32(np.sqrt(power / 2.0))
    return SignalBuffer(x, sample_rate, "awgn")


def _masked_white(power_env: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """sqrt(power envelope) times unit complex white noise, synthesized only
    where the envelope is non-negligible."""
    n = len(power_env)
    out = np.zeros(n, dtype=np.complex64)
    peak = power_env.max() if n else 0.0
    if peak <= 0:
        return out
    active = np.flatnonzero(power_env > _ENVELOPE_CUTOFF * peak)
    m = len(active)
    amp = np.sqrt(power_env[active] / 2.0).astype(np.float32)
    vals = rng.standard_normal(2 * m, dtype=np.float32).view(np.complex64)
    vals *= amp
    out[active] = vals
    return out


def _decaying_power_envelope(n: int, rate: float, onsets_s: np.ndarray,
                             powers: np.ndarray, tau_s: float) -> np.ndarray:
    """Sum of one-sided exponentials power_k * exp(-2 (t - t_k)/tau) for
    t >= t_k, sampled on the n-point grid. Onsets before t=0 contribute their
    tails. Exact one-pole recursion over an impulse train."""
    dt = 1.0 / rate
    rho = np.exp(-2.0 * dt / tau_s)
    onsets_s = np.asarray(onsets_s, dtype=float)
    powers = np.asarray(powers, dtype=float)
    imp = np.zeros(n)
    pre = onsets_s < 0
    if np.any(pre):
        imp[0] += np.sum(powers[pre] * np.exp(2.0 * onsets_s[pre] / tau_s)) * rho
    post = ~pre
    idx = np.ceil(onsets_s[post] * rate - 1e-9).astype(np.int64)
    keep = idx < n
    idx = idx[keep]
    frac = idx * dt - onsets_s[post][keep]  # time since onset at first covered sample
    np.add.at(imp, idx, powers[post][keep] * np.exp(-2.0 * frac / tau_s))
    return sps.lfilter([1.0], [1.0, -rho], imp).real


def gen_cyclostationary(duration_s: float, cfg: NoiseConfig, sample_rate: float,
                        seed: int | None = None, amplitude: float = 1.0,
                        n_samples: int | None = None) -> SignalBuffer:
    """Periodic exponentially decaying noise bursts, one per half AC cycle.

    Raises:
        ValueError: duration shorter than one burst period.
    """
    n = _n_samples(duration_s, sample_rate, n_samples)
    dur = n / sample_rate
    period = cfg.burst_period_s
    if dur < period:
        raise ValueError(f"duration {dur}s is below one burst period {period}s")
    if amplitude == 0:
        return SignalBuffer(np.zeros(n, dtype=np.complex128), sample_rate, "cs")
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    if cfg.ac_phase_s is None:
        phase = rng.uniform(0.0, period)
    else:
        phase = cfg.ac_phase_s % period
    k_lo = int(np.floor((-10.0 * cfg.tau_cs_s - phase) / period))
    k_hi = int(np.ceil((dur - phase) / period))
    onsets = phase + period * np.arange(k_lo, k_hi + 1)
    onsets = onsets[onsets < dur]
    env = _decaying_power_envelope(n, sample_rate, onsets,
                                   np.full(len(onsets), amplitude ** 2), cfg.tau_cs_s)
    return SignalBuffer(_masked_white(env, rng), sample_rate, "cs")


def gen_asynchronous(duration_s: float, cfg: NoiseConfig, sample_rate: float,
                     seed: int | None = None,
                     n_samples: int | None = None) -> tuple[SignalBuffer, np.ndarray]:
    """Poisson-arrival impulses with Gaussian amplitudes and decay tau_as.
    Returns the trace and the arrival times that fall inside [0, duration)."""
    n = _n_samples(duration_s, sample_rate, n_samples)
    dur = n / sample_rate
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    lead = 10.0 * cfg.tau_as_s
    count = rng.poisson(cfg.lambda_rate * (dur + lead))
    if count == 0:
        return SignalBuffer(np.zeros(n, dtype=np.complex128), sample_rate, "as"), np.array([])
    times = np.sort(rng.uniform(-lead, dur, size=count))
    amps = rng.normal(0.0, cfg.as_amp_std, size=count)
    env = _decaying_power_envelope(n, sample_rate, times, amps ** 2, cfg.tau_as_s)
    trace = _masked_white(env, rng)
    return SignalBuffer(trace, sample_rate, "as"), times[times >= 0.0]


@lru_cache(maxsize=8)
def _shaping_corner_hz(slope_db_per_mhz: float, fit_hi_hz: float) -> float:
    """Corner of a double first-order lowpass whose least-squares PSD slope
    in dB over [0, fit_hi_hz] equals the target. (A single pole tops out at
    about -26 dB/MHz when fitted linearly over a 1 MHz span, short of the
    -30 dB/MHz profile, hence the two identical sections.)"""
    f = np.linspace(0.0, fit_hi_hz, 2001)
    fc_center = f - f.mean()
    denom = np.sum(fc_center ** 2)
    target = slope_db_per_mhz / 1e6

    def slope_err(fc: float) -> float:
        y = -20.0 * np.log10(1.0 + (f / fc) ** 2)
        return np.sum(fc_center * (y - y.mean())) / denom - target

    return optimize.brentq(slope_err, 1.0, 1e9)


def shape_psd(buf: SignalBuffer, slope_db_per_mhz: float = -30.0,
              fit_band_hz: float = 1e6) -> SignalBuffer:
    """Recursive lowpass (two identical first-order sections) whose corner is
    fitted so the PSD of a white input falls at ``slope_db_per_mhz`` over
    [0, fit_band_hz]. Output is renormalized to the input power (the spectrum
    changes, the total power does not)."""
    x = buf.samples
    if not np.any(x):
        return buf.with_samples(np.zeros_like(x))
    fc = _shaping_corner_hz(slope_db_per_mhz, fit_band_hz)
    a = 1.0 - np.exp(-2.0 * np.pi * fc / buf.sample_rate)
    sos = np.array([[a * a, 0.0, 0.0, 1.0, 2.0 * (a - 1.0), (1.0 - a) ** 2]])
    if x.dtype == np.complex64:
        sos = sos.astype(np.float32)  # keep single-precision traces in place
    y = sps.sosfilt(sos, x)
    p_in = np.real(np.vdot(x, x)) / len(x)
    p_out = np.real(np.vdot(y, y)) / len(y)
    if p_out > 0:
        y *= np.sqrt(p_in / p_out)
    return buf.with_samples(y)


def calibrate(signal_power: float, cfg: NoiseConfig, kappa: float = 1.0) -> dict:
    """Per-component power targets from the configured Eb/N0 and SIR.

    ``kappa`` is the measured link transfer constant: the decision-variable
    SNR produced per unit (signal power / thermal power) ratio at the channel,
    so thermal = kappa * signal_power / (Eb/N0). The impulsive budget is
    signal_power / SIR, split cs:as = ``cs_as_ratio``:1.

    Raises:
        ValueError: NaN dB inputs or non-positive signal power.
    """
    if signal_power <= 0:
        raise ValueError("signal_power must be positive")
    if np.isnan(cfg.eb_n0_db) or np.isnan(cfg.sir_db):
        raise ValueError("Eb/N0 and SIR must not be NaN")
    gamma = 10.0 ** (cfg.eb_n0_db / 10.0)
    thermal = kappa * signal_power / gamma if np.isfinite(gamma) else 0.0
    sir_lin = 10.0 ** (cfg.sir_db / 10.0)
    imp_total = signal_power / sir_lin if np.isfinite(sir_lin) else 0.0
    r = cfg.cs_as_ratio
    cs = imp_total * r / (1.0 + r)
    as_ = imp_total / (1.0 + r)
    return {"thermal": thermal, "cyclostationary": cs, "asynchronous": as_}


def _normalize_to(buf: SignalBuffer, target_power: float) -> SignalBuffer:
    if target_power <= 0:
        return buf.with_samples(np.zeros_like(buf.samples))
    p = np.real(np.vdot(buf.samples, buf.samples)) / len(buf.samples)
    if p == 0:
        return buf
    out = buf.samples.copy()
    out *= np.sqrt(target_power / p)  # in place, keeps the synthesis dtype
    return buf.with_samples(out)


def realize_noise(cfg: NoiseConfig, duration_s: float, sample_rate: float,
                  targets: dict, seed: int, n_samples: int | None = None) -> NoiseRealization:
    """Generate all three components at the analog rate, apply PSD shaping to
    the thermal and cyclostationary parts when enabled, and normalize each
    component to its power target exactly."""
    n = _n_samples(duration_s, sample_rate, n_samples)
    dur = n / sample_rate
    seeds = np.random.SeedSequence(seed).spawn(3)
    s_awgn, s_cs, s_as = (int(s.generate_state(1)[0]) for s in seeds)

    w = gen_awgn(dur, targets["thermal"], s_awgn, sample_rate, n_samples=n)
    if targets["cyclostationary"] > 0:
        cs = gen_cyclostationary(dur, cfg, sample_rate, seed=s_cs, n_samples=n)
    else:
        cs = SignalBuffer(np.zeros(n, dtype=np.complex128), sample_rate, "cs")
    if targets["asynchronous"] > 0:
        as_buf, arrivals = gen_asynchronous(dur, cfg, sample_rate, seed=s_as, n_samples=n)
    else:
        as_buf = SignalBuffer(np.zeros(n, dtype=np.complex128), sample_rate, "as")
        arrivals = np.array([])

    if cfg.psd_shaping:
        if targets["thermal"] > 0:
            w = shape_psd(w)
        if targets["cyclostationary"] > 0:
            cs = shape_psd(cs)

    w = _normalize_to(w, targets["thermal"])
    cs = _normalize_to(cs, targets["cyclostationary"])
    as_buf = _normalize_to(as_buf, targets["asynchronous"])
    realized = {
        "thermal": float(np.real(np.vdot(w.samples, w.samples)) / n),
        "cyclostationary": float(np.real(np.vdot(cs.samples, cs.samples)) / n),
        "asynchronous": float(np.real(np.vdot(as_buf.samples, as_buf.samples)) / n),
    }
    return NoiseRealization(w, cs, as_buf, arrivals, dict(targets), realized)
