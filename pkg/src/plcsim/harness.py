"""Monte Carlo harness: per-point link simulation, sweeps, metrics, emission.

A "point" bundles the OFDM, noise and limiter configs plus one processing
chain (linear / acdl / blanking / clipping). Each point is calibrated once:

- a clean loopback measures the decision-domain energy of the signal and of
  unit thermal noise, anchoring Eb/N0 at the demodulator decision variable;
- the noise power targets follow from Eb/N0 / SIR (``noise.calibrate``);
- the limiter gains, QTF slope constant and warm-start quartiles come from
  ``acdl.agc_tune`` on a representative signal-plus-noise segment.

Trials then modulate random frames, add freshly seeded noise, run the chain,
demodulate (modified matched filter iff the adaptive limiter is in the chain)
and count bit errors. Everything is a pure function of (config, seed):
trial seeds derive from the base seed and indices, stopping decisions happen
at fixed batch boundaries, so outputs are byte-identical regardless of the
worker count.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import acdl as acdl_mod
from . import baselines as bl
from . import noise as noise_mod
from .ofdm import OfdmConfig, decision_variables, demodulate, map_bits, ofdm_modulate
from .signals import SignalBuffer, measure_power, resample

CHAINS = ("linear", "acdl", "blanking", "clipping")


@dataclass(frozen=True)
class LinkConfig:
    """Complete operating-point description."""

    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    noise: noise_mod.NoiseConfig = field(default_factory=noise_mod.NoiseConfig)
    acdl: acdl_mod.AcdlConfig = field(default_factory=acdl_mod.AcdlConfig)
    chain: str = "linear"
    baseline_threshold: float | None = None  # units of received RMS at the ADC
    threshold_grid_lo: float = 0.5
    threshold_grid_hi: float = 20.0
    threshold_grid_points: int = 40
    search_bits: int = 200_000
    data_symbols_per_trial: int = 64
    preamble_symbols: int = 4
    pad_symbols: int = 1
    trial_batch: int = 4
    measure_snr: bool = True
    snr_symbols: int = 16

    def __post_init__(self):
        if self.chain not in CHAINS:
            raise ValueError(f"chain must be one of {CHAINS}")
        if self.ofdm.signal_bandwidth_hz != self.acdl.signal_bandwidth_hz:
            object.__setattr__(self, "acdl",
                               self.acdl.replace(signal_bandwidth_hz=self.ofdm.signal_bandwidth_hz))

    def replace(self, **kw) -> "LinkConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class RunResult:
    """Metrics for one operating point."""

    axis_value: float
    chain: str
    ber: float
    ber_ci_lo: float
    ber_ci_hi: float
    snr_db: float
    errors: int
    bits: int
    seed: int
    wall_time_s: float
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional sweep description.

    ``bits_min`` should stay at or above 1e5 when BER points below 1e-3 are
    expected, or the binomial interval is too loose to plot.
    """

    axis: str  # eb_n0 | sir | beta | threshold
    values: tuple
    chain: str = "linear"
    bits_min: int = 100_000
    stop_at_errors: int | None = 100
    max_trials: int | None = None
    base_seed: int = 42

    def __post_init__(self):
        if self.axis not in ("eb_n0", "sir", "beta", "threshold"):
            raise ValueError(f"unknown sweep axis {self.axis!r}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("sweep needs at least one value")
        object.__setattr__(self, "values", vals)
        if self.chain not in CHAINS:
            raise ValueError(f"chain must be one of {CHAINS}")


def binomial_ci(errors: int, total: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total <= 0:
        return 0.0, 0.0
    from scipy.stats import norm
    z = norm.ppf(0.5 + confidence / 2.0)
    p = errors / total
    denom = 1.0 + z ** 2 / total
    center = (p + z ** 2 / (2 * total)) / denom
    half = z * np.sqrt(p * (1 - p) / total + z ** 2 / (4 * total ** 2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _seed_int(*key) -> int:
    return int(np.random.SeedSequence(key).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Calibration


@dataclass(frozen=True)
class LinkCalibration:
    """Per-point derived constants (all deterministic given the seed)."""

    signal_power: float
    kappa: float
    noise_targets: dict
    acdl_cfg: acdl_mod.AcdlConfig
    warm_qtf: tuple
    rms_adc: float
    conventional_delay_adc: int
    acdl_delay_adc: int


def _frame_bits(cfg: OfdmConfig, n_symbols: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=n_symbols * cfg.bits_per_ofdm_symbol, dtype=np.int8)


def _modulate_frame(cfg: OfdmConfig, bits: np.ndarray) -> SignalBuffer:
    return ofdm_modulate(map_bits(bits, cfg.modulation), cfg)


def _conventional_front(r: SignalBuffer, acfg: acdl_mod.AcdlConfig, ofdm: OfdmConfig) -> tuple[SignalBuffer, int]:
    """Front-end lowpass plus ADC decimation; returns the grid-rate buffer and
    the chain delay in grid samples."""
    fe = acdl_mod.front_end_lowpass(r, acfg, ofdm.oversample_factor)
    delay_analog = acdl_mod.front_end_delay(acfg, r.sample_rate, ofdm.oversample_factor)
    adc = resample(fe, ofdm.fs_adc_hz)
    assert delay_analog % ofdm.oversample_factor == 0
    return adc, delay_analog // ofdm.oversample_factor


_TRANSFER_NOISE_SYMBOLS = 2048  # ~200k decision samples: anchors Eb/N0 to ~0.3%


@lru_cache(maxsize=8)
def _decision_transfer(ofdm: OfdmConfig, xi: float, psd_shaping: bool, seed: int) -> tuple[float, float]:
    """(decision energy per unit signal channel power, decision variance per
    unit thermal channel power) through the conventional chain. The noise leg
    runs in chunks until the chi-square error of the variance estimate is
    small enough not to perturb the closed-form BER anchor."""
    probe_acdl = acdl_mod.AcdlConfig(signal_bandwidth_hz=ofdm.signal_bandwidth_hz, xi=xi)
    n_sym = 64
    skip = 2
    bits = _frame_bits(ofdm, n_sym, _seed_int(seed, 0x516))
    tx = _modulate_frame(ofdm, bits)
    p_sig = measure_power(tx)
    adc, delay = _conventional_front(tx, probe_acdl, ofdm)
    dec = decision_variables(adc, ofdm, "standard",
                             delay_samples=delay + skip * ofdm.samples_per_symbol,
                             n_symbols=n_sym - skip - 1)
    e_dec = float(np.mean(np.abs(dec) ** 2)) / p_sig

    chunk_sym = 256
    n_chunk = chunk_sym * ofdm.samples_per_symbol * ofdm.oversample_factor
    acc = 0.0
    count = 0
    for c in range(_TRANSFER_NOISE_SYMBOLS // chunk_sym):
        w = noise_mod.gen_awgn(n_chunk / tx.sample_rate, 1.0, _seed_int(seed, 0x7AE, c),
                               tx.sample_rate, n_samples=n_chunk)
        if psd_shaping:
            w = noise_mod.shape_psd(w)
        p_w = np.real(np.vdot(w.samples, w.samples)) / len(w.samples)
        adc_n, _ = _conventional_front(w, probe_acdl, ofdm)
        dec_n = decision_variables(adc_n, ofdm, "standard",
                                   delay_samples=delay + skip * ofdm.samples_per_symbol,
                                   n_symbols=chunk_sym - skip - 1)
        acc += float(np.sum(np.abs(dec_n) ** 2)) / p_w
        count += dec_n.size
    v_dec = acc / count
    return e_dec, v_dec


def calibrate_link(link: LinkConfig, seed: int) -> LinkCalibration:
    """Measure the link transfer constants and tune the limiter for one
    operating point."""
    ofdm = link.ofdm
    # fixed probe seed: the transfer is a property of the link configuration,
    # shared (and cached) across operating points
    e_dec, v_dec = _decision_transfer(ofdm, link.acdl.xi, link.noise.psd_shaping,
                                      _seed_int(0xCA1))
    kappa = e_dec / v_dec

    n_sym = 32
    bits = _frame_bits(ofdm, n_sym, _seed_int(seed, 0xB17))
    tx = _modulate_frame(ofdm, bits)
    signal_power = measure_power(tx)
    targets = noise_mod.calibrate(signal_power, link.noise, kappa)
    nz = noise_mod.realize_noise(link.noise, tx.duration, tx.sample_rate, targets,
                                 _seed_int(seed, 0xCA2), n_samples=len(tx))
    r_cal = tx.with_samples(tx.samples + nz.total(), "channel")

    agc = acdl_mod.agc_tune(r_cal, link.acdl, ofdm.oversample_factor)
    acfg = link.acdl.replace(gain_g_big=agc["gain_G"], gain_g=agc["gain_g"],
                             qtf_step_a=agc["qtf_step_a"])

    adc_cal, conv_delay = _conventional_front(r_cal, acfg, ofdm)
    rms_adc = float(np.sqrt(np.mean(np.abs(adc_cal.samples) ** 2)))
    acdl_delay_analog = acdl_mod.chain_group_delay(acfg, tx.sample_rate, ofdm.oversample_factor)
    assert acdl_delay_analog % ofdm.oversample_factor == 0
    return LinkCalibration(
        signal_power=signal_power,
        kappa=kappa,
        noise_targets=targets,
        acdl_cfg=acfg,
        warm_qtf=agc["warm_qtf"],
        rms_adc=rms_adc,
        conventional_delay_adc=conv_delay,
        acdl_delay_adc=acdl_delay_analog // ofdm.oversample_factor,
    )


# ---------------------------------------------------------------------------
# Trials


def _trial_chain_bits(link: LinkConfig, calib: LinkCalibration, trial_seed: int,
                      chains: tuple, thresholds: dict | None = None) -> dict:
    """Run one frame through the requested chains; returns per-chain received
    bits (plus 'sent'). Chains share the transmit frame and noise draw."""
    ofdm = link.ofdm
    n_data = link.data_symbols_per_trial
    n_total = link.preamble_symbols + n_data + link.pad_symbols
    bits_all = _frame_bits(ofdm, n_total, _seed_int(trial_seed, 0x5ED))
    tx = _modulate_frame(ofdm, bits_all)
    nz = noise_mod.realize_noise(link.noise, tx.duration, tx.sample_rate,
                                 calib.noise_targets, _seed_int(trial_seed, 0x402),
                                 n_samples=len(tx))
    r = tx.with_samples(tx.samples + nz.total(), "channel")

    bps = ofdm.bits_per_ofdm_symbol
    lo = link.preamble_symbols * bps
    out = {"sent": bits_all[lo:lo + n_data * bps]}
    skip_pre = link.preamble_symbols * ofdm.samples_per_symbol

    conv_mf = "modified" if ofdm.use_modified_mf else "standard"
    conv_tau = calib.acdl_cfg.tau_s if ofdm.use_modified_mf else None
    need_conv = any(c in chains for c in ("linear", "blanking", "clipping"))
    if need_conv:
        adc, conv_delay = _conventional_front(r, calib.acdl_cfg, ofdm)
        for chain in chains:
            if chain == "linear":
                out[chain] = demodulate(adc, ofdm, conv_mf,
                                        delay_samples=conv_delay + skip_pre, n_symbols=n_data,
                                        mf_tau=conv_tau)
            elif chain in ("blanking", "clipping"):
                t_rel = (thresholds or {}).get(chain, link.baseline_threshold)
                if t_rel is None:
                    raise ValueError(f"{chain} chain needs a threshold")
                cleaned = bl.apply_baseline(adc.samples, chain, t_rel * calib.rms_adc)
                out[chain] = demodulate(adc.with_samples(cleaned), ofdm, conv_mf,
                                        delay_samples=conv_delay + skip_pre, n_symbols=n_data,
                                        mf_tau=conv_tau)
    if "acdl" in chains:
        res = acdl_mod.acdl_process(r, calib.acdl_cfg, ofdm.oversample_factor,
                                    init_qtf=calib.warm_qtf)
        adc_a = resample(res.output, ofdm.fs_adc_hz)
        assert res.delay_samples % ofdm.oversample_factor == 0
        d = res.delay_samples // ofdm.oversample_factor
        out["acdl"] = demodulate(adc_a, ofdm, "modified",
                                 delay_samples=d + skip_pre, n_symbols=n_data,
                                 mf_tau=calib.acdl_cfg.tau_s)
    return out


def _trial_errors(link: LinkConfig, calib: LinkCalibration, trial_seed: int,
                  chains: tuple, thresholds: dict | None = None) -> dict:
    res = _trial_chain_bits(link, calib, trial_seed, chains, thresholds)
    sent = res.pop("sent")
    return {c: (int(np.count_nonzero(sent != b)), len(sent)) for c, b in res.items()}


def measure_output_snr(processed: SignalBuffer, reference: SignalBuffer,
                       band: tuple[float, float] | None = None, max_lag: int = 2,
                       lag_step: int = 1) -> float:
    """In-band SNR of a processed trace against its noise-free reference,
    10*log10(P_ref / P_(processed - reference)), capped at +100 dB.

    Both traces must come out of the same (delay-compensated) chain; a
    cross-correlation refinement over +-max_lag steps of ``lag_step`` samples
    absorbs residual jitter. ``lag_step`` should be about the converter-rate
    sample period when the buffers are at the oversampled emulation rate
    (the correlation top is flat at finer resolution). A peak pinned to the
    search edge means the compensated delay is wrong and raises.

    Raises:
        ValueError: rate mismatch, or misalignment beyond the refinement range.
    """
    if abs(processed.sample_rate - reference.sample_rate) > 1e-9 * reference.sample_rate:
        raise ValueError("sample rates differ")
    n = min(len(processed), len(reference))
    p = processed.samples[:n]
    q = reference.samples[:n]
    lags = [k * lag_step for k in range(-max_lag, max_lag + 1)]
    xc = [np.abs(np.vdot(q[max(0, -k):n - max(0, k)], p[max(0, k):n - max(0, -k)])) for k in lags]
    best = lags[int(np.argmax(xc))]
    if abs(best) == max_lag * lag_step and best != 0:
        raise ValueError(f"traces misaligned: correlation peak at search edge ({best} samples)")
    if best:
        p = p[max(0, best):n - max(0, -best)]
        q = q[max(0, -best):n - max(0, best)]
    err = SignalBuffer(p - q, processed.sample_rate)
    ref = SignalBuffer(q, processed.sample_rate)
    p_ref = measure_power(ref, band)
    p_err = measure_power(err, band)
    if p_err <= 0 or 10 * np.log10(p_ref / p_err) > 100.0:
        return 100.0
    return float(10 * np.log10(p_ref / p_err))


def _point_output_snr(link: LinkConfig, calib: LinkCalibration, seed: int) -> float:
    """Output SNR for the linear/adaptive chains on a dedicated short frame."""
    ofdm = link.ofdm
    n_sym = link.preamble_symbols + link.snr_symbols
    bits = _frame_bits(ofdm, n_sym, _seed_int(seed, 0x54A))
    tx = _modulate_frame(ofdm, bits)
    nz = noise_mod.realize_noise(link.noise, tx.duration, tx.sample_rate,
                                 calib.noise_targets, _seed_int(seed, 0x54B),
                                 n_samples=len(tx))
    r = tx.with_samples(tx.samples + nz.total(), "channel")
    over = ofdm.oversample_factor
    ref = acdl_mod.linear_chain_process(tx, calib.acdl_cfg, over, init_qtf=calib.warm_qtf)
    if link.chain == "acdl":
        proc = acdl_mod.acdl_process(r, calib.acdl_cfg, over, init_qtf=calib.warm_qtf)
    else:
        proc = acdl_mod.linear_chain_process(r, calib.acdl_cfg, over, init_qtf=calib.warm_qtf)
    skip = proc.delay_samples + link.preamble_symbols * ofdm.samples_per_symbol * over
    a = proc.output.with_samples(proc.output.samples[skip:])
    b = ref.output.with_samples(ref.output.samples[skip:])
    return measure_output_snr(a, b, band=ofdm.band_hz, lag_step=over)


def run_point(link: LinkConfig, seed: int, bits_min: int = 100_000,
              stop_at_errors: int | None = 100, max_trials: int | None = None,
              n_jobs: int = 1, axis_value: float = float("nan"),
              calib: LinkCalibration | None = None) -> RunResult:
    """Simulate one operating point to the requested confidence budget.

    Trials accumulate until ``bits_min`` bits or ``stop_at_errors`` errors,
    whichever comes first (checked at fixed batch boundaries so the result
    does not depend on the worker count). Returns BER with a 95% Wilson
    interval, plus the output SNR for the linear/adaptive chains.
    """
    t0 = time.perf_counter()
    if calib is None:
        calib = calibrate_link(link, seed)
    if link.chain in ("blanking", "clipping") and link.baseline_threshold is None:
        search = optimize_baseline_threshold(
            link, link.chain, seed,
            grid=bl.default_threshold_grid(1.0, link.threshold_grid_lo,
                                           link.threshold_grid_hi, link.threshold_grid_points),
            bits_budget=link.search_bits)
        link = link.replace(baseline_threshold=search["t_opt"])
        extra = {"threshold_rms": search["t_opt"], "search_floor_unresolved": search["floor_unresolved"]}
    else:
        extra = {}
        if link.chain in ("blanking", "clipping"):
            extra["threshold_rms"] = link.baseline_threshold

    errors = 0
    bits = 0
    trial = 0
    chains = (link.chain,)
    while True:
        batch = [trial + i for i in range(link.trial_batch)]
        if max_trials is not None:
            batch = [i for i in batch if i < max_trials]
            if not batch:
                break
        seeds = [_seed_int(seed, 0x7121A1, i) for i in batch]
        if n_jobs != 1 and len(batch) > 1:
            outs = Parallel(n_jobs=n_jobs)(
                delayed(_trial_errors)(link, calib, s, chains) for s in seeds)
        else:
            outs = [_trial_errors(link, calib, s, chains) for s in seeds]
        for o in outs:
            e, b = o[link.chain]
            errors += e
            bits += b
        trial += len(batch)
        if bits >= bits_min:
            break
        if stop_at_errors is not None and errors >= stop_at_errors:
            break

    snr = float("nan")
    if link.measure_snr and link.chain in ("linear", "acdl"):
        snr = _point_output_snr(link, calib, seed)
    ci_lo, ci_hi = binomial_ci(errors, bits)
    return RunResult(
        axis_value=axis_value, chain=link.chain, ber=errors / bits if bits else 0.0,
        ber_ci_lo=ci_lo, ber_ci_hi=ci_hi, snr_db=snr, errors=errors, bits=bits,
        seed=seed, wall_time_s=time.perf_counter() - t0, extra=extra)


def run_point_multi(link: LinkConfig, chains: tuple, seed: int, bits_min: int = 100_000,
                    stop_at_errors: int | None = None, n_jobs: int = 1,
                    thresholds: dict | None = None) -> dict:
    """Common-random-numbers comparison: run several chains over the same
    transmit frames and noise draws. Stops when the slowest-converging chain
    satisfies the budget. Returns {chain: RunResult}."""
    t0 = time.perf_counter()
    calib = calibrate_link(link, seed)
    tally = {c: [0, 0] for c in chains}
    trial = 0
    while True:
        batch_seeds = [_seed_int(seed, 0x7121A1, trial + i) for i in range(link.trial_batch)]
        if n_jobs != 1:
            outs = Parallel(n_jobs=n_jobs)(
                delayed(_trial_errors)(link, calib, s, tuple(chains), thresholds) for s in batch_seeds)
        else:
            outs = [_trial_errors(link, calib, s, tuple(chains), thresholds) for s in batch_seeds]
        for o in outs:
            for c in chains:
                tally[c][0] += o[c][0]
                tally[c][1] += o[c][1]
        trial += link.trial_batch
        bits = tally[chains[0]][1]
        if bits >= bits_min:
            break
        if stop_at_errors is not None and all(tally[c][0] >= stop_at_errors for c in chains):
            break
    results = {}
    for c in chains:
        e, b = tally[c]
        ci = binomial_ci(e, b)
        snr = float("nan")
        if link.measure_snr and c in ("linear", "acdl"):
            snr = _point_output_snr(link.replace(chain=c), calib, seed)
        results[c] = RunResult(float("nan"), c, e / b if b else 0.0, ci[0], ci[1],
                               snr, e, b, seed, time.perf_counter() - t0,
                               dict(thresholds or {}))
    return results


def optimize_baseline_thresholds(link: LinkConfig, kinds: tuple, seed: int,
                                 grid: np.ndarray | None = None,
                                 bits_budget: int = 200_000) -> dict:
    """Exhaustive threshold search at this operating point for one or both
    memoryless baselines. The trial set (frames and noise) is generated once
    and reused for every grid threshold and every kind (common random
    numbers). Returns {kind: search result}."""
    for kind in kinds:
        if kind not in ("blanking", "clipping"):
            raise ValueError("search applies to blanking/clipping chains")
    ofdm = link.ofdm
    calib = calibrate_link(link, seed)
    if grid is None:
        grid = bl.default_threshold_grid(1.0, 0.5, 20.0, 40)
    n_data = link.data_symbols_per_trial
    bps = ofdm.bits_per_ofdm_symbol
    n_trials = max(1, int(np.ceil(bits_budget / (n_data * bps))))
    skip_pre = link.preamble_symbols * ofdm.samples_per_symbol

    trials = []
    for i in range(n_trials):
        ts = _seed_int(seed, 0x7121A1, i)  # same seeds as the measurement runs
        n_total = link.preamble_symbols + n_data + link.pad_symbols
        bits_all = _frame_bits(ofdm, n_total, _seed_int(ts, 0x5ED))
        tx = _modulate_frame(ofdm, bits_all)
        nz = noise_mod.realize_noise(link.noise, tx.duration, tx.sample_rate,
                                     calib.noise_targets, _seed_int(ts, 0x402),
                                     n_samples=len(tx))
        r = tx.with_samples(tx.samples + nz.total(), "channel")
        adc, conv_delay = _conventional_front(r, calib.acdl_cfg, ofdm)
        lo = link.preamble_symbols * bps
        trials.append((adc, conv_delay, bits_all[lo:lo + n_data * bps]))

    out = {}
    for kind in kinds:
        def evaluate(threshold_rel: float, _kind=kind) -> tuple[int, int]:
            errors = 0
            total = 0
            for adc, conv_delay, sent in trials:
                cleaned = bl.apply_baseline(adc.samples, _kind, threshold_rel * calib.rms_adc)
                rx = demodulate(adc.with_samples(cleaned), ofdm, "standard",
                                delay_samples=conv_delay + skip_pre, n_symbols=n_data)
                errors += int(np.count_nonzero(sent != rx))
                total += len(sent)
            return errors, total

        spec = bl.ThresholdSearchSpec(grid=np.asarray(grid), trials_per_point=n_trials)
        out[kind] = bl.optimize_threshold(spec, evaluate)
    return out


def optimize_baseline_threshold(link: LinkConfig, kind: str, seed: int,
                                grid: np.ndarray | None = None,
                                bits_budget: int = 200_000) -> dict:
    """Single-kind wrapper around :func:`optimize_baseline_thresholds`."""
    return optimize_baseline_thresholds(link, (kind,), seed, grid, bits_budget)[kind]


# ---------------------------------------------------------------------------
# Sweeps and emission


def _apply_axis(link: LinkConfig, axis: str, value: float) -> LinkConfig:
    if axis == "eb_n0":
        return link.replace(noise=dataclasses.replace(link.noise, eb_n0_db=value))
    if axis == "sir":
        return link.replace(noise=dataclasses.replace(link.noise, sir_db=value))
    if axis == "beta":
        return link.replace(acdl=link.acdl.replace(beta=value))
    if axis == "threshold":
        return link.replace(baseline_threshold=value)
    raise ValueError(f"unknown axis {axis!r}")


def run_sweep(spec: SweepSpec, base_link: LinkConfig | None = None,
              n_jobs: int = 1) -> list[RunResult]:
    """One RunResult per axis value; per-point seeds derive from the base seed
    and the point index. Per-point failures are collected and re-raised after
    the surviving points complete (partial results preserved on the
    exception's ``results`` attribute)."""
    base = base_link if base_link is not None else LinkConfig()
    base = base.replace(chain=spec.chain)
    results: list[RunResult] = []
    failures: list[tuple[float, Exception]] = []
    for idx, value in enumerate(spec.values):
        link = _apply_axis(base, spec.axis, value)
        seed = _seed_int(spec.base_seed, 0xA01, idx)
        try:
            res = run_point(link, seed, bits_min=spec.bits_min,
                            stop_at_errors=spec.stop_at_errors,
                            max_trials=spec.max_trials, n_jobs=n_jobs,
                            axis_value=value)
            results.append(res)
        except Exception as exc:  # pragma: no cover - defensive aggregation
            failures.append((value, exc))
    results.sort(key=lambda r: r.axis_value)
    if failures:
        msg = "; ".join(f"axis={v}: {e}" for v, e in failures)
        err = RuntimeError(f"{len(failures)} sweep point(s) failed: {msg}")
        err.results = results
        raise err
    return results


_CSV_COLUMNS = ("axis_value", "ber", "ber_ci_lo", "ber_ci_hi", "snr_db", "bits", "seed")


def _config_snapshot(link: LinkConfig | None, spec: SweepSpec | None) -> dict:
    snap = {}
    if link is not None:
        snap["link"] = dataclasses.asdict(link)
    if spec is not None:
        snap["sweep"] = dataclasses.asdict(spec)

    def clean(obj):
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        if isinstance(obj, float) and not np.isfinite(obj):
            return repr(obj)
        return obj

    return clean(snap)


def config_hash(snapshot: dict) -> str:
    return hashlib.sha256(json.dumps(snapshot, sort_keys=True).encode()).hexdigest()


def emit_results(results: list[RunResult], fmt: str, path: str | Path,
                 link: LinkConfig | None = None, spec: SweepSpec | None = None) -> Path:
    """Write sweep results to CSV (stable column order) or JSON (same fields
    plus the full config snapshot and its hash). Deterministic byte-for-byte
    given (config, seed): volatile fields like wall time are excluded.

    Raises:
        ValueError: empty results (no file is created).
    """
    if not results:
        raise ValueError("no results to emit")
    path = Path(path)
    if fmt == "csv":
        lines = [",".join(_CSV_COLUMNS)]
        for r in results:
            row = [f"{r.axis_value:.10g}", f"{r.ber:.10g}", f"{r.ber_ci_lo:.10g}",
                   f"{r.ber_ci_hi:.10g}", f"{r.snr_db:.10g}", str(r.bits), str(r.seed)]
            lines.append(",".join(row))
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "json":
        snap = _config_snapshot(link, spec)
        payload = {
            "results": [
                {
                    "axis_value": r.axis_value, "chain": r.chain, "ber": r.ber,
                    "ber_ci_lo": r.ber_ci_lo, "ber_ci_hi": r.ber_ci_hi,
                    "snr_db": r.snr_db if np.isfinite(r.snr_db) else None,
                    "errors": r.errors, "bits": r.bits, "seed": r.seed,
                }
                for r in results
            ],
            "config": snap,
            "config_sha256": config_hash(snap),
        }
        path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def read_results_csv(path: str | Path) -> list[dict]:
    """Parse a CSV produced by :func:`emit_results` back into dicts."""
    import csv as _csv
    with Path(path).open() as fh:
        return [
            {k: (int(v) if k in ("bits", "seed") else float(v)) for k, v in row.items()}
            for row in _csv.DictReader(fh)
        ]
