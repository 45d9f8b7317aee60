"""Numerical simulator of an OFDM powerline link with impulsive noise and an
adaptive analog nonlinear front end (ACDL) emulated at an oversampled rate.

Subpackage layout:

- ``signals``    complex-baseband buffers, rate conversion, power/PSD/histogram
- ``ofdm``       PRIME-style OFDM transmitter, matched filters, demodulator
- ``noise``      thermal + cyclostationary + asynchronous noise synthesis
- ``acdl``       the adaptive canonical differential limiter and its linear twin
- ``baselines``  memoryless blanking/clipping with threshold search
- ``harness``    Monte Carlo sweeps, BER/SNR metrics, result emission
- ``plots``      matplotlib rendering of sweep results and probe traces
"""

from .signals import SignalBuffer, SpectrumEstimate, measure_power, estimate_psd, resample, amplitude_histogram
from .ofdm import OfdmConfig, BitFrame, map_bits, ofdm_modulate, matched_filter_taps, modified_matched_filter_taps, demodulate, count_ber
from .noise import NoiseConfig, NoiseRealization, gen_awgn, gen_cyclostationary, gen_asynchronous, shape_psd, calibrate
from .acdl import AcdlConfig, CmtfState, QtfState, clip, cmtf_step, qtf_step, tukey_range, front_end_lowpass, acdl_process, linear_chain_process, agc_tune
from .baselines import ThresholdSearchSpec, blank, clip_baseline, optimize_threshold
from .harness import SweepSpec, RunResult, run_point, run_sweep, measure_output_snr, emit_results

__all__ = [
    "SignalBuffer", "SpectrumEstimate", "measure_power", "estimate_psd", "resample", "amplitude_histogram",
    "OfdmConfig", "BitFrame", "map_bits", "ofdm_modulate", "matched_filter_taps",
    "modified_matched_filter_taps", "demodulate", "count_ber",
    "NoiseConfig", "NoiseRealization", "gen_awgn", "gen_cyclostationary", "gen_asynchronous",
    "shape_psd", "calibrate",
    "AcdlConfig", "CmtfState", "QtfState", "clip", "cmtf_step", "qtf_step", "tukey_range",
    "front_end_lowpass", "acdl_process", "linear_chain_process", "agc_tune",
    "ThresholdSearchSpec", "blank", "clip_baseline", "optimize_threshold",
    "SweepSpec", "RunResult", "run_point", "run_sweep", "measure_output_snr", "emit_results",
]

__version__ = "0.1.0"
