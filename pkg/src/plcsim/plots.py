"""Matplotlib rendering of sweep results and probe traces to image files.

Figures are written next to the delimited output by the CLI report path; all
functions take explicit output paths and never open interactive windows.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy.stats import norm

from .signals import SignalBuffer, amplitude_histogram, estimate_psd

_AXIS_LABELS = {
    "eb_n0": "Eb/N0 (dB)",
    "sir": "SIR (dB)",
    "beta": "Tukey coefficient beta",
    "threshold": "threshold (x received RMS)",
}


def bpsk_awgn_reference(ebn0_db: np.ndarray) -> np.ndarray:
    """Closed-form BPSK-over-AWGN error rate, Q(sqrt(2 Eb/N0))."""
    return norm.sf(np.sqrt(2.0 * 10.0 ** (np.asarray(ebn0_db) / 10.0)))


def plot_ber_curve(results, path: str | Path, axis: str = "eb_n0",
                   title: str | None = None, show_reference: bool | None = None) -> Path:
    """Semilog BER waterfall with Wilson-interval error bars.

    ``results`` is a list of RunResult (or dicts with the same keys). The
    closed-form BPSK curve is drawn for Eb/N0 sweeps unless disabled.
    """
    rows = [r if isinstance(r, dict) else r.__dict__ for r in results]
    x = np.array([r["axis_value"] for r in rows])
    ber = np.array([r["ber"] for r in rows])
    lo = np.array([r["ber_ci_lo"] for r in rows])
    hi = np.array([r["ber_ci_hi"] for r in rows])

    fig, ax = plt.subplots(figsize=(7, 5))
    floor = max(1e-9, ber[ber > 0].min() / 10) if np.any(ber > 0) else 1e-9
    yerr = np.vstack([np.clip(ber - lo, 0, None), np.clip(hi - ber, 0, None)])
    ax.errorbar(x, np.maximum(ber, floor), yerr=yerr, fmt="o-", capsize=3,
                label=rows[0].get("chain", "measured"))
    if show_reference is None:
        show_reference = axis == "eb_n0"
    if show_reference and axis == "eb_n0":
        xg = np.linspace(x.min(), x.max(), 200)
        ax.plot(xg, bpsk_awgn_reference(xg), "k--", lw=1, label="BPSK AWGN closed form")
    ax.set_yscale("log")
    ax.set_xlabel(_AXIS_LABELS.get(axis, axis))
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_snr_curve(results, path: str | Path, axis: str = "sir",
                   title: str | None = None) -> Path:
    """Output-SNR curve over the sweep axis (points without SNR are skipped)."""
    rows = [r if isinstance(r, dict) else r.__dict__ for r in results]
    pts = [(r["axis_value"], r["snr_db"]) for r in rows if np.isfinite(r.get("snr_db", np.nan))]
    fig, ax = plt.subplots(figsize=(7, 5))
    if pts:
        x, y = zip(*sorted(pts))
        ax.plot(x, y, "s-")
    ax.set_xlabel(_AXIS_LABELS.get(axis, axis))
    ax.set_ylabel("output SNR (dB)")
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_probe_panels(probes: dict[str, SignalBuffer], path: str | Path,
                      max_time_samples: int = 20000, psd_segment: int = 8192,
                      hist_bins: int = 120) -> Path:
    """Per-probe rows of (time trace, amplitude density, PSD), mirroring the
    usual signal-inspection layout for the chain taps."""
    tags = list(probes)
    fig, axes = plt.subplots(len(tags), 3, figsize=(12, 2.2 * len(tags)), squeeze=False)
    for i, tag in enumerate(tags):
        buf = probes[tag]
        stride = max(1, len(buf) // max_time_samples)
        t = buf.time_axis()[::stride] * 1e3
        axes[i][0].plot(t, buf.samples.real[::stride], lw=0.4)
        axes[i][0].set_ylabel(tag, rotation=0, labelpad=18, fontsize=11)
        h = amplitude_histogram(buf, hist_bins)
        axes[i][1].semilogy(h.bin_centers, np.maximum(h.real_density, 1e-8), lw=0.8)
        est = estimate_psd(buf, min(psd_segment, len(buf)))
        axes[i][2].plot(est.frequencies / 1e3, est.psd_db, lw=0.5)
        axes[i][2].set_xlim(-2 * 250, 2 * 250)
        if i < len(tags) - 1:
            for a in axes[i]:
                a.set_xticklabels([])
    axes[-1][0].set_xlabel("time (ms)")
    axes[-1][1].set_xlabel("amplitude")
    axes[-1][2].set_xlabel("frequency (kHz)")
    axes[0][0].set_title("time trace (real rail)")
    axes[0][1].set_title("amplitude density")
    axes[0][2].set_title("PSD (dB/Hz)")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_qtf_convergence(aux: dict, sample_rate: float, path: str | Path) -> Path:
    """Quartile-tracker and clipping-window evolution (real rail)."""
    stride = aux["stride"]
    n = len(aux["q1_re"])
    t = np.arange(n) * stride / sample_rate * 1e3
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(t, aux["q3_re"], label="Q3")
    ax.plot(t, aux["q1_re"], label="Q1")
    lo = np.asarray(aux["lo_re"])
    hi = np.asarray(aux["hi_re"])
    m = np.isfinite(lo) & (np.abs(lo) < 1e100)
    ax.plot(t[m], hi[m], "g--", lw=0.8, label="window hi")
    ax.plot(t[m], lo[m], "r--", lw=0.8, label="window lo")
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("amplitude")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_report(results, csv_path: str | Path, axis: str) -> list[Path]:
    """Render the standard figures alongside an emitted CSV: BER curve always,
    SNR curve when any point carries one."""
    csv_path = Path(csv_path)
    out = [plot_ber_curve(results, csv_path.with_suffix(".png"), axis=axis)]
    rows = [r if isinstance(r, dict) else r.__dict__ for r in results]
    if any(np.isfinite(r.get("snr_db", np.nan)) for r in rows):
        out.append(plot_snr_curve(results, csv_path.with_name(csv_path.stem + "_snr.png"), axis=axis))
    return out
