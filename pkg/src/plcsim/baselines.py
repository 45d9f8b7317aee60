"""Memoryless nonlinearity baselines: blanking and magnitude clipping at the
receiver's grid-rate input, with exhaustive threshold search.

Both nonlinearities are phase preserving and idempotent. The search evaluates
every grid threshold against a caller-supplied evaluator so the surrounding
harness can hold the Monte Carlo trials (and their seeds) fixed across the
grid: common random numbers keep the BER-vs-threshold curve smooth and the
argmin stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def blank(r: np.ndarray | complex, threshold: float) -> np.ndarray | complex:
    """Zero every sample whose magnitude exceeds the threshold.

    Raises:
        ValueError: non-positive threshold.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if np.isscalar(r):
        return 0j if abs(r) > threshold else r
    r = np.asarray(r)
    out = r.copy()
    out[np.abs(r) > threshold] = 0
    return out


def clip_baseline(r: np.ndarray | complex, threshold: float) -> np.ndarray | complex:
    """Clamp magnitudes to the threshold, preserving phase.

    Raises:
        ValueError: non-positive threshold.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if np.isscalar(r):
        m = abs(r)
        return r if m <= threshold else r * (threshold / m)
    r = np.asarray(r)
    mag = np.abs(r)
    out = r.copy()
    over = mag > threshold
    out[over] = r[over] * (threshold / mag[over])
    return out


def apply_baseline(r: np.ndarray, kind: str, threshold: float) -> np.ndarray:
    """Dispatch helper: kind in {'none', 'blanking', 'clipping'}."""
    if kind == "none":
        return r
    if kind == "blanking":
        return blank(r, threshold)
    if kind == "clipping":
        return clip_baseline(r, threshold)
    raise ValueError(f"unknown baseline kind {kind!r}")


@dataclass(frozen=True)
class ThresholdSearchSpec:
    """Threshold grid (amplitude units; typically multiples of received RMS)
    plus the Monte Carlo budget for each grid point."""

    grid: np.ndarray
    metric: str = "ber"
    trials_per_point: int = 1

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.size == 0:
            raise ValueError("threshold grid must be non-empty")
        if np.any(np.diff(g) <= 0):
            raise ValueError("threshold grid must be strictly increasing")
        if self.metric != "ber":
            raise ValueError(f"unsupported metric {self.metric!r}")
        object.__setattr__(self, "grid", g)


def default_threshold_grid(rms: float = 1.0, lo: float = 0.5, hi: float = 20.0,
                           points: int = 40) -> np.ndarray:
    """Logarithmic grid from lo*rms to hi*rms."""
    return rms * np.logspace(np.log10(lo), np.log10(hi), points)


def optimize_threshold(spec: ThresholdSearchSpec, evaluate) -> dict:
    """Exhaustive search over the grid for the minimum-BER threshold.

    ``evaluate(threshold)`` must return ``(errors, bits)`` counted over the
    same trial set for every call (common random numbers). Ties break to the
    smallest threshold. Grid points that produce zero errors are flagged: the
    budget cannot resolve the BER floor there.

    Returns a dict with ``t_opt``, ``ber_at_opt`` and the full per-threshold
    curve for reporting.
    """
    bers = np.empty(len(spec.grid))
    errors = np.empty(len(spec.grid), dtype=np.int64)
    bits = np.empty(len(spec.grid), dtype=np.int64)
    for i, t in enumerate(spec.grid):
        e, b = evaluate(float(t))
        if b <= 0:
            raise ValueError(f"evaluator returned no bits at threshold {t}")
        errors[i] = e
        bits[i] = b
        bers[i] = e / b
    best = int(np.argmin(bers))  # argmin returns the first (smallest T) on ties
    zero_pts = spec.grid[errors == 0]
    return {
        "t_opt": float(spec.grid[best]),
        "ber_at_opt": float(bers[best]),
        "grid": spec.grid.copy(),
        "ber_curve": bers,
        "errors": errors,
        "bits": bits,
        "zero_error_thresholds": zero_pts,
        "floor_unresolved": bool(len(zero_pts)),
    }
