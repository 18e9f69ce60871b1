"""Figure rendering for CLI reports.  All functions write PNG files."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence as SequenceABC

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .readout import CalibrationRound, FID, Spectrum

__all__ = [
    "save_fid_plot",
    "save_spectrum_plot",
    "save_calibration_plot",
    "save_sweep_plot",
]

_DPI = 150


def save_fid_plot(fid: FID, path: str | Path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(7.0, 3.5))
    ax.plot(fid.times_s * 1e3, fid.samples.real, lw=0.8, label="real")
    ax.plot(fid.times_s * 1e3, fid.samples.imag, lw=0.8, alpha=0.7, label="imag")
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("signal")
    ax.legend(frameon=False)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return Path(path)


def save_spectrum_plot(
    spec: Spectrum,
    path: str | Path,
    title: str = "",
    window_hz: tuple[float, float] | None = None,
) -> Path:
    fig, ax = plt.subplots(figsize=(7.0, 3.5))
    ax.plot(spec.freqs_hz, spec.values.real, lw=0.9)
    ax.axhline(0.0, color="0.6", lw=0.6)
    if window_hz is not None:
        ax.set_xlim(*window_hz)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("real part")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return Path(path)


def save_calibration_plot(
    history: SequenceABC[CalibrationRound], path: str | Path, title: str = ""
) -> Path:
    rounds = [row.round for row in history]
    residuals = [row.residual_deg for row in history]
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    ax.plot(rounds, residuals, "o-")
    ax.axhline(0.0, color="0.6", lw=0.6)
    ax.set_xlabel("measurement round")
    ax.set_ylabel("residual (deg)")
    ax.set_xticks(rounds)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return Path(path)


def save_sweep_plot(
    rows: Iterable[tuple[float, float, float, float]],
    path: str | Path,
    title: str = "",
) -> Path:
    data = np.array(list(rows))
    fig, axes = plt.subplots(2, 1, figsize=(7.0, 5.5), sharex=True)
    axes[0].plot(data[:, 0], data[:, 1], lw=0.9, label="sin channel")
    axes[0].plot(data[:, 0], data[:, 2], lw=0.9, label="cos channel")
    axes[0].set_ylabel("signal")
    axes[0].legend(frameon=False)
    axes[1].plot(data[:, 0], data[:, 3], lw=0.9)
    axes[1].plot(data[:, 0], data[:, 0], "--", color="0.6", lw=0.7)
    axes[1].set_xlabel("setting (deg)")
    axes[1].set_ylabel("estimate (deg)")
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return Path(path)
