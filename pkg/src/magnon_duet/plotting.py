"""Static SVG figures for a simulation run.

All figures are written with a fixed hash salt and no date stamp so that
repeated runs produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .integrator import Trajectory  # noqa: E402
from .physics import TWO_PI  # noqa: E402
from .spectral import MAIN_BULK, MAIN_SURFACE, UNKNOWN, RidgeSet, Spectrogram  # noqa: E402

_RC = {"svg.hashsalt": "magnon-duet", "svg.fonttype": "path", "figure.dpi": 100}


def _save(fig, path):
    with plt.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def plot_spectrogram(spec: Spectrogram, ridges: RidgeSet | None, path, floor_db=-60.0):
    """Heat map of the magnitudes in dB relative to the maximum, with labelled ridges."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4))
        mags = np.asarray(spec.magnitudes)
        peak = float(mags.max()) if mags.size and mags.max() > 0 else 1.0
        with np.errstate(divide="ignore"):
            db = np.maximum(20 * np.log10(mags / peak), floor_db)
        extent = (spec.time_bins[0], spec.time_bins[-1], spec.freq_bins[0], spec.freq_bins[-1])
        im = ax.imshow(db.T, origin="lower", aspect="auto", extent=extent, cmap="magma",
                       vmin=floor_db, vmax=0.0, interpolation="nearest")
        fig.colorbar(im, ax=ax, label="magnitude (dB)")
        if ridges is not None:
            for r in ridges:
                if r.label == UNKNOWN:
                    continue
                style = "-" if r.label in (MAIN_BULK, MAIN_SURFACE) else "--"
                ax.plot(r.t, r.freq, style, lw=0.8, label=r.label)
            if any(r.label != UNKNOWN for r in ridges):
                ax.legend(loc="upper right", fontsize="small")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("frequency (Hz)")
    _save(fig, path)


def plot_populations(traj: Trajectory, path):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 3.5))
        ax.plot(traj.t, traj.n_b, lw=0.8, label="bulk")
        ax.plot(traj.t, traj.n_s, lw=0.8, label="surface")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("population")
        ax.legend(loc="upper right")
    _save(fig, path)


def plot_frequencies(traj: Trajectory, path):
    """Undressed (solid) and dressed (dotted) level frequencies in Hz."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 3.5))
        ax.plot(traj.t, traj.omega_b / TWO_PI, lw=0.8, label="bulk (undressed)")
        ax.plot(traj.t, traj.omega_s / TWO_PI, lw=0.8, label="surface (undressed)")
        ax.plot(traj.t, traj.dressed_lo / TWO_PI, ":", lw=0.8, label="dressed")
        ax.plot(traj.t, traj.dressed_hi / TWO_PI, ":", lw=0.8, color="C2")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("frequency (Hz)")
        ax.legend(loc="upper right", fontsize="small")
    _save(fig, path)
