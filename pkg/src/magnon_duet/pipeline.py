"""End-to-end runs: simulate, synthesize, analyse and write the output set."""

from __future__ import annotations

import json
import math
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (AnalysisError, extract_coupling, extrapolate_coupling, lz_report,
                       selftrap_derivative, write_coupling_csv)
from .integrator import Trajectory, detect_crossing, integrate, min_dressed_gap, \
    write_trajectory_csv
from .physics import TWO_PI
from .scenario import Scenario
from .signal import (SignalSeries, synthesize, write_signal_binary, write_signal_csv)
from .spectral import (MAIN_BULK, SIDEBAND_LOWER, SIDEBAND_UPPER, RidgeSet, classify_sidebands,
                       spectrogram, track_ridges, write_ridges_csv, write_spectrogram_csv)

# ridges are cropped this long after the crossing before labelling, so the
# tangle of traces at the anticrossing itself does not compete with the
# main traces
POST_CROSSING_DELAY = 0.5

LZ_FIELDS = ("predicted_fraction", "observed_fraction", "crossing_time_s",
             "crossing_rate_rad_s2", "coupling_fit_hz", "decay_only_rate_rad_s2",
             "decay_only_fraction", "rate_ratio", "window_s")


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


def spectral_analysis(sig: SignalSeries, scenario: Scenario, t_cross: float | None):
    """Spectrogram, labelled ridges and coupling estimates for one signal.

    Returns ``(spec, ridges, estimates, summary)`` where ``summary`` holds
    the coupling extrapolated to ``t_cross`` (or the median estimate when
    there is no crossing) and ridge bookkeeping.
    """
    raw = scenario.raw
    spec = spectrogram(sig, raw["window_s"], raw["hop_s"], raw["window"], f_max=raw["f_max_hz"])
    ridges = track_ridges(spec, raw["min_amp"], raw["max_hop_hz"])
    start = raw["analysis_start_s"]
    if start is None and t_cross is not None:
        start = t_cross + POST_CROSSING_DELAY
    if start is not None:
        ridges = ridges.crop(start, float(sig.times[-1]))
    ridges = classify_sidebands(ridges) if len(ridges) >= 2 else RidgeSet(ridges.ridges,
                                                                           "fewer than two ridges")
    sidebands = [r for r in ridges if r.label in (SIDEBAND_UPPER, SIDEBAND_LOWER)]
    summary = {"n_ridges": len(ridges), "sideband_detected": bool(sidebands),
               "analysis_start_s": _finite_or_none(start), "coupling_extracted_hz": None,
               "coupling_note": ""}
    estimates = []
    bulk = [r for r in ridges if r.label == MAIN_BULK]
    if sidebands and bulk:
        try:
            deriv = selftrap_derivative(bulk[0])
            estimates = extract_coupling(ridges, deriv)
        except AnalysisError as exc:
            summary["coupling_note"] = str(exc)
        valid = [e.omega_est for e in estimates if e.valid]
        if valid:
            if t_cross is not None:
                est = extrapolate_coupling(estimates, t_cross)
            else:
                est = float(np.median(valid))
            summary["coupling_extracted_hz"] = _finite_or_none(est / TWO_PI)
    elif not sidebands:
        summary["coupling_note"] = "no sideband ridge"
    return spec, ridges, estimates, summary


def simulate(scenario: Scenario) -> Trajectory:
    return integrate(scenario.params, scenario.initial, scenario.schedule,
                     t_end=scenario.t_end, rel_tol=scenario["rel_tol"],
                     abs_tol=scenario["abs_tol"], sample_rate=scenario["trajectory_rate_hz"],
                     max_steps=scenario["max_steps"])


def physics_report(traj: Trajectory, scenario: Scenario) -> dict:
    """Crossing, Landau-Zener and gap quantities; missing values are None."""
    out = {key: None for key in LZ_FIELDS}
    out.update(crossing_found=False, min_gap_hz=None, min_gap_time_s=None, lz_note="")
    crossing = detect_crossing(traj)
    if crossing.found:
        out["crossing_found"] = True
        out["crossing_time_s"] = crossing.t_cross
        out["crossing_rate_rad_s2"] = crossing.rate
        try:
            out.update(lz_report(traj, scenario.params).to_dict())
        except AnalysisError as exc:
            out["lz_note"] = str(exc)
        t_gap, gap = min_dressed_gap(traj)
        out["min_gap_time_s"], out["min_gap_hz"] = t_gap, gap / TWO_PI
    else:
        out["lz_note"] = "no undressed crossing"
    out.pop("coupling_extracted_hz", None)
    return out


def metadata(scenario: Scenario, traj: Trajectory | None = None) -> dict:
    import matplotlib
    import scipy

    meta = {"scenario": scenario.raw, "seed": scenario["seed"],
            "versions": {"magnon_duet": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "matplotlib": matplotlib.__version__,
                         "python": platform.python_version()}}
    if traj is not None and traj.step_stats is not None:
        s = traj.step_stats
        meta["integration"] = {"accepted_steps": s.accepted, "rejected_steps": s.rejected,
                               "max_norm_drift": s.max_norm_drift,
                               "local_error_sum": s.local_error_sum,
                               "samples": int(traj.t.size)}
    return meta


def write_json(data, path) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def run_simulation(scenario: Scenario, out_dir, plots: bool = True) -> dict:
    """Full run into ``out_dir``; returns the report dictionary.

    Raises :class:`magnon_duet.integrator.IntegrationError` on integrator
    failure and ``OSError`` on file-system errors.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj = simulate(scenario)
    report = {"scenario": scenario["name"]}
    report.update(physics_report(traj, scenario))
    sig = synthesize(traj, scenario.params, scenario["sample_rate_hz"],
                     noise_rms=scenario["noise_rms"], seed=scenario["seed"])
    t_cross = report["crossing_time_s"] if report["crossing_found"] else None
    spec, ridges, estimates, summary = spectral_analysis(sig, scenario, t_cross)
    report.update(summary)

    write_trajectory_csv(traj, out / "trajectory.csv")
    write_signal_csv(sig, out / "signal.csv")
    write_signal_binary(sig, out / "signal.bin")
    write_spectrogram_csv(spec, out / "spectrogram.csv")
    write_ridges_csv(ridges, out / "ridges.csv")
    write_coupling_csv(estimates, out / "coupling.csv")
    write_json(report, out / "report.json")
    write_json(metadata(scenario, traj), out / "metadata.json")
    if plots:
        from .plotting import plot_frequencies, plot_populations, plot_spectrogram

        plot_spectrogram(spec, ridges, out / "spectrogram.svg")
        plot_populations(traj, out / "populations.svg")
        plot_frequencies(traj, out / "frequencies.svg")
    return report


def run_analysis(sig: SignalSeries, scenario: Scenario, out_dir, plots: bool = True) -> dict:
    """Spectral and coupling analysis of an existing signal into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_cross = scenario["crossing_time_hint_s"]
    spec, ridges, estimates, summary = spectral_analysis(sig, scenario, t_cross)
    report = {"scenario": scenario["name"], "crossing_time_hint_s": t_cross}
    report.update(summary)
    write_spectrogram_csv(spec, out / "spectrogram.csv")
    write_ridges_csv(ridges, out / "ridges.csv")
    write_coupling_csv(estimates, out / "coupling.csv")
    write_json(report, out / "report.json")
    write_json(metadata(scenario), out / "metadata.json")
    if plots:
        from .plotting import plot_spectrogram

        plot_spectrogram(spec, ridges, out / "spectrogram.svg")
    return report
