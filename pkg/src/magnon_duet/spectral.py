"""Windowed Fourier analysis, ridge tracking and sideband labelling."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .signal import SignalSeries

MAIN_BULK = "main_bulk"
MAIN_SURFACE = "main_surface"
SIDEBAND_UPPER = "sideband_upper"
SIDEBAND_LOWER = "sideband_lower"
UNKNOWN = "unknown"
LABELS = (MAIN_BULK, MAIN_SURFACE, SIDEBAND_UPPER, SIDEBAND_LOWER, UNKNOWN)

WINDOWS = ("hann", "gauss")


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Amplitude-calibrated magnitude STFT.

    ``magnitudes[i, j]`` belongs to ``time_bins[i]`` (window centre, s) and
    ``freq_bins[j]`` (Hz).  A stationary tone of amplitude A gives a peak of
    height A.  ``resolution_hz`` is the reciprocal window length; bins are
    spaced more finely when the transform is zero-padded.
    """

    time_bins: np.ndarray
    freq_bins: np.ndarray
    magnitudes: np.ndarray
    resolution_hz: float
    window: str = "hann"

    @property
    def bin_spacing(self) -> float:
        return float(self.freq_bins[1] - self.freq_bins[0])


def _window(kind: str, n: int) -> np.ndarray:
    if kind == "hann":
        return np.hanning(n)
    if kind == "gauss":
        x = np.arange(n) - 0.5 * (n - 1)
        return np.exp(-0.5 * (x / (n / 8.0)) ** 2)
    raise ValueError(f"unknown window {kind!r}; expected one of {WINDOWS}")


def spectrogram(sig: SignalSeries, window_len: float = 0.5, hop: float = 0.05,
                window: str = "hann", pad_factor: int = 4, f_max: float | None = None) -> Spectrogram:
    """Magnitude STFT of ``sig`` with window-gain compensation.

    Parameters
    ----------
    window_len, hop : float
        Window length and frame advance in seconds (``hop <= window_len``).
    window : {"hann", "gauss"}
        Taper; the Gaussian has standard deviation of one eighth of the window.
    pad_factor : int
        Zero-padding factor of the FFT (finer bin spacing, same resolution).
    f_max : float, optional
        Drop bins above this frequency (Hz).
    """
    fs = sig.sample_rate
    n_win = int(round(window_len * fs))
    n_hop = int(round(hop * fs))
    if n_win < 16:
        raise ValueError("window must span at least 16 samples")
    if hop > window_len or n_hop < 1:
        raise ValueError("hop must be positive and not exceed the window length")
    if sig.samples.size < n_win:
        raise ValueError("signal shorter than one window")
    w = _window(window, n_win)
    frames = sliding_window_view(sig.samples, n_win)[::n_hop]
    nfft = n_win * max(1, int(pad_factor))
    freqs = np.fft.rfftfreq(nfft, 1.0 / fs)
    keep = freqs.size if f_max is None else int(np.searchsorted(freqs, f_max, side="right"))
    spec = np.fft.rfft(frames * w, n=nfft, axis=1)[:, :keep]
    mags = np.abs(spec) * (2.0 / w.sum())
    starts = np.arange(frames.shape[0]) * n_hop
    times = sig.start_time + (starts + 0.5 * (n_win - 1)) / fs
    return Spectrogram(time_bins=times, freq_bins=freqs[:keep], magnitudes=mags,
                       resolution_hz=fs / n_win, window=window)


@dataclass(frozen=True, eq=False)
class Ridge:
    """One time-frequency trace (frequencies in Hz)."""

    t: np.ndarray
    freq: np.ndarray
    amp: np.ndarray
    label: str = UNKNOWN

    def __len__(self):
        return self.t.size

    @property
    def span(self):
        return float(self.t[0]), float(self.t[-1])

    @property
    def integrated_amp(self) -> float:
        return float(np.sum(self.amp))

    def freq_at(self, t):
        return _interp_inside(t, self.t, self.freq)

    def amp_at(self, t):
        return _interp_inside(t, self.t, self.amp)

    def crop(self, t_start, t_end) -> "Ridge | None":
        keep = (self.t >= t_start) & (self.t <= t_end)
        if not np.any(keep):
            return None
        return replace(self, t=self.t[keep], freq=self.freq[keep], amp=self.amp[keep])


def _interp_inside(t, ts, ys):
    t = np.asarray(t, dtype=float)
    out = np.interp(t, ts, ys)
    out = np.where((t < ts[0]) | (t > ts[-1]), np.nan, out)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class RidgeSet:
    ridges: tuple = ()
    warning: str | None = None

    def __len__(self):
        return len(self.ridges)

    def __iter__(self):
        return iter(self.ridges)

    def labelled(self, label):
        return [r for r in self.ridges if r.label == label]

    def crop(self, t_start, t_end) -> "RidgeSet":
        kept = [r.crop(t_start, t_end) for r in self.ridges]
        return RidgeSet(tuple(r for r in kept if r is not None), self.warning)


def _frame_peaks(mags, freqs, min_amp):
    """Local maxima above ``min_amp`` with log-parabolic refinement."""
    inner = mags[1:-1]
    idx = np.nonzero((inner > mags[:-2]) & (inner >= mags[2:]) & (inner >= min_amp))[0] + 1
    if idx.size == 0:
        return np.empty(0), np.empty(0)
    with np.errstate(divide="ignore"):
        a, b, c = (np.log(np.maximum(mags[idx + s], 1e-300)) for s in (-1, 0, 1))
    denom = a - 2 * b + c
    delta = np.where(denom < 0, 0.5 * (a - c) / np.where(denom < 0, denom, 1.0), 0.0)
    delta = np.clip(delta, -0.5, 0.5)
    df = freqs[1] - freqs[0]
    return freqs[idx] + delta * df, np.exp(b - 0.25 * (a - c) * delta)


def track_ridges(spec: Spectrogram, min_amp: float, max_hop: float,
                 min_length: int = 3) -> RidgeSet:
    """Greedy peak chaining through the spectrogram.

    In every frame the local maxima above ``min_amp`` are taken in order of
    decreasing amplitude and attached to the nearest ridge alive in the
    previous frame whose last frequency is within ``max_hop`` Hz; otherwise
    they start a new ridge.  Ridges shorter than ``min_length`` frames are
    discarded.
    """
    active: list[dict] = []
    finished: list[dict] = []
    for i, t in enumerate(spec.time_bins):
        freqs, amps = _frame_peaks(spec.magnitudes[i], spec.freq_bins, min_amp)
        order = np.argsort(-amps, kind="stable")
        taken = set()
        new_active = []
        for j in order:
            f = freqs[j]
            best, best_d = None, None
            for k, r in enumerate(active):
                if k in taken:
                    continue
                d = abs(r["f"][-1] - f)
                if d <= max_hop and (best_d is None or d < best_d):
                    best, best_d = k, d
            if best is None:
                new_active.append({"t": [t], "f": [f], "a": [amps[j]]})
            else:
                taken.add(best)
                r = active[best]
                r["t"].append(t)
                r["f"].append(f)
                r["a"].append(amps[j])
                new_active.append(r)
        finished.extend(r for k, r in enumerate(active) if k not in taken)
        active = new_active
    finished.extend(active)
    ridges = [Ridge(np.array(r["t"]), np.array(r["f"]), np.array(r["a"]))
              for r in finished if len(r["t"]) >= min_length]
    ridges.sort(key=lambda r: (r.t[0], r.freq[0]))
    return RidgeSet(tuple(ridges))


def _overlap_times(a: Ridge, b: Ridge):
    lo, hi = max(a.t[0], b.t[0]), min(a.t[-1], b.t[-1])
    ts = a.t[(a.t >= lo) & (a.t <= hi)]
    return ts


def _sideband_label(r: Ridge, bulk: Ridge, surface: Ridge, tolerance, min_fraction) -> str:
    fb, fs = bulk.freq_at(r.t), surface.freq_at(r.t)
    both = np.isfinite(fb) & np.isfinite(fs)
    if np.count_nonzero(both) < 2:
        return UNKNOWN
    sep = np.abs(r.freq[both] - fb[both])
    expected = np.abs(fb[both] - fs[both])
    away = np.sign(r.freq[both] - fb[both]) == np.sign(fb[both] - fs[both])
    match = away & (np.abs(sep - expected) <= tolerance * expected)
    if np.mean(match) < min_fraction:
        return UNKNOWN
    return SIDEBAND_UPPER if np.median(r.freq[both] - fb[both]) > 0 else SIDEBAND_LOWER


def classify_sidebands(ridges: RidgeSet, tolerance: float = 0.15,
                       min_fraction: float = 0.7) -> RidgeSet:
    """Label the main bulk/surface traces and the sidebands of the bulk trace.

    The two ridges with the largest integrated amplitude are the main
    traces; of these the bulk is the one whose frequency varies most where
    both exist.  When neither varies by more than a tenth of the matching
    tolerance (stationary signals) the bulk is instead the trace whose
    far-side companions carry the larger amplitude.

    Another ridge is a bulk sideband when its offset from the bulk trace
    equals the main-trace separation within ``tolerance`` (relative) over
    at least ``min_fraction`` of the time both main traces are present.
    Only sidebands on the side away from the surface trace are labelled;
    the opposite one falls on the surface trace itself.  Existing labels
    are ignored, so the operation is idempotent.
    """
    if len(ridges) < 2:
        warnings.warn("fewer than two ridges; sidebands not classified", stacklevel=2)
        return RidgeSet(ridges.ridges, warning="fewer than two ridges")
    ranked = sorted(ridges.ridges, key=lambda r: -r.integrated_amp)
    m1, m2 = ranked[0], ranked[1]
    overlap = _overlap_times(m1, m2)
    if overlap.size >= 2:
        spread1 = np.ptp(m1.freq_at(overlap))
        spread2 = np.ptp(m2.freq_at(overlap))
        separation = float(np.median(np.abs(m1.freq_at(overlap) - m2.freq_at(overlap))))
    else:
        spread1, spread2 = np.ptp(m1.freq), np.ptp(m2.freq)
        separation = abs(float(np.median(m1.freq) - np.median(m2.freq)))
    others = [r for r in ridges.ridges if r is not m1 and r is not m2]

    def companions(bulk, surface):
        return sum(r.integrated_amp for r in others
                   if _sideband_label(r, bulk, surface, tolerance, min_fraction) != UNKNOWN)

    if max(spread1, spread2) <= 0.1 * tolerance * separation:
        first = companions(m1, m2) >= companions(m2, m1)
    else:
        first = spread1 >= spread2
    bulk, surface = (m1, m2) if first else (m2, m1)

    out = []
    for r in ridges.ridges:
        if r is bulk:
            label = MAIN_BULK
        elif r is surface:
            label = MAIN_SURFACE
        else:
            label = _sideband_label(r, bulk, surface, tolerance, min_fraction)
        out.append(replace(r, label=label))
    return RidgeSet(tuple(out), ridges.warning)


def write_spectrogram_csv(spec: Spectrogram, path) -> None:
    """First row: frequency bins (Hz) after an empty corner cell; first column: times (s)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + [repr(float(f)) for f in spec.freq_bins])
        for t, row in zip(spec.time_bins, spec.magnitudes):
            writer.writerow([repr(float(t))] + [f"{v:.10g}" for v in row])


def read_spectrogram_csv(path) -> Spectrogram:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    freqs = np.array([float(v) for v in rows[0][1:]])
    times = np.array([float(r[0]) for r in rows[1:]])
    mags = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return Spectrogram(times, freqs, mags, resolution_hz=float("nan"))


def write_ridges_csv(ridges: RidgeSet, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t", "freq_hz", "amp", "label"))
        for r in ridges.ridges:
            for t, f, a in zip(r.t, r.freq, r.amp):
                writer.writerow((repr(float(t)), repr(float(f)), repr(float(a)), r.label))


def read_ridges_csv(path) -> RidgeSet:
    """Rebuild ridges from rows; consecutive rows with rising time form a ridge."""
    groups: list[dict] = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            t = float(row["t"])
            if not groups or t <= groups[-1]["t"][-1] or row["label"] != groups[-1]["label"]:
                groups.append({"t": [], "f": [], "a": [], "label": row["label"]})
            g = groups[-1]
            g["t"].append(t)
            g["f"].append(float(row["freq_hz"]))
            g["a"].append(float(row["amp"]))
    return RidgeSet(tuple(Ridge(np.array(g["t"]), np.array(g["f"]), np.array(g["a"]), g["label"])
                          for g in groups))
