"""Observables extracted from simulated trajectories and analysed signals."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .integrator import PROGRAMMED, Schedule, Trajectory, detect_crossing, integrate
from .physics import (TWO_PI, SystemParams, TwoLevelState, bulk_frequency_slope,
                      lz_transfer_fraction)
from .spectral import (MAIN_BULK, MAIN_SURFACE, SIDEBAND_LOWER, SIDEBAND_UPPER, Ridge,
                       RidgeSet)

# two-slope model must cut the residual RMS by this fraction to report a kink
KINK_IMPROVEMENT = 0.20


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SelftrapDerivative:
    """``slope[i]`` is d(omega_b)/d(A_b^2) at ``t[i]`` (rad/s per amplitude^2)."""

    t: np.ndarray
    amp2: np.ndarray
    slope: np.ndarray

    def at(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.t, self.slope)
        return np.where((t < self.t[0]) | (t > self.t[-1]), np.nan, out)


def _local_quadratic_slope(x, y, frac):
    n = x.size
    q = min(n, max(5, int(math.ceil(frac * n))))
    slopes = np.empty(n)
    for i, x0 in enumerate(x):
        dist = np.abs(x - x0)
        idx = np.argsort(dist, kind="stable")[:q]
        dmax = dist[idx].max() * 1.0001
        if dmax == 0:
            raise AnalysisError("degenerate amplitude values in ridge")
        w = (1 - (dist[idx] / dmax) ** 3) ** 3
        dx = x[idx] - x0
        design = np.column_stack([np.ones(q), dx, dx * dx])
        sw = np.sqrt(w)
        coef, *_ = np.linalg.lstsq(design * sw[:, None], y[idx] * sw, rcond=None)
        slopes[i] = coef[1]
    return slopes


def selftrap_derivative(bulk_ridge: Ridge, bandwidth: float = 0.3,
                        monotone_tol: float = 0.02) -> SelftrapDerivative:
    """Derivative of the bulk frequency with respect to squared amplitude.

    Fits ``omega_b`` as a smooth function of ``A_b**2`` by local quadratic
    regression (tricube weights over the nearest ``bandwidth`` fraction of
    points) and differentiates the fit.

    Raises
    ------
    AnalysisError
        With fewer than 10 points, or when ``A_b**2`` is not monotone in time
        (excursions against the trend larger than ``monotone_tol`` of the
        range).
    """
    if len(bulk_ridge) < 10:
        raise AnalysisError("need at least 10 ridge points")
    x = np.asarray(bulk_ridge.amp, dtype=float) ** 2
    y = TWO_PI * np.asarray(bulk_ridge.freq, dtype=float)
    span = np.ptp(x)
    if span == 0:
        raise AnalysisError("ridge amplitude is constant")
    trend = np.sign(x[-1] - x[0])
    if trend >= 0:
        excursion = np.max(np.maximum.accumulate(x) - x)
    else:
        excursion = np.max(x - np.minimum.accumulate(x))
    if excursion > monotone_tol * span:
        raise AnalysisError("squared amplitude is not monotone in time")
    slope = _local_quadratic_slope(x, y, bandwidth)
    return SelftrapDerivative(t=np.asarray(bulk_ridge.t, dtype=float), amp2=x, slope=slope)


@dataclass(frozen=True)
class CouplingEstimate:
    t: float
    omega_est: float
    a_sb: float
    a_b: float
    a_s: float
    detuning: float
    slope: float
    valid: bool = True


def _pick(ridges: RidgeSet, *labels):
    found = [r for r in ridges.ridges if r.label in labels]
    return max(found, key=lambda r: r.integrated_amp) if found else None


def extract_coupling(ridges: RidgeSet, deriv: SelftrapDerivative,
                     min_separation_hz: float = 0.0, slope_floor: float = 1e-9
                     ) -> list[CouplingEstimate]:
    """Coupling from sideband and main-trace amplitudes, point by point.

    ``coupling = A_sb (w_b - w_s)^2 / (A_b^2 A_s |d w_b / d A_b^2|)``,
    i.e. the linearised first-sideband ratio ``A_sb / A_b = m / 2`` with the
    modulation index built from the Josephson population amplitude of
    :func:`magnon_duet.physics.josephson_amplitude`.  The estimate is
    independent of the (common) filling factor.  Points where the slope is
    below ``slope_floor`` or the traces are closer than ``min_separation_hz``
    are returned with ``valid=False`` and a NaN estimate.
    """
    bulk = _pick(ridges, MAIN_BULK)
    surface = _pick(ridges, MAIN_SURFACE)
    side = _pick(ridges, SIDEBAND_UPPER, SIDEBAND_LOWER)
    if bulk is None or surface is None or side is None:
        raise AnalysisError("need labelled bulk, surface and sideband ridges")
    out = []
    for t, a_sb in zip(side.t, side.amp):
        a_b, a_s = bulk.amp_at(t), surface.amp_at(t)
        f_b, f_s = bulk.freq_at(t), surface.freq_at(t)
        slope = float(deriv.at(t))
        if not all(np.isfinite(v) for v in (a_b, a_s, f_b, f_s, slope)):
            continue
        detuning = TWO_PI * (f_b - f_s)
        ok = (abs(slope) > slope_floor and a_b > 0 and a_s > 0
              and abs(f_b - f_s) >= min_separation_hz)
        est = a_sb * detuning ** 2 / (a_b ** 2 * a_s * abs(slope)) if ok else float("nan")
        out.append(CouplingEstimate(float(t), est, float(a_sb), float(a_b), float(a_s),
                                    float(detuning), slope, ok))
    return out


def extrapolate_coupling(estimates, t_cross: float, fraction: float = 0.25) -> float:
    """Linear fit of the valid estimates nearest the crossing, evaluated there.

    Uses the ``fraction`` of valid estimates closest in time to ``t_cross``
    (at least two points).  Returns NaN when fewer than two are valid.
    """
    valid = [e for e in estimates if e.valid and np.isfinite(e.omega_est)]
    if len(valid) < 2:
        return float("nan")
    valid.sort(key=lambda e: abs(e.t - t_cross))
    n = max(2, int(math.ceil(fraction * len(valid))))
    ts = np.array([e.t for e in valid[:n]])
    ws = np.array([e.omega_est for e in valid[:n]])
    if np.ptp(ts) == 0:
        return float(np.mean(ws))
    slope, intercept = np.polyfit(ts, ws, 1)
    return float(max(slope * t_cross + intercept, 0.0))


def write_coupling_csv(estimates, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t", "omega_hz"))
        for e in estimates:
            writer.writerow((repr(float(e.t)), repr(float(e.omega_est / TWO_PI)) if e.valid else "nan"))


@dataclass(frozen=True)
class RelaxationSegment:
    t_start: float
    t_end: float
    tau: float
    amplitude_0: float


@dataclass(frozen=True)
class RelaxationFit:
    segments: tuple
    kink_time: float | None
    residual_rms: float
    single_rms: float

    @property
    def tau(self) -> float:
        return self.segments[0].tau


def _tau(slope, span):
    # |slope| * span below 1e-9 is treated as no measurable decay
    if slope >= 0 or abs(slope) * span < 1e-9:
        return math.inf
    return -1.0 / slope


def fit_relaxation(t, amp) -> RelaxationFit:
    """Exponential relaxation fit with optional change of rate.

    ``log(amp)`` is fitted with a single line and with a continuous
    two-segment line whose break point is optimised.  The break is reported
    as ``kink_time`` when it reduces the residual RMS by at least 20 %.
    ``tau`` is the amplitude time constant, ``amp ~ exp(-t / tau)``; a flat
    trace gives ``tau = inf``.
    """
    t = np.asarray(t, dtype=float)
    amp = np.asarray(amp, dtype=float)
    if t.size < 8:
        raise AnalysisError("need at least 8 points")
    if np.any(amp <= 0):
        raise AnalysisError("amplitudes must be positive")
    y = np.log(amp)
    span = t[-1] - t[0]

    b1, a1 = np.polyfit(t, y, 1)
    rms1 = float(np.sqrt(np.mean((y - (a1 + b1 * t)) ** 2)))
    single = RelaxationFit((RelaxationSegment(float(t[0]), float(t[-1]), _tau(b1, span),
                                              float(math.exp(a1 + b1 * t[0]))),),
                           None, rms1, rms1)

    def hinge(tk):
        design = np.column_stack([np.ones_like(t), np.minimum(t - tk, 0.0), np.maximum(t - tk, 0.0)])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        res = y - design @ coef
        return float(np.sqrt(np.mean(res ** 2))), coef

    lo, hi = t[2], t[-3]
    if not hi > lo or rms1 <= 1e-12 * max(1.0, float(np.max(np.abs(y)))):
        return single
    grid = np.linspace(lo, hi, 64)
    k0 = int(np.argmin([hinge(g)[0] for g in grid]))
    bracket = (grid[max(k0 - 1, 0)], grid[min(k0 + 1, grid.size - 1)])
    res = minimize_scalar(lambda g: hinge(g)[0], bounds=bracket, method="bounded",
                          options={"xatol": 1e-6 * max(span, 1e-12)})
    tk = float(res.x)
    rms2, (a, s1, s2) = hinge(tk)
    if rms2 > (1.0 - KINK_IMPROVEMENT) * rms1:
        return single
    segs = (RelaxationSegment(float(t[0]), tk, _tau(s1, tk - t[0]),
                              float(math.exp(a + s1 * (t[0] - tk)))),
            RelaxationSegment(tk, float(t[-1]), _tau(s2, t[-1] - tk), float(math.exp(a))))
    return RelaxationFit(segs, tk, rms2, rms1)


def branch_fractions(traj: Trajectory):
    """Fractions of the population in the lower and upper dressed states.

    Projects the amplitudes on the instantaneous eigenvectors of the
    Hamiltonian driving the integration.
    """
    h = np.empty((traj.t.size, 2, 2))
    h[:, 0, 0] = traj.omega_b
    h[:, 1, 1] = traj.omega_s
    h[:, 0, 1] = h[:, 1, 0] = traj.coupling
    _, vecs = np.linalg.eigh(h)
    psi = np.stack([traj.psi_b, traj.psi_s], axis=1)
    proj = np.abs(np.einsum("nij,ni->nj", vecs, psi)) ** 2
    total = proj.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return proj[:, 0] / total, proj[:, 1] / total


@dataclass(frozen=True)
class LZReport:
    predicted_fraction: float
    observed_fraction: float
    crossing_time_s: float
    crossing_rate_rad_s2: float
    coupling_fit_hz: float
    decay_only_rate_rad_s2: float
    decay_only_fraction: float = float("nan")
    rate_ratio: float = float("nan")
    window_s: tuple = field(default=(float("nan"), float("nan")))
    coupling_extracted_hz: float = float("nan")

    def to_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, tuple):
                v = [None if not math.isfinite(x) else x for x in v]
            elif isinstance(v, float) and not math.isfinite(v):
                v = None
            out[k] = v
        return out


def decay_only_rate(params: SystemParams, n_cross: float, schedule=None) -> float:
    """Crossing rate if only the secular bulk decay drove the bulk frequency.

    ``|d w_b/d n_b| * 2 n_b / tau_b`` at the crossing population.  The
    surface frequency is treated as constant.
    """
    if math.isinf(params.tau_b) or n_cross <= 0:
        return 0.0
    if schedule is not None and schedule.tabulated_bulk_freq is not None:
        h = 1e-6 * max(n_cross, 1e-6)
        slope = (float(schedule.bulk_at(params, n_cross + h))
                 - float(schedule.bulk_at(params, max(n_cross - h, 0.0)))) / (2 * h)
    else:
        slope = bulk_frequency_slope(params, n_cross)
    return abs(slope) * 2.0 * n_cross / params.tau_b


def lz_report(traj: Trajectory, params: SystemParams, window_offset: float = 0.0) -> LZReport:
    """Landau-Zener prediction from the detected crossing versus simulation.

    ``predicted`` inserts the instantaneous crossing rate into the
    Landau-Zener formula.  ``observed`` is the upper-branch population
    fraction averaged over one resonant Rabi period ``pi / coupling``,
    starting one Rabi period (plus ``window_offset``) after the crossing.

    Raises
    ------
    AnalysisError
        If there is no crossing or the averaging window is not covered.
    """
    crossing = detect_crossing(traj)
    if not crossing.found:
        raise AnalysisError("trajectory contains no level crossing")
    t_x = crossing.t_cross
    om = float(np.interp(t_x, traj.t, traj.coupling))
    period = math.pi / om if om > 0 else 10.0 * float(traj.t[1] - traj.t[0])
    start = t_x + period + window_offset
    stop = start + period
    if stop > traj.t[-1] + 1e-12:
        raise AnalysisError(f"trajectory ends at {traj.t[-1]:.4g} s, averaging window needs "
                            f"{stop:.4g} s")
    _, upper = branch_fractions(traj)
    sel = (traj.t >= start) & (traj.t <= stop)
    observed = float(np.mean(upper[sel]))
    predicted = lz_transfer_fraction(om, crossing.rate)
    if traj.schedule is not None and traj.schedule.mode == PROGRAMMED:
        d_rate = float("nan")
        d_frac = float("nan")
    else:
        n_cross = float(np.interp(t_x, traj.t, traj.n_b))
        d_rate = decay_only_rate(params, n_cross, traj.schedule)
        d_frac = lz_transfer_fraction(om, d_rate)
    ratio = crossing.rate / d_rate if d_rate and math.isfinite(d_rate) else float("nan")
    return LZReport(predicted_fraction=predicted, observed_fraction=observed,
                    crossing_time_s=t_x, crossing_rate_rad_s2=crossing.rate,
                    coupling_fit_hz=om / TWO_PI, decay_only_rate_rad_s2=d_rate,
                    decay_only_fraction=d_frac, rate_ratio=ratio, window_s=(start, stop))


@dataclass(frozen=True)
class LZPoint:
    omega_hz: float
    rate_hz_per_s: float
    predicted: float
    observed: float

    @property
    def abs_err(self) -> float:
        return abs(self.observed - self.predicted)


def lz_sweep_point(coupling_hz: float, rate_hz_per_s: float, span: float = 40.0,
                   rel_tol: float = 1e-8, abs_tol: float = 1e-10,
                   surface_hz: float = 100.0) -> LZPoint:
    """Single programmed linear sweep through an avoided crossing.

    The detuning runs from ``-span * coupling`` to ``+span * coupling`` at
    ``TWO_PI * rate_hz_per_s`` rad/s^2, starting in the lower dressed state.
    The observed fraction is the upper-branch population at the end of the
    sweep, compared with the Landau-Zener formula.

    Parameters
    ----------
    coupling_hz : float
        Coupling in Hz (>= 0).
    rate_hz_per_s : float
        Detuning sweep rate in Hz/s (> 0).
    span : float
        Half-range of the sweep in units of the coupling; with zero coupling
        a 1 Hz unit is used.
    """
    if rate_hz_per_s <= 0:
        raise ValueError("rate_hz_per_s must be > 0")
    params = SystemParams.from_hz(surface_hz, surface_hz, coupling_hz=coupling_hz)
    alpha = TWO_PI * rate_hz_per_s
    half_range = span * (params.coupling if params.coupling > 0 else TWO_PI)
    t_half = half_range / alpha
    schedule = Schedule.linear_sweep(alpha, 0.0, -t_half, t_half)
    h = np.array([[-half_range, params.coupling], [params.coupling, 0.0]])
    _, vecs = np.linalg.eigh(h)
    start = TwoLevelState(-t_half, complex(vecs[0, 0]), complex(vecs[1, 0]))
    # the populations are stationary in the dressed basis far from the crossing,
    # so a coarse output grid is enough
    rate = max(20.0, 40.0 / t_half)
    traj = integrate(params, start, schedule, t_end=t_half, rel_tol=rel_tol,
                     abs_tol=abs_tol, sample_rate=rate)
    _, upper = branch_fractions(traj)
    return LZPoint(omega_hz=float(coupling_hz), rate_hz_per_s=float(rate_hz_per_s),
                   predicted=lz_transfer_fraction(params.coupling, alpha),
                   observed=float(upper[-1]))


def write_report_json(report: LZReport | dict, path) -> None:
    data = report.to_dict() if isinstance(report, LZReport) else report
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
