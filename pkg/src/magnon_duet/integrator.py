"""Time evolution of the coupled bulk/surface amplitudes.

The equations of motion are

    i dpsi_b/dt = (omega_b(n_b) - i/tau_b) psi_b + coupling psi_s
    i dpsi_s/dt = (omega_s - i/tau_s) psi_s + coupling psi_b

solved with an embedded Dormand-Prince 5(4) pair with step-size control and
its continuous extension for dense output.  Internally the amplitudes are
carried in a frame rotating at a constant reference frequency so the step
size is set by the detuning rather than by the carrier; the transformation
is undone exactly when samples are produced.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .physics import (TWO_PI, DomainError, SystemParams, TwoLevelState,
                      bulk_frequency, dressed_frequencies, effective_coupling,
                      surface_frequency)

PHYSICAL = "physical"
PROGRAMMED = "programmed"

UNDRESSED_CROSSING = "undressed_crossing"
MIN_GAP = "min_gap"

TRAJECTORY_HEADER = ("t", "re_psi_b", "im_psi_b", "re_psi_s", "im_psi_s", "n_b", "n_s",
                     "omega_b_hz", "omega_s_hz", "dressed_lo_hz", "dressed_hi_hz")

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                                22 / 525, -1 / 40)
_D1, _D3, _D4, _D5, _D6, _D7 = (-12715105075 / 11282082432, 87487479700 / 32700410799,
                                -10690763975 / 1880347072, 701980252875 / 199316789632,
                                -1453857185 / 822651844, 69997945 / 29380423)


class IntegrationError(RuntimeError):
    """Step-size underflow or step budget exhausted."""

    def __init__(self, message, last_state: TwoLevelState):
        super().__init__(message)
        self.last_state = last_state


@dataclass(frozen=True)
class Schedule:
    """How the undressed frequencies are obtained during integration.

    In ``physical`` mode the bulk frequency follows the self-trapping law
    (or ``tabulated_bulk_freq`` if given).  In ``programmed`` mode the
    detuning ``omega_b - omega_s`` is a piecewise-linear function of time,
    the surface frequency is fixed at ``omega_bar_s`` and the self-trapping
    law is bypassed.  Knots are ``(times, values)`` pairs; outside the knot
    range the end segments are extended linearly.
    """

    mode: str = PHYSICAL
    programmed_detuning: tuple | None = None
    tabulated_bulk_freq: tuple | None = None

    def __post_init__(self):
        if self.mode not in (PHYSICAL, PROGRAMMED):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.mode == PROGRAMMED:
            if self.programmed_detuning is None:
                raise ValueError("programmed mode needs programmed_detuning knots")
            times, values = (np.asarray(a, dtype=float) for a in self.programmed_detuning)
            if times.shape != values.shape or times.size < 2 or np.any(np.diff(times) <= 0):
                raise ValueError("detuning knots need >= 2 strictly increasing times")
            object.__setattr__(self, "programmed_detuning", (times, values))
        if self.tabulated_bulk_freq is not None:
            n, w = (np.asarray(a, dtype=float) for a in self.tabulated_bulk_freq)
            if n.shape != w.shape or n.size < 2 or np.any(np.diff(n) <= 0):
                raise ValueError("bulk frequency table needs >= 2 increasing populations")
            if np.any(np.diff(w) > 0):
                raise ValueError("tabulated bulk frequency must be non-increasing")
            object.__setattr__(self, "tabulated_bulk_freq", (n, w))

    @classmethod
    def linear_sweep(cls, rate, t_cross, t_start, t_end) -> "Schedule":
        """Programmed detuning ``rate * (t - t_cross)`` over ``[t_start, t_end]``."""
        times = (t_start, t_end)
        return cls(mode=PROGRAMMED,
                   programmed_detuning=(times, tuple(rate * (t - t_cross) for t in times)))

    def detuning_at(self, t):
        times, values = self.programmed_detuning
        t = np.asarray(t, dtype=float)
        out = np.interp(t, times, values)
        lo = (values[1] - values[0]) / (times[1] - times[0])
        hi = (values[-1] - values[-2]) / (times[-1] - times[-2])
        out = np.where(t < times[0], values[0] + lo * (t - times[0]), out)
        out = np.where(t > times[-1], values[-1] + hi * (t - times[-1]), out)
        return out if out.ndim else float(out)

    def bulk_at(self, params: SystemParams, n_b):
        if self.tabulated_bulk_freq is not None:
            n, w = self.tabulated_bulk_freq
            return np.interp(n_b, n, w)
        return bulk_frequency(params, n_b)


@dataclass(frozen=True)
class Event:
    kind: str
    time: float
    value: float


@dataclass(frozen=True)
class StepStats:
    """Step counts, largest relative norm change and summed local error.

    ``local_error_sum`` adds up the absolute local error estimates of all
    accepted steps (amplitude units); it bounds the accumulated error to
    first order.
    """

    accepted: int
    rejected: int
    max_norm_drift: float
    local_error_sum: float = 0.0


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-sampled integration result.

    Arrays are read-only.  ``psi_b``/``psi_s`` are amplitudes in the frame
    rotating at the Larmor frequency.  ``evaluate`` gives access to the
    continuous solution between samples.
    """

    t: np.ndarray
    psi_b: np.ndarray
    psi_s: np.ndarray
    omega_b: np.ndarray
    omega_s: np.ndarray
    dressed_lo: np.ndarray
    dressed_hi: np.ndarray
    coupling: np.ndarray
    events: tuple = ()
    step_stats: StepStats | None = None
    params: SystemParams | None = field(default=None, repr=False)
    schedule: Schedule | None = field(default=None, repr=False)
    _dense: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("t", "psi_b", "psi_s", "omega_b", "omega_s", "dressed_lo",
                     "dressed_hi", "coupling"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.t.size

    @property
    def n_b(self):
        return np.abs(self.psi_b) ** 2

    @property
    def n_s(self):
        return np.abs(self.psi_s) ** 2

    @property
    def detuning(self):
        return self.omega_b - self.omega_s

    def state(self, i: int) -> TwoLevelState:
        return TwoLevelState(t=float(self.t[i]), psi_b=complex(self.psi_b[i]),
                             psi_s=complex(self.psi_s[i]))

    def final_state(self) -> TwoLevelState:
        return self.state(-1)

    def evaluate(self, times):
        """Continuous-extension amplitudes ``(psi_b, psi_s)`` at ``times``."""
        if self._dense is None:
            raise ValueError("trajectory carries no dense output")
        return self._dense(np.asarray(times, dtype=float))

    def events_of(self, kind):
        return [e for e in self.events if e.kind == kind]


class _DenseOutput:
    """Piecewise continuous extension assembled from accepted steps."""

    def __init__(self, t_start, h, coeffs, omega_ref, t_first, t_last):
        self.t_start = t_start
        self.h = h
        self.coeffs = coeffs  # shape (steps, 5, 2)
        self.omega_ref = omega_ref
        self.t_first, self.t_last = t_first, t_last

    def __call__(self, times):
        times = np.asarray(times, dtype=float)
        scalar = times.ndim == 0
        times = np.atleast_1d(times)
        if np.any(times < self.t_first - 1e-12) or np.any(times > self.t_last + 1e-12):
            raise ValueError("dense output requested outside the integrated interval")
        idx = np.clip(np.searchsorted(self.t_start, times, side="right") - 1, 0, self.h.size - 1)
        theta = ((times - self.t_start[idx]) / self.h[idx])[:, None]
        r = self.coeffs[idx]
        theta1 = 1.0 - theta
        y = r[:, 0] + theta * (r[:, 1] + theta1 * (r[:, 2] + theta * (r[:, 3] + theta1 * r[:, 4])))
        y = y * np.exp(-1j * self.omega_ref * times)[:, None]
        if scalar:
            return complex(y[0, 0]), complex(y[0, 1])
        return y[:, 0], y[:, 1]


def default_sample_rate(params: SystemParams, initial: TwoLevelState, schedule: Schedule,
                        t_end: float) -> float:
    """Twenty times the largest rotating-frame frequency of the scenario."""
    freqs = [abs(params.omega_bar_b), abs(params.omega_bar_s)]
    if schedule.mode == PROGRAMMED:
        d = schedule.detuning_at(np.array([initial.t, t_end]))
        freqs += list(np.abs(params.omega_bar_s + d))
    else:
        n_b = max(initial.n_b, 0.0)
        freqs.append(abs(float(schedule.bulk_at(params, n_b))))
        freqs.append(abs(float(surface_frequency(params, n_b, initial.n_s))))
    freqs.append(2.0 * params.coupling * (1 + abs(params.coupling_nb_coeff) * initial.n_total))
    f_max = max(freqs) / TWO_PI
    return max(20.0 * f_max, 20.0)


def _instantaneous(params, schedule, t, n_b, n_s):
    if schedule.mode == PROGRAMMED:
        w_s = np.full_like(n_b, params.omega_bar_s, dtype=float)
        w_b = w_s + schedule.detuning_at(t)
    else:
        w_b = np.asarray(schedule.bulk_at(params, n_b), dtype=float)
        w_s = np.asarray(surface_frequency(params, n_b, n_s), dtype=float)
    return w_b, w_s


def _make_rhs(params: SystemParams, schedule: Schedule, omega_ref: float):
    g_b, g_s = params.gamma_b, params.gamma_s
    om0, om_slope = params.coupling, params.coupling * params.coupling_nb_coeff
    w_bar_b, w_bar_s = params.omega_bar_b, params.omega_bar_s
    k, p = params.k_selftrap, params.p_exponent
    cb, cs = params.surface_coeff_b, params.surface_coeff_s
    surface_rigid = cb == 0 and cs == 0

    if schedule.mode == PROGRAMMED:
        detuning = schedule.detuning_at
        ws_rel = w_bar_s - omega_ref

        def rhs(t, b, s):
            nb = b.real * b.real + b.imag * b.imag
            om = om0 + om_slope * nb
            db = -1j * ((ws_rel + detuning(t) - 1j * g_b) * b + om * s)
            ds = -1j * ((ws_rel - 1j * g_s) * s + om * b)
            return db, ds
        return rhs

    table = schedule.tabulated_bulk_freq
    if table is not None:
        tn, tw = table

        def bulk(nb):
            return float(np.interp(nb, tn, tw))
    elif k == 0:
        def bulk(nb):
            return w_bar_b
    else:
        def bulk(nb):
            return w_bar_b * (1.0 - k * nb ** p)

    def rhs(t, b, s):
        nb = b.real * b.real + b.imag * b.imag
        if surface_rigid:
            ws = w_bar_s
        else:
            ns = s.real * s.real + s.imag * s.imag
            ws = w_bar_s * (1.0 - cb * nb ** p - cs * ns ** p)
        om = om0 + om_slope * nb
        db = -1j * ((bulk(nb) - omega_ref - 1j * g_b) * b + om * s)
        ds = -1j * ((ws - omega_ref - 1j * g_s) * s + om * b)
        return db, ds
    return rhs


def _dopri5(rhs, t0, b0, s0, t_end, rtol, atol, omega_ref, max_steps, h_min_factor=1e-13):
    t, b, s = t0, complex(b0), complex(s0)
    kb1, ks1 = rhs(t, b, s)

    def scaled_norm(eb, es, sb, ss):
        return math.sqrt(0.5 * ((abs(eb) / sb) ** 2 + (abs(es) / ss) ** 2))

    # initial step guess (Hairer & Wanner II.4)
    d0 = scaled_norm(b, s, atol + rtol * abs(b), atol + rtol * abs(s))
    d1 = scaled_norm(kb1, ks1, atol + rtol * abs(b), atol + rtol * abs(s))
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(h, t_end - t0)
    kb2, ks2 = rhs(t + h, b + h * kb1, s + h * ks1)
    d2 = scaled_norm(kb2 - kb1, ks2 - ks1, atol + rtol * abs(b), atol + rtol * abs(s)) / h
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(100 * h, h1, t_end - t0)

    starts, steps, coeffs = [], [], []
    accepted = rejected = 0
    n0 = abs(b) ** 2 + abs(s) ** 2
    max_drift = 0.0
    err_sum = 0.0
    last_rejected = False
    while t < t_end:
        if accepted + rejected >= max_steps:
            raise IntegrationError(f"step budget of {max_steps} exhausted at t={t:.6g}",
                                   TwoLevelState(t, b * np.exp(-1j * omega_ref * t),
                                                 s * np.exp(-1j * omega_ref * t)))
        if h < h_min_factor * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow (h={h:.3g}) at t={t:.6g}",
                                   TwoLevelState(t, b * np.exp(-1j * omega_ref * t),
                                                 s * np.exp(-1j * omega_ref * t)))
        if t + h > t_end or t + 1.01 * h >= t_end:
            h = t_end - t
        kb2, ks2 = rhs(t + _C2 * h, b + h * _A21 * kb1, s + h * _A21 * ks1)
        kb3, ks3 = rhs(t + _C3 * h, b + h * (_A31 * kb1 + _A32 * kb2),
                       s + h * (_A31 * ks1 + _A32 * ks2))
        kb4, ks4 = rhs(t + _C4 * h, b + h * (_A41 * kb1 + _A42 * kb2 + _A43 * kb3),
                       s + h * (_A41 * ks1 + _A42 * ks2 + _A43 * ks3))
        kb5, ks5 = rhs(t + _C5 * h,
                       b + h * (_A51 * kb1 + _A52 * kb2 + _A53 * kb3 + _A54 * kb4),
                       s + h * (_A51 * ks1 + _A52 * ks2 + _A53 * ks3 + _A54 * ks4))
        kb6, ks6 = rhs(t + h,
                       b + h * (_A61 * kb1 + _A62 * kb2 + _A63 * kb3 + _A64 * kb4 + _A65 * kb5),
                       s + h * (_A61 * ks1 + _A62 * ks2 + _A63 * ks3 + _A64 * ks4 + _A65 * ks5))
        b_new = b + h * (_B1 * kb1 + _B3 * kb3 + _B4 * kb4 + _B5 * kb5 + _B6 * kb6)
        s_new = s + h * (_B1 * ks1 + _B3 * ks3 + _B4 * ks4 + _B5 * ks5 + _B6 * ks6)
        kb7, ks7 = rhs(t + h, b_new, s_new)
        eb = h * (_E1 * kb1 + _E3 * kb3 + _E4 * kb4 + _E5 * kb5 + _E6 * kb6 + _E7 * kb7)
        es = h * (_E1 * ks1 + _E3 * ks3 + _E4 * ks4 + _E5 * ks5 + _E6 * ks6 + _E7 * ks7)
        err = scaled_norm(eb, es, atol + rtol * max(abs(b), abs(b_new)),
                          atol + rtol * max(abs(s), abs(s_new)))
        if err <= 1.0:
            db, ds = b_new - b, s_new - s
            sb, ss = h * kb1 - db, h * ks1 - ds
            coeffs.append((
                (b, s), (db, ds), (sb, ss), (db - h * kb7 - sb, ds - h * ks7 - ss),
                (h * (_D1 * kb1 + _D3 * kb3 + _D4 * kb4 + _D5 * kb5 + _D6 * kb6 + _D7 * kb7),
                 h * (_D1 * ks1 + _D3 * ks3 + _D4 * ks4 + _D5 * ks5 + _D6 * ks6 + _D7 * ks7)),
            ))
            starts.append(t)
            steps.append(h)
            t = t + h
            b, s = b_new, s_new
            kb1, ks1 = kb7, ks7
            accepted += 1
            err_sum += max(abs(eb), abs(es))
            if n0 > 0:
                max_drift = max(max_drift, abs(abs(b) ** 2 + abs(s) ** 2 - n0) / n0)
            factor = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
            if last_rejected:
                factor = min(factor, 1.0)
            last_rejected = False
        else:
            rejected += 1
            last_rejected = True
            factor = max(0.2, 0.9 * err ** -0.2)
        h *= factor

    dense = _DenseOutput(np.array(starts), np.array(steps),
                         np.array(coeffs, dtype=complex), omega_ref, t0, t_end)
    return dense, StepStats(accepted, rejected, max_drift, err_sum)


def integrate(params: SystemParams, initial: TwoLevelState, schedule: Schedule | None = None,
              t_end: float = 10.0, rel_tol: float = 1e-10, abs_tol: float = 1e-12,
              sample_rate: float | None = None, max_steps: int = 5_000_000) -> Trajectory:
    """Integrate the coupled amplitude equations from ``initial`` to ``t_end``.

    Parameters
    ----------
    params : SystemParams
    initial : TwoLevelState
        Starting amplitudes (rotating frame) and start time.
    schedule : Schedule, optional
        Defaults to the physical self-trapping dynamics.
    t_end : float
        Final time in seconds, > ``initial.t``.
    rel_tol, abs_tol : float
        Local error tolerances, each in (0, 1e-2].
    sample_rate : float, optional
        Dense output rate in Hz; defaults to :func:`default_sample_rate`.

    Returns
    -------
    Trajectory
        Samples on a uniform grid including both end points, with detected
        events and step statistics.

    Raises
    ------
    IntegrationError
        On step-size underflow; carries the last accepted state.
    """
    schedule = schedule or Schedule()
    if not t_end > initial.t:
        raise DomainError("t_end must be greater than the initial time")
    for name, tol in (("rel_tol", rel_tol), ("abs_tol", abs_tol)):
        if not 0 < tol <= 1e-2:
            raise DomainError(f"{name} must lie in (0, 1e-2]")
    if sample_rate is None:
        sample_rate = default_sample_rate(params, initial, schedule, t_end)
    if sample_rate <= 0:
        raise DomainError("sample_rate must be > 0")

    omega_ref = params.omega_bar_s
    rhs = _make_rhs(params, schedule, omega_ref)
    t0 = float(initial.t)
    rot = np.exp(1j * omega_ref * t0)
    dense, stats = _dopri5(rhs, t0, initial.psi_b * rot, initial.psi_s * rot, float(t_end),
                           rel_tol, abs_tol, omega_ref, max_steps)

    n = int(math.floor((t_end - t0) * sample_rate + 1e-9)) + 1
    times = t0 + np.arange(n) / sample_rate
    if times[-1] < t_end - 1e-12:
        times = np.append(times, t_end)
    psi_b, psi_s = dense(times)
    return build_trajectory(params, schedule, times, psi_b, psi_s, stats, dense)


def build_trajectory(params, schedule, times, psi_b, psi_s, stats=None, dense=None) -> Trajectory:
    """Assemble a :class:`Trajectory` (frequencies and events) from raw samples."""
    n_b, n_s = np.abs(psi_b) ** 2, np.abs(psi_s) ** 2
    w_b, w_s = _instantaneous(params, schedule, times, n_b, n_s)
    om = np.broadcast_to(np.asarray(effective_coupling(params, n_b), dtype=float), times.shape)
    lo, hi = dressed_frequencies(w_b, w_s, om)
    traj = Trajectory(t=times, psi_b=psi_b, psi_s=psi_s, omega_b=w_b, omega_s=w_s,
                      dressed_lo=lo, dressed_hi=hi, coupling=om, step_stats=stats,
                      params=params, schedule=schedule, _dense=dense)
    object.__setattr__(traj, "events", _find_events(traj))
    return traj


def _crossing_indices(d):
    sign = np.sign(d)
    return np.nonzero((sign[:-1] * sign[1:] < 0) | ((sign[:-1] != 0) & (sign[1:] == 0)))[0]


def _find_events(traj: Trajectory):
    events = []
    d = traj.detuning
    for i in _crossing_indices(d):
        t_star = _root_between(traj.t, d, i)
        events.append(Event(UNDRESSED_CROSSING, t_star, _stencil_rate(traj, t_star)))
    if events:
        try:
            t_gap, gap = min_dressed_gap(traj)
            events.append(Event(MIN_GAP, t_gap, gap))
        except ValueError:
            pass
    return tuple(sorted(events, key=lambda e: e.time))


def _root_between(t, d, i):
    d0, d1 = d[i], d[i + 1]
    if d1 == d0:
        return float(t[i])
    return float(t[i] - d0 * (t[i + 1] - t[i]) / (d1 - d0))


def _stencil_rate(traj, t_star, spacing=None):
    """Centered five-point slope of the detuning at ``t_star``."""
    if spacing is None:
        om = float(np.interp(t_star, traj.t, traj.coupling))
        dt = traj.t[1] - traj.t[0] if traj.t.size > 1 else 0.0
        # stencil spans a tenth of the resonant Rabi period pi/coupling
        spacing = (math.pi / om) / 10.0 / 4.0 if om > 0 else 2.0 * dt
        spacing = max(spacing, dt)
    lo, hi = traj.t[0], traj.t[-1]
    spacing = min(spacing, (t_star - lo) / 2.0 if t_star > lo else spacing,
                  (hi - t_star) / 2.0 if hi > t_star else spacing)
    if spacing <= 0:
        return float("nan")
    x = t_star + spacing * np.array([-2.0, -1.0, 1.0, 2.0])
    g = np.interp(x, traj.t, traj.detuning)
    return float((g[0] - 8.0 * g[1] + 8.0 * g[2] - g[3]) / (12.0 * spacing))


@dataclass(frozen=True)
class Crossing:
    t_cross: float
    rate: float
    found: bool


def detect_crossing(traj: Trajectory) -> Crossing:
    """Locate the first sign change of ``omega_b - omega_s``.

    The reported rate is the absolute centred five-point finite-difference
    slope of the instantaneous detuning at the crossing, with the stencil
    spanning a tenth of the resonant Rabi period, so the population-driven
    acceleration of the crossing is retained.
    """
    d = traj.detuning
    idx = _crossing_indices(d)
    if idx.size == 0:
        return Crossing(float("nan"), float("nan"), False)
    t_star = _root_between(traj.t, d, idx[0])
    return Crossing(t_star, abs(_stencil_rate(traj, t_star)), True)


def min_dressed_gap(traj: Trajectory) -> tuple[float, float]:
    """Smallest separation of the dressed frequencies around the first crossing.

    Returns ``(t_gap, gap)`` with ``gap`` in rad/s.  The squared gap is
    refined with a parabola through the three samples around the minimum.

    Raises
    ------
    ValueError
        If the trajectory contains no undressed crossing.
    """
    crossing = detect_crossing(traj)
    if not crossing.found:
        raise ValueError("no undressed crossing in the trajectory")
    om = float(np.interp(crossing.t_cross, traj.t, traj.coupling))
    half = 0.5 * math.pi / om if om > 0 else 0.0
    dt = traj.t[1] - traj.t[0]
    window = np.nonzero(np.abs(traj.t - crossing.t_cross) <= max(half, 5 * dt))[0]
    gap2 = (traj.dressed_hi - traj.dressed_lo)[window] ** 2
    j = int(np.argmin(gap2))
    i = window[j]
    t_gap, g2 = float(traj.t[i]), float(gap2[j])
    if 0 < j < window.size - 1:
        y0, y1, y2 = gap2[j - 1], gap2[j], gap2[j + 1]
        denom = y0 - 2 * y1 + y2
        if denom > 0:
            shift = 0.5 * (y0 - y2) / denom
            t_gap = float(traj.t[i] + shift * (traj.t[i + 1] - traj.t[i]))
            g2 = float(y1 - 0.25 * (y0 - y2) * shift)
    return t_gap, math.sqrt(max(g2, 0.0))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write one row per sample; frequencies are converted to Hz."""
    cols = np.column_stack([
        traj.t, traj.psi_b.real, traj.psi_b.imag, traj.psi_s.real, traj.psi_s.imag,
        traj.n_b, traj.n_s, traj.omega_b / TWO_PI, traj.omega_s / TWO_PI,
        traj.dressed_lo / TWO_PI, traj.dressed_hi / TWO_PI,
    ])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_HEADER)
        for row in cols:
            writer.writerow([repr(float(v)) for v in row])


def read_trajectory_csv(path, params: SystemParams, schedule: Schedule | None = None) -> Trajectory:
    """Load a trajectory written by :func:`write_trajectory_csv` (no dense output)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    psi_b = data[:, 1] + 1j * data[:, 2]
    psi_s = data[:, 3] + 1j * data[:, 4]
    return build_trajectory(params, schedule or Schedule(), data[:, 0], psi_b, psi_s)
