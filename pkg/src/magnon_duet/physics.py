"""Closed-form relations of the nonlinear two-level magnon system.

All frequencies are angular (rad/s) and all magnon numbers are dimensionless,
normalised to a reference population of one.  Functions accept scalars or
numpy arrays unless noted otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """Raised when an input lies outside the domain of a physical relation."""


class RabiRegimeError(DomainError):
    """Raised when the far-detuned (Josephson) approximation is invalid."""


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of one two-level scenario.

    Attributes
    ----------
    omega_bar_b : float
        Bulk frequency in the zero-population limit, rad/s.
    omega_bar_s : float
        Surface frequency at zero populations, rad/s.
    coupling : float
        Off-diagonal coupling between the levels, rad/s (>= 0).
    k_selftrap : float
        Self-trapping strength; ``omega_b = omega_bar_b * (1 - k * n_b**p)``.
    p_exponent : float
        Self-trapping power ``p`` (0 < p < 1).
    surface_coeff_b, surface_coeff_s : float
        Linearised shifts of the surface level with bulk and surface
        population respectively.  Zero gives a rigid surface trap.
    coupling_nb_coeff : float
        Optional linear growth of the coupling with bulk population,
        ``coupling * (1 + coupling_nb_coeff * n_b)``.  Illustrative only.
    tau_b, tau_s : float
        Amplitude decay constants in seconds (``math.inf`` disables decay).
    fill_b, fill_s : float
        Signal amplitude per square-root magnon.
    omega_larmor : float
        Lab-frame carrier (rad/s); 0 keeps synthesis in the rotating frame.
    """

    omega_bar_b: float
    omega_bar_s: float
    coupling: float = 0.0
    k_selftrap: float = 0.0
    p_exponent: float = 5.0 / 7.0
    surface_coeff_b: float = 0.0
    surface_coeff_s: float = 0.0
    coupling_nb_coeff: float = 0.0
    tau_b: float = math.inf
    tau_s: float = math.inf
    fill_b: float = 1.0
    fill_s: float = 1.0
    omega_larmor: float = 0.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        problems = self.invariant_violations()
        if problems:
            raise DomainError("; ".join(problems))

    def invariant_violations(self) -> list[str]:
        out = []
        for name in ("omega_bar_b", "omega_bar_s", "coupling", "k_selftrap",
                     "p_exponent", "surface_coeff_b", "surface_coeff_s",
                     "coupling_nb_coeff", "fill_b", "fill_s", "omega_larmor"):
            if not math.isfinite(getattr(self, name)):
                out.append(f"{name} must be finite")
        if self.coupling < 0:
            out.append("coupling must be >= 0")
        if self.k_selftrap < 0:
            out.append("k_selftrap must be >= 0")
        if not 0.0 < self.p_exponent < 1.0:
            out.append("p_exponent must lie in (0, 1)")
        for name in ("tau_b", "tau_s"):
            tau = getattr(self, name)
            if math.isnan(tau) or tau <= 0:
                out.append(f"{name} must be > 0 or infinite")
        if self.fill_b < 0 or self.fill_s < 0:
            out.append("fill factors must be >= 0")
        if self.omega_larmor < 0:
            out.append("omega_larmor must be >= 0")
        return out

    @classmethod
    def from_hz(cls, bulk_hz, surface_hz, coupling_hz=0.0, larmor_hz=0.0, **kw):
        """Build parameters from ordinary frequencies given in Hz."""
        return cls(omega_bar_b=TWO_PI * bulk_hz, omega_bar_s=TWO_PI * surface_hz,
                   coupling=TWO_PI * coupling_hz, omega_larmor=TWO_PI * larmor_hz,
                   **kw)

    @property
    def gamma_b(self) -> float:
        """Amplitude damping rate 1/tau_b (0 for no decay)."""
        return 0.0 if math.isinf(self.tau_b) else 1.0 / self.tau_b

    @property
    def gamma_s(self) -> float:
        return 0.0 if math.isinf(self.tau_s) else 1.0 / self.tau_s

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class TwoLevelState:
    """Complex amplitudes of the bulk and surface condensates at time ``t``."""

    t: float
    psi_b: complex
    psi_s: complex

    @property
    def n_b(self) -> float:
        return abs(self.psi_b) ** 2

    @property
    def n_s(self) -> float:
        return abs(self.psi_s) ** 2

    @property
    def n_total(self) -> float:
        return self.n_b + self.n_s


@dataclass(frozen=True)
class BlochPoint:
    """Point on the macroscopic Bloch sphere of radius ``n_total``."""

    n_total: float
    theta: float
    phi: float


def _check_population(name, n):
    if np.any(np.asarray(n) < 0):
        raise DomainError(f"{name} must be >= 0")


def bulk_frequency(params: SystemParams, n_b):
    """Bulk level frequency under self-trapping, ``w_bar (1 - k n^p)``."""
    _check_population("n_b", n_b)
    return params.omega_bar_b * (1.0 - params.k_selftrap * np.power(n_b, params.p_exponent))


def bulk_frequency_slope(params: SystemParams, n_b):
    """Derivative d(omega_b)/d(n_b) of :func:`bulk_frequency` (<= 0)."""
    _check_population("n_b", n_b)
    p = params.p_exponent
    n_b = np.asarray(n_b, dtype=float)
    with np.errstate(divide="ignore"):
        slope = -params.omega_bar_b * params.k_selftrap * p * np.power(n_b, p - 1.0)
    if params.k_selftrap == 0:
        slope = np.zeros_like(slope)
    return slope if slope.ndim else float(slope)


def surface_frequency(params: SystemParams, n_b, n_s):
    """Surface level frequency including the optional population shifts.

    The functional form (same power as the bulk law, independent linear
    coefficients) is a modelling choice; with both coefficients zero the
    surface trap is rigid and this returns ``omega_bar_s``.
    """
    _check_population("n_b", n_b)
    _check_population("n_s", n_s)
    p = params.p_exponent
    shift = (params.surface_coeff_b * np.power(n_b, p)
             + params.surface_coeff_s * np.power(n_s, p))
    return params.omega_bar_s * (1.0 - shift)


def effective_coupling(params: SystemParams, n_b):
    """Coupling including the optional linear bulk-population dependence."""
    if params.coupling_nb_coeff == 0:
        return params.coupling
    return params.coupling * (1.0 + params.coupling_nb_coeff * np.asarray(n_b))


def dressed_frequencies(omega_b, omega_s, coupling):
    """Eigenvalues ``(lower, upper)`` of ``[[omega_b, -coupling], [-coupling, omega_s]]``."""
    if np.any(np.asarray(coupling) < 0):
        raise DomainError("coupling must be >= 0")
    mean = 0.5 * (np.asarray(omega_b) + np.asarray(omega_s))
    half_gap = 0.5 * rabi_frequency(omega_b, omega_s, coupling)
    lower, upper = mean - half_gap, mean + half_gap
    if np.ndim(lower) == 0:
        return float(lower), float(upper)
    return lower, upper


def rabi_frequency(omega_b, omega_s, coupling):
    """Generalised Rabi frequency ``sqrt((omega_b - omega_s)**2 + (2 coupling)**2)``."""
    if np.any(np.asarray(coupling) < 0):
        raise DomainError("coupling must be >= 0")
    return np.hypot(np.asarray(omega_b) - np.asarray(omega_s), 2.0 * np.asarray(coupling))


def josephson_amplitude(coupling, n_b, n_s, omega_b, omega_s):
    """Amplitude of the AC Josephson oscillation of the bulk population.

    Far from resonance ``n_b(t) = n_b + dn cos(omega_j t)`` with
    ``dn = 2 coupling sqrt(n_b n_s) / |omega_b - omega_s|``.  The factor two
    follows from ``dn_b/dt = 2 coupling Im(psi_b* psi_s)`` for the equations
    of motion used throughout this package.

    Raises
    ------
    RabiRegimeError
        If ``omega_b == omega_s``; near resonance the full dynamics must be
        integrated instead.
    """
    _check_population("n_b", n_b)
    _check_population("n_s", n_s)
    detuning = np.abs(np.asarray(omega_b) - np.asarray(omega_s))
    if np.any(detuning == 0):
        raise RabiRegimeError("omega_b == omega_s: Josephson formula invalid in the Rabi regime")
    return 2.0 * coupling * np.sqrt(np.asarray(n_b) * np.asarray(n_s)) / detuning


# Bessel functions of the first kind, integer order.

_SERIES_LIMIT = 2.0


def _bessel_series(n: int, x: float) -> float:
    half = 0.5 * x
    term = 1.0
    for k in range(1, n + 1):
        term *= half / k
    total = term
    q = -half * half
    for k in range(1, 80):
        term *= q / (k * (k + n))
        total += term
        if abs(term) <= 1e-17 * abs(total):
            break
    return total


def _bessel_miller(n: int, x: float) -> float:
    # downward recurrence from a high start, normalised by J0 + 2 sum J_2k = 1
    m = max(n, int(x))
    start = 2 * ((m + 20 + int(math.sqrt(40.0 * m))) // 2)
    two_over_x = 2.0 / x
    j_next, j_cur = 0.0, 1e-30
    norm = 0.0
    result = 0.0
    for k in range(start, 0, -1):
        j_prev = k * two_over_x * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if abs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_next *= 1e-250
            result *= 1e-250
            norm *= 1e-250
        if k - 1 == n:
            result = j_cur
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
    norm += j_cur  # J0
    return result / norm


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind ``J_n(x)`` for integer ``n``.

    Ascending power series for ``|x| <= 2`` (or when the order dominates the
    argument), Miller's downward recurrence otherwise.  Absolute accuracy is
    better than 1e-13 for ``|x| <= 20``.
    """
    n = int(n)
    x = float(x)
    sign = 1.0
    if n < 0:
        n = -n
        sign *= -1.0 if n % 2 else 1.0
    if x < 0:
        x = -x
        sign *= -1.0 if n % 2 else 1.0
    if x == 0.0:
        return sign * (1.0 if n == 0 else 0.0)
    if x <= _SERIES_LIMIT or n > x * x:
        return sign * _bessel_series(n, x)
    return sign * _bessel_miller(n, x)


def fm_sideband_amplitude(delta_omega_b, omega_j, n, carrier_amp=1.0):
    """Amplitude of the ``n``-th FM sideband, ``carrier_amp * |J_n(dw / w_j)|``."""
    if omega_j <= 0:
        raise DomainError("omega_j must be > 0")
    return carrier_amp * abs(bessel_j(n, delta_omega_b / omega_j))


def lz_transfer_fraction(coupling, crossing_rate):
    """Landau-Zener fraction promoted to the excited branch.

    ``exp(-2 pi coupling**2 / |rate|)``.  A zero rate is the adiabatic limit
    and returns 0 (1 if the coupling is also zero).
    """
    rate = abs(crossing_rate)
    if rate == 0:
        return 1.0 if coupling == 0 else 0.0
    return math.exp(-TWO_PI * coupling * coupling / rate)


def bloch_coordinates(state: TwoLevelState) -> BlochPoint:
    """Map a state onto the Bloch sphere.

    ``n_b = n0 cos^2(theta/2)``, ``n_s = n0 sin^2(theta/2)`` and ``phi`` is the
    relative phase ``arg(psi_s) - arg(psi_b)`` wrapped to [0, 2 pi).  At the
    poles ``phi`` is set to 0.
    """
    n_b, n_s = state.n_b, state.n_s
    n0 = n_b + n_s
    if n0 == 0:
        raise DomainError("bloch_coordinates undefined for an empty state")
    theta = 2.0 * math.atan2(math.sqrt(n_s), math.sqrt(n_b))
    if state.psi_b == 0 or state.psi_s == 0:
        phi = 0.0
    else:
        phi = (np.angle(state.psi_s) - np.angle(state.psi_b)) % TWO_PI
        if phi >= TWO_PI:
            phi = 0.0
    return BlochPoint(n_total=n0, theta=theta, phi=float(phi))


def state_from_bloch(point: BlochPoint, t: float = 0.0) -> TwoLevelState:
    """Inverse of :func:`bloch_coordinates` with a real bulk amplitude."""
    if point.n_total < 0:
        raise DomainError("n_total must be >= 0")
    r = math.sqrt(point.n_total)
    return TwoLevelState(t=t, psi_b=complex(r * math.cos(point.theta / 2)),
                         psi_s=r * math.sin(point.theta / 2) * complex(math.cos(point.phi),
                                                                       math.sin(point.phi)))
