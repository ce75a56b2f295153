import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magnon_duet.physics import (TWO_PI, BlochPoint, DomainError, RabiRegimeError, SystemParams,
                                 TwoLevelState, bessel_j, bloch_coordinates, bulk_frequency,
                                 bulk_frequency_slope, dressed_frequencies, effective_coupling,
                                 fm_sideband_amplitude, josephson_amplitude, lz_transfer_fraction,
                                 rabi_frequency, state_from_bloch, surface_frequency)


def params(**kw):
    base = dict(omega_bar_b=TWO_PI * 200, omega_bar_s=TWO_PI * 100)
    base.update(kw)
    return SystemParams(**base)


def bessel_oracle(n, x, terms=40):
    # ascending series at 50 digits, independent of the package implementation
    with mpmath.workdps(50):
        x = mpmath.mpf(x)
        total = mpmath.mpf(0)
        for k in range(terms):
            total += (-1) ** k * (x / 2) ** (2 * k + n) / (mpmath.factorial(k)
                                                           * mpmath.factorial(k + n))
        return float(total)


class TestParams:
    def test_invariants(self):
        for bad in (dict(coupling=-1.0), dict(k_selftrap=-0.1), dict(p_exponent=1.0),
                    dict(p_exponent=0.0), dict(tau_b=0.0), dict(tau_s=-2.0),
                    dict(fill_b=-1.0), dict(omega_bar_b=math.nan)):
            with pytest.raises(DomainError):
                params(**bad)

    def test_infinite_tau_allowed(self):
        p = params(tau_b=math.inf, tau_s=5.0)
        assert p.gamma_b == 0.0
        assert p.gamma_s == pytest.approx(0.2)

    def test_from_hz(self):
        p = SystemParams.from_hz(200, 140, coupling_hz=1.4, larmor_hz=833e3)
        assert p.omega_bar_b == pytest.approx(TWO_PI * 200)
        assert p.coupling == pytest.approx(TWO_PI * 1.4)
        assert p.omega_larmor == pytest.approx(TWO_PI * 833e3)


class TestFrequencies:
    def test_bulk_zero_population(self):
        p = params(k_selftrap=0.3)
        assert bulk_frequency(p, 0.0) == pytest.approx(p.omega_bar_b)

    def test_bulk_rigid(self):
        p = params()
        assert np.allclose(bulk_frequency(p, np.array([0.0, 1.0, 7.5])), p.omega_bar_b)

    def test_bulk_example(self):
        # 200 Hz * (1 - 0.1 * 1**(5/7)) = 180 Hz
        p = params(k_selftrap=0.1)
        assert bulk_frequency(p, 1.0) == pytest.approx(TWO_PI * 180, rel=1e-14)

    def test_bulk_negative_population(self):
        with pytest.raises(DomainError):
            bulk_frequency(params(k_selftrap=0.1), -0.1)

    def test_bulk_slope_matches_finite_difference(self):
        p = params(k_selftrap=0.25)
        for n in (0.3, 1.0, 3.0):
            h = 1e-6
            fd = (bulk_frequency(p, n + h) - bulk_frequency(p, n - h)) / (2 * h)
            assert bulk_frequency_slope(p, n) == pytest.approx(fd, rel=1e-7)

    def test_surface_rigid(self):
        p = params()
        assert surface_frequency(p, 3.0, 2.0) == pytest.approx(p.omega_bar_s)
        assert surface_frequency(params(surface_coeff_b=0.1), 0.0, 0.0) == pytest.approx(
            TWO_PI * 100)

    def test_surface_example(self):
        p = params(surface_coeff_b=0.05)
        assert surface_frequency(p, 1.0, 0.0) == pytest.approx(TWO_PI * 95, rel=1e-14)

    def test_surface_negative(self):
        with pytest.raises(DomainError):
            surface_frequency(params(), 1.0, -1.0)

    def test_effective_coupling(self):
        p = params(coupling=2.0, coupling_nb_coeff=0.5)
        assert effective_coupling(p, 2.0) == pytest.approx(4.0)
        assert effective_coupling(params(coupling=2.0), 9.0) == 2.0


class TestDressed:
    def test_resonant(self):
        assert dressed_frequencies(5.0, 5.0, 0.5) == pytest.approx((4.5, 5.5))

    def test_uncoupled(self):
        assert dressed_frequencies(3.0, 1.0, 0.0) == pytest.approx((1.0, 3.0))

    def test_closed_form(self):
        assert dressed_frequencies(2.0, 0.0, math.sqrt(3.0)) == pytest.approx((-1.0, 3.0))

    def test_matches_eigenvalues(self):
        rng = np.random.default_rng(1)
        for wb, ws, om in rng.uniform(0, 10, (20, 3)):
            ev = np.linalg.eigvalsh([[wb, om], [om, ws]])
            assert dressed_frequencies(wb, ws, om) == pytest.approx(tuple(ev), abs=1e-12)

    def test_negative_coupling(self):
        with pytest.raises(DomainError):
            dressed_frequencies(1.0, 1.0, -0.1)

    @given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0, 1e2))
    def test_gap_at_least_two_coupling(self, wb, ws, om):
        lo, hi = dressed_frequencies(wb, ws, om)
        assert hi - lo >= 2 * om - 1e-9 * max(1.0, abs(wb), abs(ws))
        assert lo <= hi

    @given(st.floats(-1e3, 1e3), st.floats(0, 1e2))
    def test_rabi_equals_resonant_gap(self, w, om):
        lo, hi = dressed_frequencies(w, w, om)
        assert rabi_frequency(w, w, om) == pytest.approx(hi - lo, abs=1e-9 * max(1, abs(w)))


class TestRabi:
    def test_examples(self):
        assert rabi_frequency(4.0, 4.0, 1.5) == pytest.approx(3.0)
        assert rabi_frequency(7.0, 2.0, 0.0) == pytest.approx(5.0)
        assert rabi_frequency(3.0, 0.0, 2.0) == pytest.approx(5.0)


class TestJosephson:
    def test_zero_coupling(self):
        assert josephson_amplitude(0.0, 1.0, 1.0, 3.0, 1.0) == 0.0

    def test_empty_surface(self):
        assert josephson_amplitude(1.0, 2.0, 0.0, 3.0, 1.0) == 0.0

    def test_arithmetic(self):
        # the population swing of the coupled equations is 2 coupling sqrt(n_b n_s) / detuning
        assert josephson_amplitude(1.0, 4.0, 4.0, 2.0, 0.0) == pytest.approx(4.0)

    def test_rabi_regime(self):
        with pytest.raises(RabiRegimeError):
            josephson_amplitude(1.0, 1.0, 1.0, 5.0, 5.0)

    def test_against_linear_response(self):
        # first-order perturbation of the coupled equations, evaluated independently
        om, wj, nb, ns = 0.3, 12.0, 2.0, 0.5
        t = np.linspace(0, 3, 3001)
        psi_b = math.sqrt(nb) * np.exp(-1j * wj * t)
        psi_s = math.sqrt(ns) + 0j
        # d n_b / dt = 2 om Im(conj(psi_b) psi_s) integrated analytically
        dn = 2 * om * math.sqrt(nb * ns) * (1 - np.cos(wj * t)) / wj
        assert np.ptp(dn) / 2 == pytest.approx(josephson_amplitude(om, nb, ns, wj, 0.0))
        assert np.allclose(np.gradient(dn, t)[1:-1],
                           (2 * om * np.imag(np.conj(psi_b) * psi_s))[1:-1], atol=1e-3)


class TestBessel:
    @pytest.mark.parametrize("n", [0, 1, 2, 3, 5, 8])
    def test_against_series_oracle(self, n):
        for x in np.linspace(0.0, 5.0, 26):
            assert bessel_j(n, x) == pytest.approx(bessel_oracle(n, x), abs=1e-10)

    def test_large_argument_vs_scipy(self):
        scipy_special = pytest.importorskip("scipy.special")
        for n in (0, 1, 4, 11):
            for x in (6.0, 9.5, 15.0, 20.0):
                assert bessel_j(n, x) == pytest.approx(scipy_special.jv(n, x), abs=1e-12)

    def test_values_at_one(self):
        assert fm_sideband_amplitude(1.0, 1.0, 0) == pytest.approx(0.7652, abs=5e-5)
        assert fm_sideband_amplitude(2.0, 2.0, 1, carrier_amp=3.0) == pytest.approx(
            3 * 0.4401, abs=2e-4)

    def test_zero_index(self):
        assert fm_sideband_amplitude(0.0, 1.0, 0, 2.5) == 2.5
        assert fm_sideband_amplitude(0.0, 1.0, 1, 2.5) == 0.0

    def test_negative_order(self):
        for x in (0.4, 1.7, 3.3):
            assert fm_sideband_amplitude(x, 1.0, -1) == pytest.approx(fm_sideband_amplitude(x, 1.0, 1))
            assert bessel_j(-3, x) == pytest.approx(-bessel_j(3, x))

    def test_zero_josephson_frequency(self):
        with pytest.raises(DomainError):
            fm_sideband_amplitude(1.0, 0.0, 1)

    @given(st.integers(1, 10), st.floats(0.1, 5.0))
    def test_recurrence(self, n, x):
        lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x)
        assert lhs == pytest.approx(2 * n / x * bessel_j(n, x), abs=1e-8)


class TestLandauZener:
    def test_no_coupling(self):
        assert lz_transfer_fraction(0.0, 5.0) == 1.0

    def test_half(self):
        assert lz_transfer_fraction(1.0, TWO_PI / math.log(2)) == pytest.approx(0.5, rel=1e-14)

    def test_reference_crossing_anchor(self):
        # brute inversion: rate giving 65 % transfer at 1.4 Hz coupling
        om = TWO_PI * 1.4
        lo, hi = 100.0, 5000.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if lz_transfer_fraction(om, mid) < 0.65 else (lo, mid)
        assert lo == pytest.approx(1128.6, abs=0.1)
        assert lz_transfer_fraction(om, 1128.6) == pytest.approx(0.65, abs=1e-4)

    def test_adiabatic_limit(self):
        assert lz_transfer_fraction(1.0, 0.0) == 0.0

    @given(st.floats(0.01, 10), st.floats(0.1, 1e3), st.floats(1.01, 3))
    def test_monotone(self, om, rate, factor):
        hi = lz_transfer_fraction(om, rate * factor)
        lo = lz_transfer_fraction(om, rate)
        assert hi >= lo
        if 0 < lo < 1 and lo > 1e-300:
            assert hi > lo
        assert lz_transfer_fraction(om * factor, rate) <= lo


class TestBloch:
    def test_pole(self):
        b = bloch_coordinates(TwoLevelState(0.0, 2.0 + 0j, 0j))
        assert (b.n_total, b.theta, b.phi) == (4.0, 0.0, 0.0)

    def test_equator(self):
        b = bloch_coordinates(TwoLevelState(0.0, 1.0 + 0j, 1j))
        assert b.theta == pytest.approx(math.pi / 2)
        assert b.phi == pytest.approx(math.pi / 2)
        assert b.n_total == pytest.approx(2.0)

    def test_empty(self):
        with pytest.raises(DomainError):
            bloch_coordinates(TwoLevelState(0.0, 0j, 0j))

    def test_populations(self):
        s = TwoLevelState(0.0, 0.6 + 0.8j, 1.5 - 0.5j)
        b = bloch_coordinates(s)
        assert b.n_total * math.cos(b.theta / 2) ** 2 == pytest.approx(s.n_b)
        assert b.n_total * math.sin(b.theta / 2) ** 2 == pytest.approx(s.n_s)

    @settings(max_examples=200)
    @given(st.floats(1e-3, 1e3), st.floats(1e-3, math.pi - 1e-3), st.floats(0, 2 * math.pi - 1e-9),
           st.floats(-math.pi, math.pi))
    def test_round_trip(self, n0, theta, phi, global_phase):
        s = state_from_bloch(BlochPoint(n0, theta, phi))
        rot = complex(math.cos(global_phase), math.sin(global_phase))
        b = bloch_coordinates(TwoLevelState(0.0, s.psi_b * rot, s.psi_s * rot))
        assert b.n_total == pytest.approx(n0, rel=1e-12)
        assert b.theta == pytest.approx(theta, abs=1e-12)
        dphi = (b.phi - phi + math.pi) % (2 * math.pi) - math.pi
        assert abs(dphi) < 1e-12
