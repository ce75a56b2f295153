import json
import math

import numpy as np
import pytest

from magnon_duet.analysis import (KINK_IMPROVEMENT, AnalysisError, CouplingEstimate,
                                  decay_only_rate, extract_coupling, extrapolate_coupling,
                                  fit_relaxation, lz_report, selftrap_derivative,
                                  write_coupling_csv, write_report_json)
from magnon_duet.integrator import Schedule, integrate
from magnon_duet.physics import (TWO_PI, SystemParams, TwoLevelState, bulk_frequency,
                                 bulk_frequency_slope)
from magnon_duet.spectral import (MAIN_BULK, MAIN_SURFACE, SIDEBAND_UPPER, Ridge, RidgeSet)


def law_ridge(k=0.3, p_exp=5 / 7, fill=1.0, n0=3.0, tau=6.0, n_points=120):
    params = SystemParams.from_hz(200, 140, k_selftrap=k, p_exponent=p_exp)
    t = np.linspace(4.0, 10.0, n_points)
    n = n0 * np.exp(-2 * t / tau)
    freq = bulk_frequency(params, n) / TWO_PI
    return params, n, Ridge(t, freq, fill * np.sqrt(n), MAIN_BULK)


class TestSelftrapDerivative:
    @pytest.mark.parametrize("fill", [1.0, 0.37])
    def test_matches_analytic_slope(self, fill):
        params, n, ridge = law_ridge(fill=fill)
        d = selftrap_derivative(ridge)
        exact = bulk_frequency_slope(params, n) / fill ** 2
        inner = slice(5, -5)
        assert np.max(np.abs(d.slope[inner] / exact[inner] - 1)) < 0.03

    def test_rigid_trap_gives_zero(self):
        _, _, ridge = law_ridge(k=0.0)
        d = selftrap_derivative(ridge)
        assert np.max(np.abs(d.slope)) < 1e-6

    def test_linear_relation(self):
        t = np.linspace(0, 5, 40)
        a2 = np.linspace(4.0, 1.0, 40)
        ridge = Ridge(t, (200.0 - 3.0 * a2) / TWO_PI, np.sqrt(a2))
        d = selftrap_derivative(ridge)
        assert np.allclose(d.slope, -3.0, rtol=1e-8)
        assert d.at(2.5) == pytest.approx(-3.0)

    def test_too_short(self):
        _, _, ridge = law_ridge(n_points=9)
        with pytest.raises(AnalysisError):
            selftrap_derivative(ridge)

    def test_non_monotone(self):
        t = np.linspace(0, 5, 40)
        amp = 1.5 + np.sin(t)
        with pytest.raises(AnalysisError):
            selftrap_derivative(Ridge(t, 100 + amp, amp))


def labelled_set(a_b, a_s, a_sb, f_b, f_s, t):
    return RidgeSet((Ridge(t, f_b, a_b, MAIN_BULK), Ridge(t, f_s, a_s, MAIN_SURFACE),
                     Ridge(t, 2 * f_b - f_s, a_sb, SIDEBAND_UPPER)))


class TestCoupling:
    def setup_method(self):
        self.t = np.linspace(4, 8, 30)
        self.n_b = 2.0 * np.exp(-(self.t - 4) / 3)
        self.f_b = 160 + 10 * (2.0 - self.n_b)
        self.f_s = np.full_like(self.t, 140.0)

    def estimate(self, fill=1.0, a_sb=None):
        a_b = fill * np.sqrt(self.n_b)
        a_s = fill * np.full_like(self.t, 0.5)
        if a_sb is None:
            a_sb = fill * 0.02 * np.ones_like(self.t)
        ridges = labelled_set(a_b, a_s, a_sb, self.f_b, self.f_s, self.t)
        deriv = selftrap_derivative(ridges.labelled(MAIN_BULK)[0])
        return extract_coupling(ridges, deriv)

    def test_formula(self):
        est = self.estimate()
        slope = -TWO_PI * 10.0  # d omega / d n_b with fill 1
        for e in est:
            expected = e.a_sb * e.detuning ** 2 / (e.a_b ** 2 * e.a_s * abs(slope))
            assert e.omega_est == pytest.approx(expected, rel=1e-6)
            assert e.omega_est >= 0

    def test_zero_sideband(self):
        est = self.estimate(a_sb=np.zeros_like(self.t))
        assert all(e.omega_est == 0.0 for e in est)

    def test_fill_factor_invariance(self):
        a = [e.omega_est for e in self.estimate(1.0)]
        b = [e.omega_est for e in self.estimate(2.0)]
        assert np.allclose(a, b, rtol=1e-9)

    def test_flat_derivative_flagged(self):
        ridges = labelled_set(np.sqrt(self.n_b), 0.5 + 0 * self.t, 0.02 + 0 * self.t,
                              np.full_like(self.t, 160.0), self.f_s, self.t)
        deriv = selftrap_derivative(ridges.labelled(MAIN_BULK)[0])
        est = extract_coupling(ridges, deriv)
        assert est and not any(e.valid for e in est)
        assert all(math.isnan(e.omega_est) for e in est)

    def test_missing_labels(self):
        t = self.t
        ridges = RidgeSet((Ridge(t, self.f_b, np.sqrt(self.n_b), MAIN_BULK),))
        with pytest.raises(AnalysisError):
            extract_coupling(ridges, selftrap_derivative(ridges.ridges[0]))

    def test_extrapolation(self):
        est = [CouplingEstimate(t, 3.0 + 0.5 * (t - 4), 0, 0, 0, 0, 0, True)
               for t in np.linspace(4, 8, 20)]
        assert extrapolate_coupling(est, 3.3) == pytest.approx(3.0 - 0.35)
        assert math.isnan(extrapolate_coupling(est[:1], 3.3))

    def test_csv(self, tmp_path):
        est = self.estimate()
        write_coupling_csv(est, tmp_path / "c.csv")
        rows = (tmp_path / "c.csv").read_text().splitlines()
        assert rows[0] == "t,omega_hz"
        assert len(rows) == len(est) + 1
        assert float(rows[1].split(",")[1]) == pytest.approx(est[0].omega_est / TWO_PI)


class TestRelaxation:
    def test_pure_exponential(self):
        t = np.linspace(0, 8, 81)
        fit = fit_relaxation(t, 2.0 * np.exp(-t / 10.0))
        assert fit.kink_time is None
        assert len(fit.segments) == 1
        assert fit.tau == pytest.approx(10.0, abs=0.1)

    def test_kink(self):
        t = np.linspace(0, 10, 101)
        log_a = np.where(t < 4, -t / 10, -0.4 - (t - 4) / 3)
        fit = fit_relaxation(t, np.exp(log_a))
        assert fit.kink_time == pytest.approx(4.0, abs=0.2)
        assert [s.tau for s in fit.segments] == pytest.approx([10.0, 3.0], rel=0.02)
        assert fit.residual_rms <= (1 - KINK_IMPROVEMENT) * fit.single_rms

    def test_constant(self):
        fit = fit_relaxation(np.arange(10.0), np.full(10, 0.7))
        assert math.isinf(fit.tau)
        assert fit.kink_time is None

    def test_noise_40db(self):
        rng = np.random.default_rng(2)
        t = np.linspace(0, 10, 200)
        clean = np.exp(-t / 7.0)
        noisy = clean * (1 + rng.normal(0, 0.01, t.size))
        fit = fit_relaxation(t, noisy)
        assert fit.kink_time is None
        assert fit.tau == pytest.approx(7.0, rel=0.01)

    def test_errors(self):
        with pytest.raises(AnalysisError):
            fit_relaxation(np.arange(7.0), np.ones(7))
        with pytest.raises(AnalysisError):
            fit_relaxation(np.arange(10.0), np.r_[np.ones(9), 0.0])


def programmed_run(coupling_hz, rate_hz_per_s):
    params = SystemParams.from_hz(100, 100, coupling_hz=coupling_hz)
    alpha = TWO_PI * rate_hz_per_s
    half = 40 * params.coupling / alpha
    t_end = max(3 * half, half + 3 * math.pi / params.coupling)
    sch = Schedule.linear_sweep(alpha, 0.0, -half, t_end)
    h = np.array([[-alpha * half, params.coupling], [params.coupling, 0.0]])
    vecs = np.linalg.eigh(h)[1]
    start = TwoLevelState(-half, complex(vecs[0, 0]), complex(vecs[1, 0]))
    return params, integrate(params, start, sch, t_end=t_end, rel_tol=1e-9, abs_tol=1e-11,
                             sample_rate=400)


class TestLZReport:
    @pytest.mark.parametrize("coupling_hz,rate", [(1.0, 60.0), (1.3, 400.0)])
    def test_programmed_sweep(self, coupling_hz, rate):
        params, traj = programmed_run(coupling_hz, rate)
        rep = lz_report(traj, params)
        assert rep.crossing_rate_rad_s2 == pytest.approx(TWO_PI * rate, rel=1e-3)
        assert abs(rep.predicted_fraction - rep.observed_fraction) < 0.02
        assert math.isnan(rep.decay_only_rate_rad_s2)

    def test_adiabatic_limit(self):
        params, traj = programmed_run(1.5, 3.0)
        rep = lz_report(traj, params)
        assert rep.predicted_fraction < 1e-6
        assert rep.observed_fraction < 1e-3

    def test_window_shift_invariance(self, crossing_traj, crossing_scenario):
        params = crossing_scenario.params
        base = lz_report(crossing_traj, params).observed_fraction
        half = 0.5 * math.pi / params.coupling
        for shift in (-half, half):
            assert abs(lz_report(crossing_traj, params, shift).observed_fraction - base) < 0.03

    def test_no_crossing(self):
        params = SystemParams.from_hz(120, 100, coupling_hz=1.0)
        traj = integrate(params, TwoLevelState(0.0, 1 + 0j, 0j), t_end=1.0, sample_rate=100)
        with pytest.raises(AnalysisError):
            lz_report(traj, params)

    def test_window_past_end(self):
        params = SystemParams.from_hz(100, 100, coupling_hz=1.0)
        sch = Schedule.linear_sweep(TWO_PI * 50, 0.9, 0.0, 1.0)
        traj = integrate(params, TwoLevelState(0.0, 1 + 0j, 0j), sch, t_end=1.0,
                         sample_rate=200)
        with pytest.raises(AnalysisError):
            lz_report(traj, params)

    def test_decay_only_rate(self):
        params = SystemParams.from_hz(200, 140, k_selftrap=0.3, tau_b=6.0)
        rate = decay_only_rate(params, 1.0)
        assert rate == pytest.approx(TWO_PI * 200 * 0.3 * 5 / 7 * 2 / 6.0)
        assert decay_only_rate(params.with_(tau_b=math.inf), 1.0) == 0.0

    def test_report_json(self, tmp_path, crossing_traj, crossing_scenario):
        rep = lz_report(crossing_traj, crossing_scenario.params)
        write_report_json(rep, tmp_path / "r.json")
        data = json.loads((tmp_path / "r.json").read_text())
        for key in ("predicted_fraction", "observed_fraction", "crossing_time_s",
                    "crossing_rate_rad_s2", "coupling_fit_hz", "decay_only_rate_rad_s2"):
            assert key in data
        assert data["coupling_fit_hz"] == pytest.approx(1.4)
