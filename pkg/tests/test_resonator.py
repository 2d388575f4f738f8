import math
from dataclasses import replace

import numpy as np
import pytest

from fluxchain import (FitError, ModelError, S21Fit, calibrate_f_bare,
                       decay_rate, default_device, fit_s21, flux_sensitivity,
                       resonant_freq, s21_model, squid_phase, state_shift)
from fluxchain.resonator import (ResonatorModel, read_s21_csv, squid_inductance,
                                 write_s21_csv)
from fluxchain.units import PHI0, TWO_PI


@pytest.fixture(scope="module")
def model():
    return calibrate_f_bare(default_device())


class TestSquidPhase:
    def test_zero_flux(self, model):
        assert squid_phase(model, 0.0) == 0.0

    def test_design_screening(self, model):
        # 2*pi*199 pH*1200 nA / Phi0
        assert model.beta_rf == pytest.approx(0.726, abs=1e-3)
        assert model.beta_rf < 1.0

    def test_against_bisection_oracle(self, model):
        beta = model.beta_rf
        lo, hi = 0.0, TWO_PI
        for _ in range(80):   # plain bisection of phi + beta sin(phi) = pi/2
            mid = 0.5 * (lo + hi)
            if mid + beta * math.sin(mid) < math.pi / 2:
                lo = mid
            else:
                hi = mid
        root = squid_phase(model, 0.25)
        assert root == pytest.approx(0.5 * (lo + hi), abs=1e-10)
        assert abs(root + beta * math.sin(root) - math.pi / 2) < 1e-12

    def test_multivalued_regime_rejected(self):
        m = ResonatorModel(f_bare=8e9, ic_tres=3e-6, l_tres=400e-12, q_total=700)
        assert m.beta_rf > 1.0
        with pytest.raises(ModelError, match="multivalued"):
            squid_phase(m, 0.1)


class TestResonantFreq:
    def test_calibrated_maximum(self, model):
        assert resonant_freq(model, 0.0) == pytest.approx(6.46e9, rel=1e-9)

    def test_periodic_and_even_exactly(self, model):
        assert resonant_freq(model, 0.3) == resonant_freq(model, 1.3)
        assert resonant_freq(model, -0.3) == resonant_freq(model, 0.3)

    def test_monotone_decreasing_to_validity_edge(self, model):
        phi = np.linspace(0.0, 0.4799, 60)
        f = [resonant_freq(model, x) for x in phi]
        assert np.all(np.diff(f) < 0)

    def test_tuning_range_near_design(self, model):
        rng = resonant_freq(model, 0.0) - resonant_freq(model, 0.48)
        assert rng == pytest.approx(1.2e9, rel=0.25)

    def test_validity_window(self, model):
        with pytest.raises(ModelError, match="half-flux"):
            resonant_freq(model, 0.495)

    def test_inductance_grows_toward_half_flux(self, model):
        assert squid_inductance(model, 0.45) > squid_inductance(model, 0.0)


class TestFluxSensitivity:
    def test_sweet_spot_is_extremum(self, model):
        assert flux_sensitivity(model, 0.0) == 0.0

    def test_operating_point_slope(self, model):
        s = flux_sensitivity(model, 0.25)
        assert s < 0.0
        assert abs(s) * 100.0 == pytest.approx(85.0, rel=0.30)

    def test_antisymmetric(self, model):
        assert flux_sensitivity(model, -0.25) == -flux_sensitivity(model, 0.25)


class TestStateShift:
    def test_zero_step(self, model):
        assert state_shift(model, 0.25, 0.0).shift_hz == 0.0

    def test_full_latched_step(self, model):
        sh = state_shift(model, 0.25, 0.05)
        assert abs(sh.shift_hz) == pytest.approx(85e6, rel=0.25)
        assert sh.shift_over_linewidth > 5.0

    def test_small_step_linearizes(self, model):
        delta = 1e-3
        sh = state_shift(model, 0.25, delta)
        linear = 2.0 * delta * flux_sensitivity(model, 0.25) * 1e9  # MHz/mPhi0 -> Hz/Phi0
        assert sh.shift_hz == pytest.approx(linear, rel=0.01)


class TestS21Model:
    def _fit(self, **kw):
        base = dict(f0=6.46e9, q_total=720.0, q_e_tilde=760.0, phi_asym=0.0,
                    amplitude=1.0)
        base.update(kw)
        return S21Fit(**base)

    def test_off_resonance_baseline(self):
        fit = self._fit(amplitude=0.7)
        assert s21_model(fit.f0 + 1e12, fit) == pytest.approx(0.7, rel=1e-4)

    def test_on_resonance_dip(self):
        fit = self._fit()
        assert s21_model(fit.f0, fit) == pytest.approx(1.0 - 720.0 / 760.0, rel=1e-12)
        assert s21_model(fit.f0, fit) == pytest.approx(0.0526, abs=1e-4)

    def test_q_external_from_asymmetry(self):
        fit = self._fit(phi_asym=0.3)
        assert fit.q_external == pytest.approx(760.0 / math.cos(0.3))

    def test_unphysical_internal_q_flagged(self):
        fit = self._fit(q_e_tilde=700.0)   # Qe < Q -> negative internal loss
        with pytest.raises(ModelError, match="unphysical"):
            fit.q_internal


class TestFitS21:
    def _trace(self, fit, n=201, span_lw=8.0, noise=0.0, seed=0):
        lw = fit.f0 / fit.q_total
        f = np.linspace(fit.f0 - span_lw * lw, fit.f0 + span_lw * lw, n)
        y = s21_model(f, fit)
        if noise:
            rng = np.random.default_rng(seed)
            y = y * (1.0 + noise * rng.standard_normal(n))
        return np.column_stack([f, y])

    def test_noiseless_round_trip(self):
        truth = S21Fit(f0=6.46e9, q_total=720.0, q_e_tilde=760.0,
                       phi_asym=0.15, amplitude=0.9)
        fit = fit_s21(self._trace(truth), n_bootstrap=0)
        assert fit.f0 == pytest.approx(truth.f0, rel=1e-8)
        assert fit.q_total == pytest.approx(truth.q_total, rel=1e-8)
        assert fit.q_e_tilde == pytest.approx(truth.q_e_tilde, rel=1e-8)
        assert fit.phi_asym == pytest.approx(truth.phi_asym, rel=1e-6)
        assert fit.amplitude == pytest.approx(truth.amplitude, rel=1e-8)

    def test_noisy_recovery_within_2_bootstrap_sigma(self):
        truth = S21Fit(f0=6.46e9, q_total=720.0, q_e_tilde=760.0,
                       phi_asym=0.0, amplitude=1.0)
        trace = self._trace(truth, noise=0.01, seed=3)
        fit = fit_s21(trace, n_bootstrap=300, seed=0)
        assert abs(fit.q_total - 720.0) < 2 * fit.q_total_err
        assert abs(fit.q_e_tilde - 760.0) < 2 * fit.q_e_tilde_err
        # order-of-magnitude sanity on the bootstrap sigmas
        assert 0.5 < fit.q_total_err < 250.0
        assert 0.5 < fit.q_e_tilde_err < 600.0

    def test_error_decreases_with_noise(self):
        truth = S21Fit(f0=6.46e9, q_total=720.0, q_e_tilde=760.0,
                       phi_asym=0.0, amplitude=1.0)
        errs = []
        for noise in (1e-2, 1e-3, 1e-4):
            fit = fit_s21(self._trace(truth, noise=noise, seed=11), n_bootstrap=0)
            errs.append(abs(fit.q_total - truth.q_total))
        assert errs[2] < errs[0]

    def test_insufficient_span(self):
        truth = S21Fit(f0=6.46e9, q_total=720.0, q_e_tilde=760.0,
                       phi_asym=0.0, amplitude=1.0)
        with pytest.raises(FitError, match="insufficient span"):
            fit_s21(self._trace(truth, span_lw=0.25))

    def test_needs_enough_points(self):
        truth = S21Fit(f0=6.46e9, q_total=720.0, q_e_tilde=760.0,
                       phi_asym=0.0, amplitude=1.0)
        with pytest.raises(FitError, match="20"):
            fit_s21(self._trace(truth, n=10))

    def test_bootstrap_deterministic_and_map_order_free(self):
        truth = S21Fit(f0=6.46e9, q_total=720.0, q_e_tilde=760.0,
                       phi_asym=0.0, amplitude=1.0)
        trace = self._trace(truth, noise=0.01, seed=5)
        a = fit_s21(trace, n_bootstrap=50, seed=9)
        b = fit_s21(trace, n_bootstrap=50, seed=9)
        assert a == b

    def test_csv_round_trip(self):
        f = np.array([1e9, 2e9])
        v = np.array([0.5, 0.25])
        arr = read_s21_csv(write_s21_csv(f, v))
        assert np.array_equal(arr, np.column_stack([f, v]))


class TestDecayRate:
    def test_device_ringup(self):
        kappa, ringup = decay_rate(6.46e9, 720.0)
        assert ringup == pytest.approx(720.0 / (TWO_PI * 6.46e9), rel=1e-12)
        assert ringup == pytest.approx(17.7e-9, rel=0.005)   # paper rounds to 18 ns

    def test_half_q_halves_ringup(self):
        _, r1 = decay_rate(6.46e9, 720.0)
        _, r2 = decay_rate(6.46e9, 360.0)
        assert r2 == pytest.approx(r1 / 2.0, rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ModelError):
            decay_rate(0.0, 720.0)


def test_calibration_uses_f_res_max():
    p = default_device()
    custom = calibrate_f_bare(replace(p, f_res_max=6.0e9))
    assert resonant_freq(custom, 0.0) == pytest.approx(6.0e9, rel=1e-9)
