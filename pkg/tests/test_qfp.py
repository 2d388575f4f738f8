import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fluxchain import (FitError, ModelError, SCurveFit, beta_l, default_device,
                       effective_mutual, fit_scurve, qubit_flux_signal,
                       required_ratio, scurve_prob, separation_fidelity,
                       susceptibility)
from fluxchain.qfp import read_scurve_csv, write_scurve_csv


@pytest.fixture(scope="module")
def dev():
    return default_device()


class TestBetaL:
    def test_zero_at_half_flux_exactly(self, dev):
        assert beta_l(dev, 0.5) == 0.0
        assert beta_l(dev, -1.5) == 0.0

    def test_design_maximum(self, dev):
        assert beta_l(dev, 0.0) == pytest.approx(2.50, abs=0.01)

    def test_full_frustration_flips_sign(self, dev):
        assert beta_l(dev, 1.0) == pytest.approx(-beta_l(dev, 0.0))

    @given(st.floats(-3.0, 3.0))
    def test_even_and_periodic(self, phi):
        dev = default_device()
        assert beta_l(dev, -phi) == pytest.approx(beta_l(dev, phi), abs=1e-15)
        assert beta_l(dev, phi + 2.0) == pytest.approx(beta_l(dev, phi), rel=1e-12, abs=1e-12)


class TestSusceptibility:
    def test_isolation_point(self, dev):
        assert susceptibility(dev, 0.0) == 0.0

    def test_design_value(self, dev):
        # (1/416 pH) * 2.5/3.5
        assert susceptibility(dev, 2.5) == pytest.approx(1.717e9, rel=1e-3)

    def test_asymptote_is_inverse_inductance(self, dev):
        assert susceptibility(dev, 1e12) == pytest.approx(1.0 / dev.l_qfp, rel=1e-9)

    def test_pole(self, dev):
        with pytest.raises(ModelError, match="pole"):
            susceptibility(dev, -1.0)


class TestEffectiveMutual:
    def test_decoupled(self, dev):
        assert effective_mutual(dev, 0.0) == 0.0

    def test_design_value(self, dev):
        assert effective_mutual(dev, 1.717e9) == pytest.approx(7.25e-12, rel=2e-3)

    def test_linearity(self, dev):
        from dataclasses import replace
        doubled = replace(dev, m_qub_qfp=2 * dev.m_qub_qfp)
        assert effective_mutual(doubled, 1e9) == pytest.approx(2 * effective_mutual(dev, 1e9))

    def test_monotone_in_beta(self, dev):
        betas = np.linspace(0.0, beta_l(dev, 0.0), 50)
        m = [effective_mutual(dev, susceptibility(dev, b)) for b in betas]
        assert np.all(np.diff(m) > 0)


class TestSCurveProb:
    def test_midpoint(self):
        assert scurve_prob(0.0, 0.0, 1e-3) == 0.5

    def test_direct_value(self):
        # (phi - center)/w = 2 -> (1 - tanh 2)/2
        expect = 0.5 * (1.0 - math.tanh(2.0))
        assert scurve_prob(2.8e-3, 0.0, 1.40e-3) == pytest.approx(expect, rel=1e-12)
        assert expect == pytest.approx(0.0180, abs=1e-4)

    @given(st.floats(-10, 10), st.floats(-2, 2))
    def test_symmetry(self, x, c):
        w = 0.7
        assert scurve_prob(c + x, c, w) + scurve_prob(c - x, c, w) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_width(self):
        with pytest.raises(ModelError):
            scurve_prob(0.0, 0.0, 0.0)


class TestRequiredRatio:
    def test_five_nines(self):
        assert required_ratio(0.99999) == pytest.approx(12.2, abs=0.05)

    def test_measured_level(self):
        assert required_ratio(0.9991) == pytest.approx(7.71, abs=0.01)

    def test_small_target(self):
        assert required_ratio(1e-12) == pytest.approx(0.0, abs=1e-9)

    def test_domain(self):
        for bad in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ModelError):
                required_ratio(bad)


class TestFitScurve:
    def _samples(self, center, w, phi, trials=1000, rng=None):
        rows = []
        for x in phi:
            prob = scurve_prob(x, center, w)
            s = rng.binomial(trials, prob) if rng is not None else prob * trials
            rows.append((x, float(s), float(trials)))
        return rows

    def test_noiseless_round_trip(self):
        phi = np.linspace(-6e-3, 6e-3, 25)
        fit = fit_scurve(self._samples(0.0, 1.38e-3, phi))
        assert fit.center == pytest.approx(0.0, abs=1e-9)
        assert fit.width == pytest.approx(1.38e-3, rel=1e-6)

    def test_binomial_recovery_within_3_sigma(self):
        rng = np.random.default_rng(0)
        phi = np.linspace(-6e-3, 6e-3, 25)
        fit = fit_scurve(self._samples(0.0, 1.42e-3, phi, trials=1000, rng=rng))
        assert abs(fit.width - 1.42e-3) < 3 * fit.width_err

    def test_consistency_as_trials_grow(self):
        errs = []
        for k, trials in enumerate((100, 1000, 10000)):
            rng = np.random.default_rng(42 + k)
            phi = np.linspace(-6e-3, 6e-3, 25)
            fit = fit_scurve(self._samples(0.5e-3, 1.40e-3, phi, trials=trials, rng=rng))
            errs.append(abs(fit.width - 1.40e-3))
        assert errs[-1] < errs[0]

    def test_degenerate_probabilities(self):
        rows = [(x, 50.0, 100.0) for x in np.linspace(-1e-3, 1e-3, 8)]
        with pytest.raises(FitError, match="width unidentifiable"):
            fit_scurve(rows)

    def test_needs_four_distinct_points(self):
        with pytest.raises(FitError, match="4 distinct"):
            fit_scurve([(0.0, 1, 2), (1e-3, 1, 2), (2e-3, 1, 2)])

    def test_csv_round_trip(self):
        rows = [(-2e-3, 990.0, 1000.0), (0.0, 500.0, 1000.0), (2e-3, 10.0, 1000.0)]
        assert read_scurve_csv(write_scurve_csv(rows)) == pytest.approx(rows)


class TestSeparationFidelity:
    def test_identical_fits_give_zero(self):
        f = SCurveFit(center=0.0, width=1.4e-3, center_err=0, width_err=0)
        assert separation_fidelity(f, f).f_sep_max == pytest.approx(0.0, abs=1e-12)

    def test_measured_device_numbers(self):
        fl = SCurveFit(center=-5.36e-3, width=1.38e-3, center_err=0, width_err=0)
        fr = SCurveFit(center=+5.36e-3, width=1.42e-3, center_err=0, width_err=0)
        rep = separation_fidelity(fl, fr)
        assert rep.f_sep_max == pytest.approx(0.9991, abs=3e-4)
        assert rep.ratio == pytest.approx(10.72 / 1.40, rel=1e-6)

    def test_step_function_limit(self):
        fl = SCurveFit(center=-5e-3, width=1e-9, center_err=0, width_err=0)
        fr = SCurveFit(center=+5e-3, width=1e-9, center_err=0, width_err=0)
        assert separation_fidelity(fl, fr).f_sep_max == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.5001, 1.0 - 1e-9))
    def test_round_trip_with_required_ratio(self, f_target):
        w = 1.3e-3
        half = 0.5 * required_ratio(f_target) * w
        fl = SCurveFit(center=-half, width=w, center_err=0, width_err=0)
        fr = SCurveFit(center=+half, width=w, center_err=0, width_err=0)
        assert separation_fidelity(fl, fr).f_sep_max == pytest.approx(f_target, abs=1e-9)
