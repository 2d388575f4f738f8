import math

import numpy as np
import pytest

from fluxchain import (FitError, ModelError, NormalModeHamiltonian,
                       anticrossing_gap, assemble, build_mode_ops, combined_t1,
                       decay_rate, eigensolve_lowest, purcell_t1,
                       two_mode_spectrum)
from fluxchain.hamiltonian import ExpTerm, structured_operator


def _nmh(c0=0.0, modes=((3.138, 14),), terms=()):
    return NormalModeHamiltonian(
        c0=c0,
        mode_coeffs=tuple(a for a, _ in modes),
        dims=tuple(d for _, d in modes),
        exp_terms=tuple(ExpTerm(amp=a, b=tuple(b)) for a, b in terms),
    )


class TestModeOps:
    def test_dim2_closed_form(self):
        theta, n = build_mode_ops(2)
        s = 1.0 / math.sqrt(2.0)
        assert np.allclose(theta, [[0, s], [s, 0]])
        assert np.allclose(np.abs(n), [[0, s], [s, 0]])
        assert np.allclose(n, -n.conj().T * -1)   # Hermitian
        assert np.allclose(n, n.conj().T)

    def test_number_ladder_diagonal(self):
        theta, n = build_mode_ops(8)
        total = n @ n + theta @ theta
        diag = np.real(np.diag(total))
        assert np.allclose(diag[:-1], 2 * np.arange(7) + 1)
        assert np.allclose(total - np.diag(np.diag(total)), 0.0, atol=1e-14)

    def test_canonical_commutator(self):
        theta, n = build_mode_ops(9)
        comm = theta @ n - n @ theta
        assert np.allclose(np.diag(comm)[:-1], 1j * np.ones(8))

    def test_rejects_dim_below_2(self):
        with pytest.raises(ModelError):
            build_mode_ops(1)


class TestAssemble:
    def test_harmonic_spectrum_exact(self):
        # levels below the last-diagonal truncation artifact are exact
        h = _nmh(c0=2.0, modes=((3.138, 14),))
        w = np.linalg.eigvalsh(assemble(h))
        expect = 2.0 + 3.138 * (2 * np.arange(6) + 1)
        assert np.allclose(w[:6], expect, atol=1e-10)

    def test_scalar_term_limit(self):
        amp = 1.5 + 0.5j
        h = _nmh(modes=((2.0, 4), (3.0, 3)), terms=((amp, (0.0, 0.0)),))
        base = _nmh(modes=((2.0, 4), (3.0, 3)))
        diff = assemble(h) - assemble(base)
        assert np.allclose(diff, (amp + amp.conjugate()) * np.eye(12))

    def test_hermitian_exactly(self):
        h = _nmh(c0=1.0, modes=((2.0, 5), (3.0, 4)),
                 terms=((1.0 + 2.0j, (0.3, -0.7)), (-4.0 + 0j, (0.9, 0.2))))
        mat = assemble(h)
        assert np.abs(mat - mat.conj().T).max() == 0.0

    def test_single_nonzero_b_matches_kron_oracle(self):
        # exp term acting on one mode only == kron(identity, single-mode op)
        from fluxchain.hamiltonian import exp_theta_factor
        amp, b = -2.5 + 0j, 0.6
        h = _nmh(modes=((2.0, 6), (5.0, 5)), terms=((amp, (0.0, b)),))
        single = amp * exp_theta_factor(b, 5)
        single = single + single.conj().T
        oracle = assemble(_nmh(modes=((2.0, 6), (5.0, 5)))) + np.kron(np.eye(6), single)
        w_oracle = np.linalg.eigvalsh(oracle)
        w = np.linalg.eigvalsh(assemble(h))
        assert np.allclose(w, w_oracle, atol=1e-10)

    def test_mode_reordering_invariance(self):
        terms = ((1.0 + 1.0j, (0.3, -0.5, 0.1)),)
        h1 = _nmh(modes=((2.0, 4), (3.0, 3), (5.0, 5)), terms=terms)
        h2 = _nmh(modes=((5.0, 5), (2.0, 4), (3.0, 3)),
                  terms=(((1.0 + 1.0j), (0.1, 0.3, -0.5)),))
        w1 = np.linalg.eigvalsh(assemble(h1))
        w2 = np.linalg.eigvalsh(assemble(h2))
        assert np.allclose(w1, w2, atol=1e-10)

    def test_dimension_guard(self):
        h = _nmh(modes=((1.0, 50), (1.0, 50), (1.0, 50)))
        with pytest.raises(ModelError, match="guard"):
            assemble(h)

    def test_structured_operator_matches_dense(self):
        h = _nmh(c0=0.5, modes=((2.0, 5), (3.0, 4)),
                 terms=((1.0 + 2.0j, (0.3, -0.7)),))
        dense = assemble(h)
        op = structured_operator(h)
        rng = np.random.default_rng(0)
        v = rng.standard_normal(20) + 1j * rng.standard_normal(20)
        assert np.allclose(op @ v, dense @ v, atol=1e-12)


class TestEigensolve:
    def test_2x2(self):
        w = eigensolve_lowest(np.array([[0.0, 1.0], [1.0, 0.0]]), 2)
        assert np.allclose(w.eigenvalues, [-1.0, 1.0])

    def test_harmonic_oracle(self):
        h = _nmh(c0=1.0, modes=((2.5, 12), (4.0, 8)))
        res = eigensolve_lowest(h, 6)
        levels = sorted(1.0 + 2.5 * (2 * i + 1) + 4.0 * (2 * j + 1)
                        for i in range(12) for j in range(8))[:6]
        assert np.allclose(res.eigenvalues, levels, atol=1e-10)

    def test_escalation_on_converged_model_is_tiny(self):
        h = _nmh(c0=1.0, modes=((2.5, 12), (4.0, 8)),
                 terms=((-0.5 + 0j, (0.05, 0.02)),))
        res = eigensolve_lowest(h, 4, escalate=True)
        assert res.convergence_delta < 1e-8

    def test_variational_monotonicity(self):
        # eigenvalues decrease or stabilize as dims grow
        terms = ((-3.0 + 0j, (0.4, 0.3)),)
        prev = None
        for d in (4, 6, 8, 10):
            h = _nmh(modes=((2.0, d), (3.0, d)), terms=terms)
            w = eigensolve_lowest(h, 3).eigenvalues
            if prev is not None:
                assert np.all(w <= prev + 1e-9)
            prev = w

    def test_matrix_escalation_rejected(self):
        with pytest.raises(ModelError):
            eigensolve_lowest(np.eye(4), 2, escalate=True)

    def test_k_bound(self):
        with pytest.raises(ModelError):
            eigensolve_lowest(np.eye(3), 5)

    def test_csv_format(self):
        res = eigensolve_lowest(np.diag([1.0, 2.0, 3.0]), 2)
        assert res.to_csv().splitlines()[0] == "index,energy_ghz"


class TestAntiCrossing:
    def test_recovers_coupling_from_synthetic_sweep(self):
        g = 9.8e-3   # GHz
        spectra = two_mode_spectrum(np.linspace(-0.5, 0.5, 201), g)
        res = anticrossing_gap(spectra, pair=0)
        assert res.g == pytest.approx(g, abs=1e-4)
        assert res.phi_min == pytest.approx(0.0, abs=1e-6)

    def test_zero_coupling_reports_no_anticrossing(self):
        spectra = two_mode_spectrum(np.linspace(-0.5, 0.5, 200), 0.0)
        with pytest.raises(FitError, match="no anti-crossing detected"):
            anticrossing_gap(spectra, pair=0)

    def test_explicit_resolution_bound(self):
        spectra = two_mode_spectrum(np.linspace(-0.5, 0.5, 201), 9.8e-3)
        with pytest.raises(FitError, match="bounded by"):
            anticrossing_gap(spectra, pair=0, resolution=0.1)

    def test_needs_enough_points(self):
        spectra = two_mode_spectrum(np.linspace(-1, 1, 4), 1e-2)
        with pytest.raises(ModelError, match="5 flux points"):
            anticrossing_gap(spectra, pair=0)

    def test_edge_minimum_rejected(self):
        spectra = two_mode_spectrum(np.linspace(0.1, 1.0, 10), 1e-2)
        with pytest.raises(FitError, match="edge"):
            anticrossing_gap(spectra, pair=0)


class TestLifetimes:
    def test_purcell_design_points(self):
        kappa, _ = decay_rate(6.46e9, 720.0)
        assert purcell_t1(9.8e6, 200e6, kappa) == pytest.approx(7.4e-6, rel=0.01)
        assert purcell_t1(9.8e6, 40e6, kappa) == pytest.approx(0.2955e-6, rel=0.01)

    def test_decoupled_limit(self):
        assert purcell_t1(0.0, 1e8, 1e7) == math.inf

    def test_zero_detuning_rejected(self):
        with pytest.raises(ModelError, match="divergent"):
            purcell_t1(1e6, 0.0, 1e7)

    def test_combined_reciprocal_sum(self):
        assert combined_t1(1.77e-6, math.inf) == 1.77e-6
        assert combined_t1(2e-6, 2e-6) == pytest.approx(1e-6)
        assert combined_t1(1.77e-6, 7.388e-6) == pytest.approx(1.428e-6, rel=1e-3)

    def test_combined_below_min(self):
        for t1p in (0.5e-6, 2e-6, 100e-6):
            assert combined_t1(1.77e-6, t1p) <= min(1.77e-6, t1p)


def test_json_round_trip():
    h = _nmh(c0=1746.021, modes=((3.138, 14), (5.331, 7)),
             terms=((20.283 + 0.015j, (-0.001, -0.439)),))
    h2 = NormalModeHamiltonian.from_json(h.to_json())
    assert h2 == h
