import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsl.dynamics import SplitHamiltonian, evolve_exp
from qsl.errors import CommutatorError
from qsl.linalg import SIGMA_X, SIGMA_Z, expectation, variance
from qsl.measurement import (
    MeasurementSpec,
    abs_penalty,
    accumulated_penalty,
    amplitude_decay,
    build_h1,
    h1_expectation_ratio,
    h1_variance_ratio,
    penalty_values,
    quartic_penalty,
    small_time_speed,
    split_hamiltonian,
    to_eigenbasis,
    zeno_prediction,
)
from qsl.spin import SpinExampleConfig, build_example, observable
from conftest import KET0, PLUS, SQ2, random_state, random_unitary


def spin_spec(f=5.0, record=0.02):
    cfg = SpinExampleConfig(f=f, a_record=record)
    h, spec, psi0 = build_example(cfg)
    return h, spec, psi0


class TestSpecValidation:
    def test_rejects_bad_accuracy(self):
        with pytest.raises(ValueError):
            MeasurementSpec(SIGMA_Z, 0.0, 1.0)

    def test_rejects_negative_strength(self):
        with pytest.raises(ValueError):
            MeasurementSpec(SIGMA_Z, 1.0, -1.0)

    def test_rejects_negative_penalty(self):
        with pytest.raises(ValueError):
            MeasurementSpec(SIGMA_Z, 1.0, 1.0, penalty=lambda x: x)

    def test_rejects_offset_penalty(self):
        with pytest.raises(ValueError):
            MeasurementSpec(SIGMA_Z, 1.0, 1.0, penalty=lambda x: x**2 + 1e-3)

    def test_rejects_non_hermitian_observable(self):
        with pytest.raises(Exception):
            MeasurementSpec(np.array([[0, 1], [0, 0]]), 1.0, 1.0)

    def test_other_penalties_accepted(self):
        MeasurementSpec(SIGMA_Z, 1.0, 1.0, penalty=abs_penalty)
        MeasurementSpec(SIGMA_Z, 1.0, 1.0, penalty=quartic_penalty)


class TestBuildH1:
    def test_spin_penalty_values(self):
        _, spec, _ = spin_spec()
        g, _ = penalty_values(spec)
        np.testing.assert_allclose(g, [0.25, 2.25], atol=1e-12)

    def test_spin_h1_eigenvalues(self):
        _, spec, _ = spin_spec(f=5.0)
        np.testing.assert_allclose(np.linalg.eigvalsh(build_h1(spec)), [1.25, 11.25], atol=1e-10)

    @pytest.mark.parametrize("hbar", [1.0, 0.3])
    def test_quadratic_penalty_matches_polynomial(self, hbar):
        _, spec, _ = spin_spec(f=2.0)
        a, at, da = spec.observable, spec.record, spec.accuracy
        poly = hbar * spec.strength / (4 * da**2) * (a @ a + at**2 * np.eye(2) - 2 * at * a)
        np.testing.assert_allclose(build_h1(spec, hbar=hbar), poly, atol=1e-12)

    def test_zero_strength_gives_zero(self):
        _, spec, _ = spin_spec(f=0.0)
        assert np.max(np.abs(build_h1(spec))) == 0.0

    def test_time_dependent_record(self):
        spec = MeasurementSpec(np.diag([0.0, 1.0]), 1.0, 1.0, record=lambda t: t)
        h = split_hamiltonian(np.zeros((2, 2)), spec)
        assert not h.time_independent
        np.testing.assert_allclose(h.h1_at(1.0), np.diag([0.25, 0.0]), atol=1e-15)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.floats(0, 50), st.floats(-2, 2), st.floats(0.1, 3))
    @settings(max_examples=50, deadline=None)
    def test_h1_is_positive_semidefinite(self, seed, d, f, record, accuracy):
        rng = np.random.default_rng(seed)
        u = random_unitary(rng, d)
        a = (u * rng.uniform(-2, 2, d)) @ u.conj().T
        spec = MeasurementSpec(0.5 * (a + a.conj().T), accuracy, f, record)
        h1 = build_h1(spec)
        assert np.max(np.abs(h1 - h1.conj().T)) <= 1e-12
        assert np.linalg.eigvalsh(h1).min() >= -1e-10 * max(1.0, np.abs(h1).max())


class TestAmplitudeDecay:
    def test_accumulated_constant_record(self):
        _, spec, _ = spin_spec()
        np.testing.assert_allclose(accumulated_penalty(spec, 2.0), [0.5, 4.5], atol=1e-12)

    def test_accumulated_varying_record(self):
        # g((0 - t)/1) = t^2/4 integrates to t^3/12; g((1 - t)) integrates to ((t-1)^3 + 1)/12
        spec = MeasurementSpec(np.diag([0.0, 1.0]), 1.0, 1.0, record=lambda t: t)
        np.testing.assert_allclose(accumulated_penalty(spec, 2.0), [8 / 12, 2 / 12], atol=1e-12)

    @pytest.mark.parametrize("f", [0.5, 5.0, 30.0])
    def test_matches_numerics_without_free_part(self, f):
        _, spec, psi0 = spin_spec(f=f)
        h = split_hamiltonian(np.zeros((2, 2)), spec)
        t = 0.7
        numeric = to_eigenbasis(spec, evolve_exp(h, psi0, [0.0, t]).phi[-1])
        np.testing.assert_allclose(amplitude_decay(spec, to_eigenbasis(spec, psi0), t), numeric, atol=1e-10)

    def test_population_ratio_decays(self):
        # x difference is 2 t; weights ratio picks up exp(-2 f * 2 t)
        f, t = 1.5, 0.25
        _, spec, psi0 = spin_spec(f=f)
        c0 = to_eigenbasis(spec, psi0)
        c = amplitude_decay(spec, c0, t)
        ratio = (abs(c[1]) ** 2 / abs(c[0]) ** 2) / (abs(c0[1]) ** 2 / abs(c0[0]) ** 2)
        assert ratio == pytest.approx(math.exp(-2 * f * 2 * t), rel=1e-12)


class TestRatios:
    @pytest.mark.parametrize("f", [0.0, 1.0, 5.0, 20.0])
    def test_matches_operator_moments(self, f):
        h, spec, psi0 = spin_spec(f=f)
        t = 0.8
        psi_t = evolve_exp(h, psi0, [0.0, t]).psi[-1]
        assert h1_expectation_ratio(spec, psi0, t) == pytest.approx(expectation(h.h1, psi_t), abs=1e-10)
        assert h1_variance_ratio(spec, psi0, t) == pytest.approx(variance(h.h1, psi_t), abs=1e-10)

    def test_strong_limit(self):
        f = 200.0
        h, spec, psi0 = spin_spec(f=f)
        psi_t = evolve_exp(h, psi0, [0.0, 1.0]).psi[-1]
        limit = f * 0.25
        assert h1_expectation_ratio(spec, psi0, 1.0) == pytest.approx(limit, rel=1e-10)
        assert expectation(h.h1, psi_t) == pytest.approx(limit, rel=1e-8)
        assert h1_variance_ratio(spec, psi0, 1.0) <= 1e-10
        assert variance(h.h1, psi_t) <= 1e-8

    @given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.floats(0, 10), st.floats(0.05, 1.5))
    @settings(max_examples=40, deadline=None)
    def test_commuting_random_systems(self, seed, d, f, t):
        rng = np.random.default_rng(seed)
        u = random_unitary(rng, d)
        a = (u * rng.uniform(-1, 1, d)) @ u.conj().T
        h0 = (u * rng.uniform(-2, 2, d)) @ u.conj().T
        spec = MeasurementSpec(0.5 * (a + a.conj().T), 0.5, f, 0.1)
        h = split_hamiltonian(0.5 * (h0 + h0.conj().T), spec)
        psi0 = random_state(rng, d)
        psi_t = evolve_exp(h, psi0, [0.0, t]).psi[-1]
        scale = max(1.0, float(np.abs(h.h1).max()))
        assert abs(h1_expectation_ratio(spec, psi0, t) - expectation(h.h1, psi_t)) <= 1e-9 * scale
        assert abs(h1_variance_ratio(spec, psi0, t) - variance(h.h1, psi_t)) <= 1e-9 * scale**2


class TestZeno:
    def test_spin_attractor(self):
        _, spec, psi0 = spin_spec(f=10.0)
        z = zeno_prediction(spec, psi0)
        assert z.indices == (0,) and z.r == 0 and not z.tie
        a_vals, vecs = np.linalg.eigh(spec.observable)
        assert a_vals[0] == pytest.approx(0.03)
        assert abs(np.vdot(vecs[:, 0], z.attractor_state)) == pytest.approx(1.0, abs=1e-12)
        assert z.limit_h1_expectation == pytest.approx(2.5)

    def test_spin_fidelity_at_f10(self):
        h, spec, psi0 = spin_spec(f=10.0)
        z = zeno_prediction(spec, psi0)
        psi_t = evolve_exp(h, psi0, [0.0, 1.0]).psi[-1]
        assert abs(np.vdot(z.attractor_state, psi_t)) ** 2 >= 1 - 1e-6

    def test_tie_reports_all(self):
        # record halfway between the eigenvalues: both penalties are 1/4
        _, spec, psi0 = spin_spec(f=10.0, record=0.04)
        z = zeno_prediction(spec, psi0)
        assert z.indices == (0, 1) and z.tie
        assert abs(np.vdot(psi0, z.attractor_state)) == pytest.approx(1.0, abs=1e-12)

    def test_skips_empty_eigenspace(self):
        # the minimizing eigenvalue has no weight, so the next one wins
        spec = MeasurementSpec(np.diag([0.0, 1.0, 2.0]), 1.0, 5.0, 0.0)
        z = zeno_prediction(spec, np.array([0, 1, 1]) / SQ2)
        assert z.indices == (1,)

    def test_requires_constant_record(self):
        spec = MeasurementSpec(SIGMA_Z, 1.0, 1.0, record=lambda t: t)
        with pytest.raises(ValueError):
            zeno_prediction(spec, KET0)


class TestSmallTime:
    def test_spin_coefficients(self):
        h, spec, psi0 = spin_spec(f=1.0)
        st_ = small_time_speed(spec, h.h0, psi0, 0.01)
        assert st_.x_coefficient == pytest.approx(SQ2, abs=1e-12)
        assert st_.variance0 == pytest.approx(1.0, abs=1e-12)
        assert st_.speeds_up and st_.in_window
        assert st_.speed == pytest.approx(2 * math.sqrt(1 + 0.02 * SQ2), abs=1e-12)

    def test_zero_time_is_free_speed(self):
        h, spec, psi0 = spin_spec(f=3.0)
        assert small_time_speed(spec, h.h0, psi0, 0.0).speed == pytest.approx(2.0, abs=1e-12)

    def test_window_warning(self):
        h, spec, psi0 = spin_spec(f=1.0)
        with pytest.warns(RuntimeWarning):
            res = small_time_speed(spec, h.h0, psi0, 0.1)
        assert not res.in_window
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            small_time_speed(spec, h.h0, psi0, 0.01)

    def test_rejects_non_commuting(self):
        spec = MeasurementSpec(SIGMA_X, 1.0, 1.0, 0.3)
        with pytest.raises(CommutatorError):
            small_time_speed(spec, SIGMA_Z, PLUS, 0.01)

    def test_sign_agrees_with_variance_slope(self):
        # X > 0 iff dH0^2 grows at t = 0; check against a centered difference
        rng = np.random.default_rng(11)
        checked = 0
        for _ in range(100):
            d = int(rng.integers(2, 6))
            u = random_unitary(rng, d)
            a = (u * rng.uniform(-1, 1, d)) @ u.conj().T
            h0 = (u * rng.uniform(-2, 2, d)) @ u.conj().T
            a, h0 = 0.5 * (a + a.conj().T), 0.5 * (h0 + h0.conj().T)
            spec = MeasurementSpec(a, 0.7, 1.0, float(rng.uniform(-1, 1)))
            psi0 = random_state(rng, d)
            x = small_time_speed(spec, h0, psi0, 0.0).x_coefficient
            if abs(x) < 1e-6:
                continue
            eps = 1e-5
            h = split_hamiltonian(h0, spec)
            traj = evolve_exp(h, psi0, [0.0, eps])
            slope = (variance(h0, traj.psi[1]) - variance(h0, traj.psi[0])) / eps
            # dH0^2 grows at rate 2 f X to first order
            assert slope == pytest.approx(2 * x, rel=1e-3, abs=1e-6)
            checked += 1
        assert checked >= 90

    def test_ket_eigenstate_has_no_speedup(self):
        spec = MeasurementSpec(SIGMA_Z, 1.0, 2.0, 0.5)
        res = small_time_speed(spec, SIGMA_Z, KET0, 0.01)
        assert res.x_coefficient == pytest.approx(0.0, abs=1e-14)
        assert res.speed == 0.0
