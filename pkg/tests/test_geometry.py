import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsl.dynamics import SplitHamiltonian, Trajectory, evolve_exp
from qsl.errors import QslError, RadicandError
from qsl.geometry import (
    average_speed,
    geodesic_distance,
    path_length,
    qsl_time,
    speed_from_operators,
    speed_from_trajectory,
    speeds_from_operators,
)
from qsl.linalg import SIGMA_X, SIGMA_Z
from qsl.spin import build_example
from conftest import KET0, KET1, PLUS, SQ2, random_hermitian, random_state

ZERO2 = np.zeros((2, 2))


class TestOperatorSpeed:
    def test_eigenstate_is_still(self):
        assert speed_from_operators(SplitHamiltonian(SIGMA_Z, ZERO2), KET0) == 0.0

    def test_plus_under_sigma_z(self):
        # dH0 = 1 in |+>, so V = 2
        assert speed_from_operators(SplitHamiltonian(SIGMA_Z, ZERO2), PLUS) == pytest.approx(2.0, abs=1e-14)

    def test_hbar_scaling(self):
        assert speed_from_operators(SplitHamiltonian(SIGMA_Z, ZERO2, hbar=2.0), PLUS) == pytest.approx(1.0, abs=1e-14)

    def test_pure_measurement_term(self):
        # dH1 = 1/2 for H1 = diag(0, 1) in |+>
        h = SplitHamiltonian(ZERO2, np.diag([0.0, 1.0]))
        assert speed_from_operators(h, PLUS) == pytest.approx(1.0, abs=1e-14)

    def test_commutator_term_by_hand(self):
        # H0 = sigma_z, H1 = sigma_x: [H1, H0] = -2i sigma_y, so i<[H1,H0]> = 2<sigma_y>.
        # In |+i>, dH0^2 = 1, dH1^2 = 1, 2<sigma_y> = 2 -> V = 2 sqrt(4) = 4
        plus_i = np.array([1, 1j]) / SQ2
        h = SplitHamiltonian(SIGMA_Z, SIGMA_X)
        assert speed_from_operators(h, plus_i) == pytest.approx(4.0, abs=1e-14)
        minus_i = np.array([1, -1j]) / SQ2
        assert speed_from_operators(h, minus_i) == pytest.approx(0.0, abs=1e-6)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        m = random_hermitian(rng, 4)
        h = SplitHamiltonian(random_hermitian(rng, 4), m @ m)
        traj = evolve_exp(h, random_state(rng, 4), np.linspace(0, 1, 21))
        scalar = [speed_from_operators(h, p) for p in traj.psi]
        np.testing.assert_allclose(speeds_from_operators(h, traj), scalar, atol=1e-12)

    def test_time_dependent_h1_sampled(self):
        h = SplitHamiltonian(ZERO2, lambda t: np.diag([0.0, t]))
        assert speed_from_operators(h, PLUS, t=2.0) == pytest.approx(2.0, abs=1e-14)

    def test_radicand_guard(self, monkeypatch):
        import qsl.geometry as geo

        monkeypatch.setattr(geo, "variance", lambda op, psi: -1e-9)
        with pytest.raises(RadicandError):
            speed_from_operators(SplitHamiltonian(SIGMA_Z, ZERO2), KET0)
        monkeypatch.setattr(geo, "variance", lambda op, psi: -1e-12)
        assert speed_from_operators(SplitHamiltonian(SIGMA_Z, ZERO2), KET0) == 0.0


class TestTrajectorySpeed:
    def test_unitary_example(self):
        t = np.linspace(0, 1, 201)
        traj = evolve_exp(SplitHamiltonian(SIGMA_Z, ZERO2), PLUS, t)
        np.testing.assert_allclose(speed_from_trajectory(traj), 2.0, atol=1e-4)

    def test_accepts_pair(self):
        t = np.linspace(0, 1, 201)
        traj = evolve_exp(SplitHamiltonian(SIGMA_Z, ZERO2), PLUS, t)
        np.testing.assert_array_equal(speed_from_trajectory((t, traj.psi)), speed_from_trajectory(traj))

    def test_degenerate_grid(self):
        with pytest.raises(ValueError):
            speed_from_trajectory((np.array([0.0, 1.0, 1.0]), np.tile(KET0, (3, 1))))
        with pytest.raises(ValueError):
            speed_from_trajectory((np.array([0.0, 1.0]), np.tile(KET0, (2, 1))))

    def test_global_phase_insensitive(self):
        # a time-dependent global phase does not change the speed
        t = np.linspace(0, 1, 4001)
        traj = evolve_exp(SplitHamiltonian(SIGMA_Z, ZERO2), PLUS, t)
        rephased = traj.psi * np.exp(3j * t**2)[:, None]
        np.testing.assert_allclose(speed_from_trajectory((t, rephased)), speed_from_trajectory(traj), atol=1e-4)

    @pytest.mark.parametrize("f,dt", [(0.0, 1e-3), (1.0, 1e-3), (5.0, 1e-4)])
    def test_matches_operator_speed(self, fig1_config, f, dt):
        h, _, psi0 = build_example(fig1_config.with_f(f))
        t = np.arange(0, 0.5 + dt / 2, dt)
        traj = evolve_exp(h, psi0, t)
        err = np.max(np.abs(speed_from_trajectory(traj) - speeds_from_operators(h, traj)))
        assert err <= max(1e-5, 10 * dt**2)


class TestIntegrals:
    def test_constant_speed(self):
        t = np.linspace(0, 2, 11)
        assert path_length(np.full(11, 3.0), t) == pytest.approx(6.0)
        assert average_speed(np.full(11, 3.0), t) == pytest.approx(3.0)

    def test_linear_speed_exact(self):
        t = np.linspace(0, 1, 7)
        assert average_speed(t, t) == pytest.approx(0.5, abs=1e-15)

    def test_zero_total_time(self):
        with pytest.raises(ValueError):
            average_speed([1.0], [0.0])

    def test_misaligned(self):
        with pytest.raises(ValueError):
            path_length([1.0, 2.0], [0.0, 1.0, 2.0])


class TestGeodesic:
    def test_examples(self):
        assert geodesic_distance(KET0, KET0) == 0.0
        assert geodesic_distance(KET0, KET1) == pytest.approx(math.pi)
        assert geodesic_distance(KET0, PLUS) == pytest.approx(math.pi / 2)

    def test_clamps_rounding(self):
        almost = KET0 * (1 + 5e-11)
        assert geodesic_distance(KET0, almost) == 0.0

    @given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.floats(0, 2 * math.pi))
    @settings(max_examples=50, deadline=None)
    def test_symmetric_phase_invariant_bounded(self, seed, d, phase):
        rng = np.random.default_rng(seed)
        a, b = random_state(rng, d), random_state(rng, d)
        s = geodesic_distance(a, b)
        assert 0.0 <= s <= math.pi
        assert geodesic_distance(b, a) == pytest.approx(s, abs=1e-12)
        assert geodesic_distance(a, np.exp(1j * phase) * b) == pytest.approx(s, abs=1e-7)


class TestQslTime:
    def test_half_rotation(self):
        # |+> -> |-> under sigma_z in t = pi/2; S0 = pi, V = 2, T_QSL = T
        t = np.linspace(0, math.pi / 2, 101)
        h = SplitHamiltonian(SIGMA_Z, ZERO2)
        rep = qsl_time(evolve_exp(h, PLUS, t), h=h)
        assert rep.geodesic == pytest.approx(math.pi, abs=1e-6)
        assert rep.v_bar == pytest.approx(2.0, abs=1e-12)
        assert rep.t_qsl == pytest.approx(math.pi / 2, abs=1e-6)
        assert rep.bound_gap == pytest.approx(0.0, abs=1e-6)

    def test_stationary(self):
        h = SplitHamiltonian(SIGMA_Z, ZERO2)
        rep = qsl_time(evolve_exp(h, KET0, np.linspace(0, 1, 11)), h=h)
        assert rep.v_bar == pytest.approx(0.0, abs=1e-12)
        assert rep.t_qsl == 0.0

    def test_inconsistent_inputs(self):
        t = np.linspace(0, 1, 3)
        traj = Trajectory.from_phi(t, np.array([KET0, PLUS, KET1]))
        with pytest.raises(QslError):
            qsl_time(traj, v_samples=np.zeros(3))

    def test_defaults_to_finite_differences(self):
        t = np.linspace(0, 1, 401)
        h = SplitHamiltonian(SIGMA_Z, ZERO2)
        traj = evolve_exp(h, PLUS, t)
        assert qsl_time(traj).v_bar == pytest.approx(qsl_time(traj, h=h).v_bar, abs=1e-4)


@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.floats(0, 5), st.floats(0.05, 2))
@settings(max_examples=40, deadline=None)
def test_bound_holds_on_random_systems(seed, d, f, total):
    rng = np.random.default_rng(seed)
    m = random_hermitian(rng, d)
    h = SplitHamiltonian(random_hermitian(rng, d), f * (m @ m))
    traj = evolve_exp(h, random_state(rng, d), np.linspace(0, total, 1001))
    rep = qsl_time(traj, h=h)
    assert rep.v_bar * rep.total_time >= rep.geodesic - 1e-6
    assert rep.t_qsl <= rep.total_time + 1e-6
    assert rep.path_length >= 0


@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.complex_numbers(min_magnitude=1e-2, max_magnitude=1e2))
@settings(max_examples=30, deadline=None)
def test_speed_invariant_under_rescaling(seed, d, c):
    rng = np.random.default_rng(seed)
    m = random_hermitian(rng, d)
    h = SplitHamiltonian(random_hermitian(rng, d), m @ m)
    psi = random_state(rng, d)
    v = speed_from_operators(h, psi)
    rescaled = Trajectory.from_phi(np.array([0.0]), (c * psi)[None, :]).psi[0]
    assert speed_from_operators(h, rescaled) == pytest.approx(v, rel=1e-9, abs=1e-12)
