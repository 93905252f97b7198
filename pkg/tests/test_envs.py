import math

import numpy as np
import pytest

from dsmppi.envs import (CART_MASS, CARTPOLE_DT, GRAVITY, JACKKNIFE_LIMIT,
                         POLE_HALF_LENGTH, POLE_MASS,
                         cartpole_augment, cartpole_step, cartpole_task,
                         clamp_controls, rollout, stage_cost, terminal_cost,
                         truck_step, truck_task)


class TestClamp:
    def test_saturates_above(self):
        out = clamp_controls(np.array([25.0]), np.array([-20.0]), np.array([20.0]))
        np.testing.assert_array_equal(out, [20.0])

    def test_interior_unchanged(self):
        u = np.array([3.0, -0.5])
        out = clamp_controls(u, np.array([-5.0, -1.0]), np.array([5.0, 1.0]))
        np.testing.assert_array_equal(out, u)

    def test_boundary_fixed_point(self):
        lo = np.array([-2.0])
        np.testing.assert_array_equal(clamp_controls(lo, lo, np.array([2.0])), lo)


def mechanical_energy(state):
    """Total energy of the frictionless cart + uniform-rod pole system."""
    x, xd, ph, phd = state
    mc, mp, l, g = CART_MASS, POLE_MASS, POLE_HALF_LENGTH, GRAVITY
    kinetic = (0.5 * mc * xd ** 2
               + 0.5 * mp * (xd ** 2 + 2 * l * xd * phd * math.cos(ph) + (l * phd) ** 2)
               + (1.0 / 6.0) * mp * l ** 2 * phd ** 2)
    return kinetic + mp * g * l * math.cos(ph)


class TestCartPole:
    def test_upright_equilibrium_exact(self):
        state = np.zeros(4)
        np.testing.assert_array_equal(cartpole_step(state, 0.0), state)

    def test_hanging_equilibrium(self):
        state = np.array([0.0, 0.0, np.pi, 0.0])
        out = state
        for _ in range(10):
            out = cartpole_step(out, 0.0)
        np.testing.assert_allclose(out, state, atol=1e-12)

    def test_energy_conservation_against_fine_reference(self):
        # Tolerance comes from a fine-step reference run: the integrator's
        # energy error is first order in dt, so the coarse drift must stay
        # within a small multiple of (dt ratio) x (fine drift).
        start = np.array([0.0, 0.0, np.pi - 0.1, 0.0])
        e0 = mechanical_energy(start)

        state = start.copy()
        coarse_drift = 0.0
        for _ in range(100):
            state = cartpole_step(state, 0.0, dt=CARTPOLE_DT)
            coarse_drift = max(coarse_drift, abs(mechanical_energy(state) - e0))

        ratio = 50
        fine_dt = CARTPOLE_DT / ratio
        state = start.copy()
        fine_drift = 0.0
        for _ in range(100 * ratio):
            state = cartpole_step(state, 0.0, dt=fine_dt)
            fine_drift = max(fine_drift, abs(mechanical_energy(state) - e0))

        assert coarse_drift <= 3.0 * ratio * fine_drift
        assert coarse_drift <= 0.01 * abs(e0)

    def test_augment_upright_matches_goal(self):
        aug = cartpole_augment(np.zeros(4))
        np.testing.assert_allclose(aug, [0.0, 0.0, 1.0, 0.0, 0.0], atol=1e-15)

    def test_augment_hanging(self):
        aug = cartpole_augment(np.array([0.0, 0.0, np.pi, 0.0]))
        np.testing.assert_allclose(aug[2:4], [-1.0, 0.0], atol=1e-12)

    def test_augment_periodicity(self):
        s1 = np.array([1.0, -0.5, 0.7, 2.0])
        s2 = s1 + np.array([0.0, 0.0, 2.0 * np.pi, 0.0])
        np.testing.assert_allclose(cartpole_augment(s1), cartpole_augment(s2), atol=1e-12)

    def test_augment_trig_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            aug = cartpole_augment(rng.normal(scale=5.0, size=4))
            assert aug[2] ** 2 + aug[3] ** 2 == pytest.approx(1.0, abs=1e-12)


class TestTruck:
    def test_zero_state_zero_control_fixed_point(self):
        out = truck_step(np.zeros(4), np.zeros(2))
        np.testing.assert_array_equal(out, np.zeros(4))

    def test_pure_backward_translation(self):
        # straight cab and trailer, no steering: the update reduces by hand to
        # x' = x - 3 u2, everything else unchanged
        for u2 in (1.0, 0.4, -0.7):
            out = truck_step(np.array([50.0, -3.0, 0.0, 0.0]), np.array([0.0, u2]))
            np.testing.assert_allclose(out, [50.0 - 3.0 * u2, -3.0, 0.0, 0.0], atol=1e-12)

    def test_jackknife_clamp_boundary(self):
        # angles drift-free under zero control; an over-limit difference is
        # clamped to exactly 90 degrees
        state = np.array([0.0, 0.0, 0.0, math.radians(100.0)])
        out = truck_step(state, np.zeros(2))
        assert out[3] - out[2] == pytest.approx(JACKKNIFE_LIMIT, abs=1e-15)
        mirrored = np.array([0.0, 0.0, 0.0, -math.radians(100.0)])
        out = truck_step(mirrored, np.zeros(2))
        assert out[3] - out[2] == pytest.approx(-JACKKNIFE_LIMIT, abs=1e-15)

    def test_jackknife_never_exceeded_under_random_driving(self):
        rng = np.random.default_rng(4)
        state = np.array([90.0, 10.0, 0.3, -0.2])
        for _ in range(500):
            state = truck_step(state, rng.uniform(-1.0, 1.0, size=2))
            assert abs(state[3] - state[2]) <= JACKKNIFE_LIMIT + 1e-12

    def test_absolute_mode_clamps_cab_angle_itself(self):
        state = np.array([0.0, 0.0, 0.0, math.radians(100.0)])
        out = truck_step(state, np.zeros(2), jackknife_mode="absolute")
        assert out[3] == pytest.approx(JACKKNIFE_LIMIT)

    def test_diag_counts_clip_events(self):
        diag = {}
        truck_step(np.array([0.0, 0.0, 0.0, math.radians(100.0)]), np.zeros(2), diag=diag)
        assert diag.get("jackknife_clamps", 0) == 1

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            truck_step(np.zeros(4), np.zeros(2), jackknife_mode="wrap")


class TestCosts:
    def test_zero_at_goal(self):
        task = cartpole_task()
        assert stage_cost(np.zeros(4), np.zeros(1), task.cost) == 0.0
        assert terminal_cost(np.zeros(4), task.cost) == 0.0

    def test_cartpole_control_weight(self):
        task = cartpole_task()
        assert stage_cost(np.zeros(4), np.array([1.0]), task.cost) == pytest.approx(1e-4)

    def test_truck_control_weight(self):
        task = truck_task()
        assert stage_cost(np.zeros(4), np.array([0.0, 1.0]), task.cost) == pytest.approx(5.0)

    def test_costs_nonnegative(self):
        rng = np.random.default_rng(9)
        task = truck_task()
        for _ in range(50):
            assert stage_cost(rng.normal(size=4), rng.normal(size=2), task.cost) >= 0.0

    def test_dimension_mismatch(self):
        task = truck_task()
        with pytest.raises(ValueError):
            stage_cost(np.zeros(3), np.zeros(2), task.cost)
        with pytest.raises(ValueError):
            stage_cost(np.zeros(4), np.zeros(1), task.cost)


class TestRollout:
    def test_single_stage_hand_check(self):
        task = cartpole_task()
        x0 = np.array([0.1, 0.0, 0.2, 0.0])
        u = np.array([30.0])  # clamps to 20
        result = rollout(task, x0, u)
        assert result.controls_applied[0, 0] == 20.0
        expected = (stage_cost(x0, np.array([20.0]), task.cost)
                    + terminal_cost(cartpole_step(x0, 20.0), task.cost))
        assert result.cost == pytest.approx(expected, abs=1e-12)

    def test_goal_equilibrium_zero_cost(self):
        task = cartpole_task()
        result = rollout(task, np.zeros(4), np.zeros(task.horizon))
        assert result.cost == 0.0

    def test_resummation_oracle(self):
        rng = np.random.default_rng(21)
        for task in (cartpole_task(), truck_task()):
            x0 = (np.zeros(4) if task.name == "truck"
                  else np.array([0.0, 0.0, np.pi, 0.0]))
            seq = rng.normal(scale=2.0, size=task.horizon * task.control_dim)
            result = rollout(task, x0, seq)
            resummed = sum(stage_cost(result.states[t], result.controls_applied[t], task.cost)
                           for t in range(task.horizon))
            resummed += terminal_cost(result.states[-1], task.cost)
            assert abs(result.cost - resummed) <= 1e-10

    def test_bitwise_deterministic(self):
        task = truck_task()
        seq = np.linspace(-1.5, 1.5, task.horizon * 2)
        x0 = np.array([90.0, 20.0, 0.4, 0.1])
        r1 = rollout(task, x0, seq)
        r2 = rollout(task, x0, seq)
        assert r1.states.tobytes() == r2.states.tobytes()
        assert r1.cost == r2.cost

    def test_nonfinite_state_fails_with_inf_sentinel(self):
        task = cartpole_task()
        result = rollout(task, np.array([np.inf, 0.0, 0.0, 0.0]), np.zeros(task.horizon))
        assert result.failed
        assert result.cost == np.inf

    def test_rejects_bad_length(self):
        task = truck_task()
        with pytest.raises(ValueError):
            rollout(task, np.zeros(4), np.zeros(7))
