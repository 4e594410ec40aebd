"""Unit tests for the LIF / integrator neuron kernels."""

import numpy as np
import pytest

from snndecode import (
    RESET_SUBTRACT,
    RESET_ZERO,
    LifLayerState,
    LifParams,
    SurrogateSpec,
    lif_step,
    output_step,
    surrogate_grad,
)


def make_state(u, s):
    return LifLayerState(potential=np.asarray(u, dtype=float),
                         last_spikes=np.asarray(s, dtype=float))


class TestLifParams:
    def test_rejects_bad_threshold(self):
        with pytest.raises(ValueError):
            LifParams(threshold=0.0, tau=np.array([0.5]))
        with pytest.raises(ValueError):
            LifParams(threshold=-1.0, tau=np.array([0.5]))

    def test_rejects_tau_outside_unit_interval(self):
        with pytest.raises(ValueError):
            LifParams(threshold=0.4, tau=np.array([1.2]))
        with pytest.raises(ValueError):
            LifParams(threshold=0.4, tau=np.array([-0.1]))

    def test_rejects_unknown_reset_mode(self):
        with pytest.raises(ValueError):
            LifParams(threshold=0.4, tau=np.array([0.5]), reset_mode="warp")

    def test_surrogate_spec_positive_half_width(self):
        with pytest.raises(ValueError):
            SurrogateSpec(half_width=0.0)


class TestLifStep:
    def test_subtract_reset_hand_case(self):
        """tau=0.5, u=1.0 after a spike, input 0.3 lands at 0.6 and fires."""
        params = LifParams(threshold=0.4, tau=np.array([0.5]))
        state, spikes = lif_step(make_state([1.0], [1.0]),
                                 np.array([0.3]), params)
        np.testing.assert_allclose(state.potential, [0.6])
        np.testing.assert_array_equal(spikes, [1.0])
        np.testing.assert_array_equal(state.last_spikes, [1.0])

    def test_zero_is_a_fixed_point(self):
        for tau in (0.0, 0.3, 1.0):
            params = LifParams(threshold=0.4, tau=np.array([tau]))
            state, spikes = lif_step(make_state([0.0], [0.0]),
                                     np.array([0.0]), params)
            np.testing.assert_array_equal(state.potential, [0.0])
            np.testing.assert_array_equal(spikes, [0.0])

    def test_exact_threshold_fires(self):
        """The spike condition is >=, so landing exactly on the threshold fires."""
        params = LifParams(threshold=0.4, tau=np.array([0.0]))
        _, spikes = lif_step(make_state([0.0], [0.0]), np.array([0.4]), params)
        np.testing.assert_array_equal(spikes, [1.0])

    def test_just_below_threshold_stays_silent(self):
        params = LifParams(threshold=0.4, tau=np.array([0.0]))
        _, spikes = lif_step(make_state([0.0], [0.0]),
                             np.array([0.4 - 1e-9]), params)
        np.testing.assert_array_equal(spikes, [0.0])

    def test_reset_to_zero_mode(self):
        """After a spike the zero mode forgets the whole potential."""
        params = LifParams(threshold=0.4, tau=np.array([0.5]),
                           reset_mode=RESET_ZERO)
        state, spikes = lif_step(make_state([1.0], [1.0]),
                                 np.array([0.3]), params)
        np.testing.assert_allclose(state.potential, [0.3])
        np.testing.assert_array_equal(spikes, [0.0])

    def test_subtract_removes_threshold_once_per_spike(self):
        """With tau=1 and no input, each spike costs exactly one threshold."""
        params = LifParams(threshold=0.4, tau=np.array([1.0]))
        state = make_state([1.0], [0.0])
        zero = np.array([0.0])
        potentials = []
        for _ in range(4):
            state, _ = lif_step(state, zero, params)
            potentials.append(state.potential[0])
        # 1.0 -> fires -> 0.6 -> fires -> 0.2 (quiet) -> stays
        np.testing.assert_allclose(potentials, [1.0, 0.6, 0.2, 0.2])

    def test_purely_functional(self):
        params = LifParams(threshold=0.4, tau=np.array([0.7, 0.2]))
        state = make_state([0.5, -0.1], [1.0, 0.0])
        current = np.array([0.05, 0.6])
        before_u = state.potential.copy()
        out1 = lif_step(state, current, params)
        out2 = lif_step(state, current, params)
        np.testing.assert_array_equal(state.potential, before_u)
        np.testing.assert_array_equal(out1[0].potential, out2[0].potential)
        np.testing.assert_array_equal(out1[1], out2[1])

    def test_batched_state_shapes(self):
        rng = np.random.default_rng(7)
        params = LifParams(threshold=0.4, tau=rng.uniform(0, 1, 8))
        state = LifLayerState(potential=rng.normal(size=(5, 8)),
                              last_spikes=np.zeros((5, 8)))
        new_state, spikes = lif_step(state, rng.normal(size=(5, 8)), params)
        assert new_state.potential.shape == (5, 8)
        assert spikes.shape == (5, 8)
        np.testing.assert_array_equal(
            spikes, (new_state.potential >= 0.4).astype(float))
        assert set(np.unique(spikes)) <= {0.0, 1.0}

    def test_dimension_mismatch_raises(self):
        params = LifParams(threshold=0.4, tau=np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            lif_step(make_state([0.0, 0.0], [0.0, 0.0]),
                     np.array([1.0, 2.0, 3.0]), params)


class TestOutputStep:
    def test_pure_integrator_hand_case(self):
        new_u, pred = output_step(np.array([0.2]), np.array([0.1]),
                                  np.array([1.0]))
        np.testing.assert_allclose(new_u, [0.3])
        np.testing.assert_allclose(pred, [0.3])

    def test_memoryless_limit(self):
        """tau=0 forgets all state: the prediction is just the input."""
        _, pred = output_step(np.array([5.0]), np.array([0.7]),
                              np.array([0.0]))
        np.testing.assert_allclose(pred, [0.7])

    def test_no_input_holds_value(self):
        u = np.array([0.42])
        tau = np.array([1.0])
        zero = np.array([0.0])
        for _ in range(5):
            u, pred = output_step(u, zero, tau)
        np.testing.assert_allclose(pred, [0.42])

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError):
            output_step(np.array([0.0, 0.0]), np.array([1.0]),
                        np.array([0.5, 0.5]))


class TestSurrogateGrad:
    def test_at_threshold(self):
        assert surrogate_grad(np.float64(0.4), 0.4) == 1.0

    def test_boundary_excluded(self):
        """|u - threshold| = 0.5 sits outside the window (strict <)."""
        assert surrogate_grad(np.float64(0.9), 0.4) == 0.0
        assert surrogate_grad(np.float64(-0.1), 0.4) == 0.0

    def test_far_below(self):
        assert surrogate_grad(np.float64(-0.2), 0.4) == 0.0

    def test_window_integrates_to_one(self):
        u = np.linspace(-2.0, 3.0, 500001)
        vals = surrogate_grad(u, 0.4)
        integral = np.trapezoid(vals, u)
        np.testing.assert_allclose(integral, 1.0, atol=1e-4)

    def test_vectorized(self):
        u = np.array([-0.2, 0.4, 0.89, 0.9])
        np.testing.assert_array_equal(surrogate_grad(u, 0.4),
                                      [0.0, 1.0, 1.0, 0.0])
