"""Flow-matching machinery: interpolation, schedule shift, analytic field."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowlab.errors import ConfigError, ContractError, DomainError
from flowlab.flow import (
    ScheduleShift,
    analytic_gaussian_velocity,
    effective_dim,
    flow_matching_loss,
    interpolate,
    make_flow_sample,
    sample_training_time,
    shift_timestep,
    velocity_target,
)
from flowlab.rng import Rng
from flowlab.tensor import Tensor

# Expected per-dim loss of the exact velocity field on standard-normal data:
# integral over t of the conditional variance, which evaluates to pi/2.
ANALYTIC_FIELD_LOSS = np.pi / 2


class TestInterpolate:
    def test_t0_returns_data(self):
        x, eps = np.array([1.0, 2.0]), np.array([9.0, -9.0])
        np.testing.assert_array_equal(interpolate(x, eps, 0.0), x)

    def test_t1_returns_noise(self):
        x, eps = np.array([1.0, 2.0]), np.array([9.0, -9.0])
        np.testing.assert_array_equal(interpolate(x, eps, 1.0), eps)

    def test_midpoint(self):
        np.testing.assert_allclose(interpolate(np.array([0.0]), np.array([2.0]), 0.5), [1.0])

    def test_time_out_of_range(self):
        with pytest.raises(DomainError):
            interpolate(np.zeros(2), np.zeros(2), 1.5)

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            interpolate(np.zeros(2), np.zeros(3), 0.5)

    def test_per_sample_times(self):
        x = np.zeros((2, 3), dtype=np.float32)
        eps = np.ones((2, 3), dtype=np.float32)
        out = interpolate(x, eps, np.array([0.0, 1.0]))
        np.testing.assert_array_equal(out[0], 0.0)
        np.testing.assert_array_equal(out[1], 1.0)


class TestVelocityTarget:
    def test_zero_when_equal(self):
        x = np.array([1.0, 2.0])
        np.testing.assert_array_equal(velocity_target(x, x), 0.0)

    def test_hand_case(self):
        out = velocity_target(np.array([1.0, 1.0]), np.array([3.0, 0.0]))
        np.testing.assert_array_equal(out, [2.0, -1.0])

    def test_algebraic_identity(self):
        # exact on integer-representable floats; within rounding elsewhere
        rng = np.random.default_rng(0)
        xi = rng.integers(-50, 50, (4, 5)).astype(np.float32)
        ei = rng.integers(-50, 50, (4, 5)).astype(np.float32)
        np.testing.assert_array_equal(velocity_target(xi, ei) + xi, ei)
        x = rng.standard_normal((4, 5)).astype(np.float32)
        eps = rng.standard_normal((4, 5)).astype(np.float32)
        np.testing.assert_allclose(velocity_target(x, eps) + x, eps, atol=1e-6)

    def test_flow_sample_invariants(self):
        rng = np.random.default_rng(1)
        x, eps = rng.standard_normal(6), rng.standard_normal(6)
        s = make_flow_sample(x, eps, 0.3)
        np.testing.assert_allclose(s.x_t, 0.7 * x + 0.3 * eps, rtol=1e-7)
        np.testing.assert_array_equal(s.target, eps - x)


class TestEffectiveDim:
    def test_paper_scale_product(self):
        assert effective_dim(256, 768) == 196608

    def test_unit(self):
        assert effective_dim(1, 1) == 1

    def test_desk_scale(self):
        assert effective_dim(64, 4096) == 262144

    def test_nonpositive_rejected(self):
        with pytest.raises(ConfigError):
            effective_dim(0, 4)
        with pytest.raises(ConfigError):
            effective_dim(4, -1)


class TestShiftTimestep:
    def test_identity_at_base_dimension(self):
        shift = ScheduleShift(m=4096, n_base=4096)
        assert shift.alpha == 1.0
        for t in (0.0, 0.25, 0.5, 0.99, 1.0):
            assert shift_timestep(t, shift) == t

    def test_boundary_fixed_points_exact(self):
        for m in (16, 4096, 196608):
            shift = ScheduleShift(m=m)
            assert shift_timestep(0.0, shift) == 0.0
            assert shift_timestep(1.0, shift) == 1.0

    def test_alpha_two_hand_value(self):
        shift = ScheduleShift(m=4 * 4096, n_base=4096)
        assert shift.alpha == 2.0
        assert abs(shift_timestep(0.5, shift) - 2.0 / 3.0) < 1e-4

    def test_monotone(self):
        shift = ScheduleShift(m=196608)
        t = np.linspace(0, 1, 101)
        out = shift_timestep(t, shift)
        assert np.all(np.diff(out) > 0)

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            shift_timestep(-0.1, ScheduleShift(m=8192))

    def test_round_trip_inverse(self):
        shift = ScheduleShift(m=196608)
        inverse = shift.inverse()
        assert abs(shift.alpha * inverse.alpha - 1.0) < 1e-12
        t = np.linspace(0, 1, 1001)
        back = shift_timestep(shift_timestep(t, shift), inverse)
        assert np.abs(back - t).max() < 1e-6


@given(st.floats(0.0, 1.0), st.integers(1, 10**7))
@settings(max_examples=100, deadline=None)
def test_shift_stays_in_unit_interval(t, m):
    out = shift_timestep(t, ScheduleShift(m=m))
    assert -1e-12 <= out <= 1.0 + 1e-12


class TestSampleTrainingTime:
    def test_uniform_mean(self):
        draws = sample_training_time(Rng(0, 4), None, size=(100_000,))
        assert abs(float(np.mean(draws)) - 0.5) < 0.01

    def test_shift_pushes_mass_toward_noise(self):
        shifted = sample_training_time(Rng(0, 4), ScheduleShift(m=4 * 4096), size=(100_000,))
        assert float(np.mean(shifted)) > 0.5

    def test_identity_shift_is_uniform_ks(self):
        draws = np.sort(sample_training_time(Rng(1, 4), ScheduleShift(m=4096), size=(10_000,)))
        # one-sample Kolmogorov-Smirnov against U[0,1] at the 1% level
        n = len(draws)
        grid = np.arange(1, n + 1) / n
        ks = max(float(np.max(grid - draws)), float(np.max(draws - (grid - 1.0 / n))))
        assert ks < 1.628 / np.sqrt(n)


class TestAnalyticGaussianVelocity:
    def test_midpoint_is_zero(self):
        x_t = np.array([3.0, -2.0, 0.5])
        np.testing.assert_array_equal(analytic_gaussian_velocity(x_t, 0.5), 0.0)

    def test_t1_identity(self):
        x_t = np.array([3.0, -2.0])
        np.testing.assert_allclose(analytic_gaussian_velocity(x_t, 1.0), x_t, rtol=1e-7)

    def test_hand_value(self):
        out = analytic_gaussian_velocity(np.array([1.0]), 0.25)
        np.testing.assert_allclose(out, [-0.8], rtol=1e-6)

    def test_matches_conditional_regression(self):
        # E[eps - x | x_t] via linear regression on a large joint sample
        rng = Rng(9, 0)
        n = 400_000
        x = rng.standard_normal((n,), np.float64)
        eps = rng.standard_normal((n,), np.float64)
        for t in (0.2, 0.6, 0.9):
            x_t = (1 - t) * x + t * eps
            y = eps - x
            slope = float(np.dot(x_t, y) / np.dot(x_t, x_t))
            pred = analytic_gaussian_velocity(np.array([1.0]), t)[0]
            assert abs(slope - pred) < 0.02

    def test_integrates_to_standard_normal(self):
        # Euler from t=1 to 0 must land on N(0, I) moments
        from flowlab.sampling import SamplerConfig, euler_sample

        x1 = Rng(0, 6).standard_normal((10_000, 8), np.float32)
        out = euler_sample(analytic_gaussian_velocity, x1, SamplerConfig(steps=200))
        assert np.abs(out.mean(axis=0)).max() < 0.05
        assert np.abs(out.var(axis=0) - 1.0).max() < 0.05


class TestFlowMatchingLoss:
    def test_exact_model_scores_zero(self):
        rng = np.random.default_rng(2)
        target = rng.standard_normal((4, 8)).astype(np.float32)
        loss = flow_matching_loss(Tensor(target.copy()), target)
        assert loss.item() == 0.0

    def test_zero_model_on_point_mass(self):
        # loss of the zero predictor on x = x0: (||x0||^2 + n)/n per dim
        rng = Rng(3, 0)
        n = 32
        x0 = rng.standard_normal((n,), np.float64)
        m = 200_000
        eps = Rng(4, 0).standard_normal((m, n), np.float64)
        target = eps - x0
        empirical = float(np.mean(target**2))
        expected = (float(np.dot(x0, x0)) + n) / n
        assert abs(empirical - expected) / expected < 0.01
        loss = flow_matching_loss(Tensor(np.zeros((m // 100, n), dtype=np.float32)),
                                  target[: m // 100].astype(np.float32))
        assert abs(loss.item() - expected) / expected < 0.05

    def test_batch_permutation_invariant(self):
        rng = np.random.default_rng(5)
        v = rng.standard_normal((10, 4)).astype(np.float32)
        target = rng.standard_normal((10, 4)).astype(np.float32)
        perm = rng.permutation(10)
        a = flow_matching_loss(Tensor(v), target).item()
        b = flow_matching_loss(Tensor(v[perm]), target[perm]).item()
        assert abs(a - b) < 1e-6

    def test_empty_batch_rejected(self):
        with pytest.raises(ContractError):
            flow_matching_loss(Tensor(np.zeros((0, 4), dtype=np.float32)), np.zeros((0, 4)))

    def test_analytic_field_reaches_conditional_variance(self):
        # per-dim loss of the exact field approaches the irreducible
        # conditional variance pi/2 (closed form via quadrature)
        rng = Rng(11, 0)
        m, n = 400_000, 4
        x = rng.standard_normal((m, n), np.float64)
        eps = Rng(12, 0).standard_normal((m, n), np.float64)
        t = Rng(13, 0).uniform((m,), np.float64)
        x_t = (1 - t[:, None]) * x + t[:, None] * eps
        v = analytic_gaussian_velocity(x_t, t)
        mc = float(np.mean((v - (eps - x)) ** 2))
        assert abs(mc - ANALYTIC_FIELD_LOSS) / ANALYTIC_FIELD_LOSS < 0.02
