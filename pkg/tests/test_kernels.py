"""Closed-form kernels, hitting laws, and envelopes."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bkk import kernels

# Reference values computed with mpmath at 50 digits.
#   free kernel:      log((1/t) (y/x)**mu y exp(-(x*x+y*y)/(2*t))
#                         * besseli(mu, x*y/t))
#   killed (mu=1/2):  log((y/x) (2*pi*t)**-0.5 (exp(-(x-y)**2/(2*t))
#                         - exp(-(x+y-2)**2/(2*t) - 2*(x-1)*(y-1)/t)))
#   r (mu=1/2):       log((y/x) (2*pi*t)**-0.5 exp(-(x+y-2)**2/(2*t))
#                         * (1 - exp(-2*(x+y-1)/t)))
#   hitting density:  log((1-1/x) (2*pi)**-0.5 s**-1.5 exp(-(x-1)**2/(2*s)))
#   hitting cdf:      log(erfc((x-1)/sqrt(2*t))/x)
#   H integral:       log(sqrt(2*pi/(t*a)) exp(-(sqrt(a)+sqrt(b))**2/(2*t)))
LOG_FREE_HALF_111 = -1.0643519910735318
LOG_FREE_ONE_123 = -0.8794588705717821
LOG_KILLED_HALF_123 = -1.0319588719223949
LOG_R_HALF_122 = -2.9214203625736323
LOG_Q_HALF_21 = -2.1120857137646181
LOG_CDF_HALF_21 = -1.8410216450092635
LOG_H_111 = -1.0810614667953273

REL = 1e-14


class TestKernelQuery:
    def test_fields_coerced_to_float(self):
        q = kernels.KernelQuery(t=1, x=2, y=3)
        assert q.a == 1.0
        assert isinstance(q.x, float)

    @pytest.mark.parametrize("bad", [
        dict(t=0.0, x=2, y=3),
        dict(t=1, x=2, y=3, a=-1.0),
        dict(t=math.nan, x=2, y=3),
    ])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(ValueError):
            kernels.KernelQuery(**bad)

    def test_rejects_points_at_or_below_barrier(self):
        with pytest.raises(ValueError, match="x must exceed a"):
            kernels.KernelQuery(t=1.0, x=1.0, y=3.0)
        with pytest.raises(ValueError, match="y must exceed a"):
            kernels.KernelQuery(t=1.0, x=4.0, y=2.0, a=2.0)


class TestFreeKernel:
    def test_reference_values(self):
        assert kernels.log_free_kernel(0.5, 1.0, 1.0, 1.0) == pytest.approx(
            LOG_FREE_HALF_111, rel=REL)
        assert kernels.log_free_kernel(1.0, 1.0, 2.0, 3.0) == pytest.approx(
            LOG_FREE_ONE_123, rel=REL)

    def test_matches_direct_formula_at_moderate_arguments(self):
        # independent route through scipy's Bessel I
        from scipy.special import iv
        for mu, t, x, y in [(0.25, 1.0, 2.0, 3.0), (2.5, 0.5, 1.2, 1.4),
                            (-1.0, 2.0, 3.0, 1.5)]:
            direct = math.log(
                (1.0 / t) * (y / x) ** mu * y
                * math.exp(-(x * x + y * y) / (2.0 * t)) * iv(abs(mu), x * y / t))
            assert kernels.log_free_kernel(mu, t, x, y) == pytest.approx(
                direct, rel=1e-12)

    def test_extreme_arguments_stay_finite(self):
        # naive evaluation overflows at z = x y / t ~ 1e6
        v = kernels.log_free_kernel(0.5, 1e-3, 30.0, 31.0)
        assert math.isfinite(v)
        w = kernels.log_free_kernel(3.0, 1e3, 1e-4, 2.0)
        assert math.isfinite(w)

    def test_speed_measure_symmetry(self):
        for mu in (-2.5, -0.5, 0.25, 1.0):
            lhs = kernels.log_free_kernel(mu, 0.7, 2.0, 5.0) \
                - (2.0 * mu + 1.0) * math.log(5.0)
            rhs = kernels.log_free_kernel(mu, 0.7, 5.0, 2.0) \
                - (2.0 * mu + 1.0) * math.log(2.0)
            assert lhs == pytest.approx(rhs, rel=1e-13)

    def test_index_reflection_consistency(self):
        for mu in (0.25, 0.5, 1.0, 2.5):
            lhs = kernels.log_free_kernel(-mu, 0.9, 1.7, 2.6)
            rhs = kernels.log_free_kernel(mu, 0.9, 1.7, 2.6) \
                + kernels.reflect_index(mu, 1.7, 2.6)
            assert lhs == pytest.approx(rhs, rel=1e-13)

    def test_mass_is_one_for_half_index(self):
        # mpmath: quad of the density over (0, inf) gives 1.0 at t=1, x=2
        y = np.linspace(1e-6, 12.0, 40001)
        p = np.exp(kernels.log_free_kernel(0.5, 1.0, 2.0, y))
        assert np.trapezoid(p, y) == pytest.approx(1.0, abs=1e-8)

    def test_broadcasting(self):
        t = np.array([0.5, 1.0])[:, None]
        y = np.array([1.0, 2.0, 3.0])[None, :]
        out = kernels.log_free_kernel(0.5, t, 1.5, y)
        assert out.shape == (2, 3)
        assert out[1, 1] == pytest.approx(
            kernels.log_free_kernel(0.5, 1.0, 1.5, 2.0), rel=REL)

    def test_validation(self):
        with pytest.raises(ValueError, match="mu must be a nonzero"):
            kernels.log_free_kernel(0.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError, match="t must be finite and positive"):
            kernels.log_free_kernel(0.5, 0.0, 1.0, 1.0)
        with pytest.raises(ValueError, match="y must be finite and positive"):
            kernels.log_free_kernel(0.5, 1.0, 1.0, -2.0)


class TestHalfIndexClosedForms:
    def test_reference_values(self):
        assert kernels.log_half_killed_kernel(1.0, 2.0, 3.0) == pytest.approx(
            LOG_KILLED_HALF_123, rel=REL)
        assert kernels.log_half_r(1.0, 2.0, 2.0) == pytest.approx(
            LOG_R_HALF_122, rel=REL)
        assert kernels.log_half_hitting_density(2.0, 1.0) == pytest.approx(
            LOG_Q_HALF_21, rel=REL)
        assert kernels.log_half_hitting_cdf(2.0, 1.0) == pytest.approx(
            LOG_CDF_HALF_21, rel=REL)

    @given(
        t=st.floats(1e-2, 1e2),
        x=st.floats(1.01, 50.0),
        y=st.floats(1.01, 50.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_killed_plus_r_recovers_free(self, t, x, y):
        total = np.logaddexp(
            kernels.log_half_killed_kernel(t, x, y),
            kernels.log_half_r(t, x, y))
        assert total == pytest.approx(
            kernels.log_free_kernel(0.5, t, x, y), rel=1e-12)

    def test_killed_below_free(self):
        # cases chosen so the gap stays above double rounding
        for t, x, y in [(0.1, 1.5, 2.0), (10.0, 1.1, 1.2), (1.0, 2.0, 3.0)]:
            assert kernels.log_half_killed_kernel(t, x, y) \
                < kernels.log_free_kernel(0.5, t, x, y)

    def test_killed_approaches_free_far_from_barrier(self):
        # barrier correction is exp(-2 (x-1)(y-1)/t) ~ exp(-1800)
        t, x, y = 0.1, 10.0, 11.0
        assert kernels.log_half_killed_kernel(t, x, y) == pytest.approx(
            kernels.log_free_kernel(0.5, t, x, y), rel=1e-13)

    def test_hitting_density_integrates_to_cdf(self):
        from scipy.integrate import quad
        for x, t in [(2.0, 1.0), (1.5, 0.3), (4.0, 8.0)]:
            val, err = quad(
                lambda s: math.exp(kernels.log_half_hitting_density(x, s)),
                0.0, t, limit=200)
            assert val == pytest.approx(
                math.exp(kernels.log_half_hitting_cdf(x, t)), abs=1e-10)

    def test_hitting_cdf_limit_is_reciprocal_start(self):
        # ruin probability from x is 1/x; the gap decays like t**-1/2
        assert math.exp(kernels.log_half_hitting_cdf(3.0, 1e14)) \
            == pytest.approx(1.0 / 3.0, rel=1e-6)

    def test_cdf_far_tail_keeps_log_accuracy(self):
        # direct erfc underflows near (x-1)/sqrt(2t) ~ 40
        # mpmath at 50 digits: log(erfc(59/sqrt(2))/60)
        assert kernels.log_half_hitting_cdf(60.0, 1.0) == pytest.approx(
            -1748.8979604265207, rel=1e-13)

    def test_validation(self):
        with pytest.raises(ValueError, match="must exceed the barrier"):
            kernels.log_half_killed_kernel(1.0, 0.5, 2.0)
        with pytest.raises(ValueError, match="must exceed the barrier"):
            kernels.log_half_hitting_density(1.0, 1.0)


class TestHIntegral:
    def test_reference_value(self):
        assert kernels.log_H(1.0, 1.0, 1.0) == pytest.approx(LOG_H_111, rel=REL)

    def test_matches_quadrature(self):
        from scipy.integrate import quad
        for t, a, b in [(1.0, 1.0, 1.0), (2.0, 0.5, 1.3), (0.5, 2.0, 0.0),
                        (3.0, 4.0, 0.25)]:
            val, err = quad(
                lambda s: (t - s) ** -0.5 * s ** -1.5
                * math.exp(-a / (2.0 * s) - b / (2.0 * (t - s))),
                0.0, t, limit=400)
            assert math.log(val) == pytest.approx(
                kernels.log_H(t, a, b), rel=1e-9)

    def test_b_zero_allowed_negative_rejected(self):
        assert math.isfinite(kernels.log_H(1.0, 1.0, 0.0))
        with pytest.raises(ValueError, match="b must be finite and nonnegative"):
            kernels.log_H(1.0, 1.0, -0.1)


class TestEnvelopes:
    def test_reference_values(self):
        # all bracketed factors equal one at t=1, x=y=2
        assert kernels.log_envelope(0.5, 1.0, 2.0, 2.0) == 0.0
        assert kernels.log_envelope(0.5, 1.0, 2.0, 3.0) == pytest.approx(
            -0.0945348918918355, rel=REL)
        # mu=1/2, x=2, s=1: log((1/2) * 2**-1 * exp(-1/2))
        assert kernels.log_hitting_envelope(0.5, 2.0, 1.0) == pytest.approx(
            -0.5 - 2.0 * math.log(2.0), rel=REL)
        # mu=1/2, x=2, t=1: log of 1/(2*3)
        assert kernels.log_survival_envelope(0.5, 2.0, 1.0) == pytest.approx(
            -math.log(6.0), rel=REL)

    def test_band_times_free_envelope_factorization(self):
        for mu, t, x, y in [(0.25, 0.3, 1.2, 4.0), (-2.5, 10.0, 7.0, 2.0)]:
            total = kernels.log_rewrite_band(t, x, y) \
                + kernels.log_free_envelope(mu, t, x, y)
            assert kernels.log_envelope(mu, t, x, y) == total

    def test_envelope_brackets_half_index_kernel(self):
        # two-sided comparability with moderate constants
        rng = np.random.default_rng(7)
        for _ in range(300):
            t = float(10.0 ** rng.uniform(-2, 2))
            x = float(1.0 + 10.0 ** rng.uniform(-2, 1.5))
            y = float(1.0 + 10.0 ** rng.uniform(-2, 1.5))
            gap = kernels.log_half_killed_kernel(t, x, y) \
                - kernels.log_envelope(0.5, t, x, y)
            assert -1.2 < gap < 0.0

    def test_envelope_barrier_scaling(self):
        # envelope(t, x, y; a) = (1/a) envelope(t/a^2, x/a, y/a; 1)
        for a in (0.5, 2.0, 7.0):
            lhs = kernels.log_envelope(1.0, 3.0, 2.5 * a, 4.0 * a, a)
            rhs = kernels.log_envelope(1.0, 3.0 / a**2, 2.5, 4.0) - math.log(a)
            assert lhs == pytest.approx(rhs, rel=1e-13)

    def test_survival_envelope_vanishes_at_barrier(self):
        assert kernels.log_survival_envelope(1.0, 1.0 + 1e-12, 1.0) < -25.0

    def test_validation(self):
        with pytest.raises(ValueError, match="x and y must exceed a"):
            kernels.log_rewrite_band(1.0, 0.8, 2.0)
        with pytest.raises(ValueError, match="must exceed the barrier"):
            kernels.log_hitting_envelope(0.5, 1.0, 1.0)


class TestReductions:
    def test_unit_barrier_reduction(self):
        q = kernels.KernelQuery(t=4.0, x=4.0, y=6.0, a=2.0)
        reduced, jac = kernels.reduce_to_unit_barrier(0.5, q)
        assert reduced == kernels.KernelQuery(t=1.0, x=2.0, y=3.0, a=1.0)
        assert jac == pytest.approx(-math.log(2.0), rel=REL)
        # p_2(4, 4, 6) = (1/2) p_1(1, 2, 3) for mu = 1/2
        assert kernels.log_half_killed_kernel(1.0, 2.0, 3.0) + jac \
            == pytest.approx(LOG_KILLED_HALF_123 - math.log(2.0), rel=REL)

    def test_unit_barrier_is_identity(self):
        q = kernels.KernelQuery(t=1.0, x=2.0, y=3.0)
        reduced, jac = kernels.reduce_to_unit_barrier(1.0, q)
        assert reduced == q
        assert jac == 0.0

    def test_reflect_index_value(self):
        assert kernels.reflect_index(0.5, 2.0, 3.0) == pytest.approx(
            math.log(2.0 / 3.0), rel=REL)

    def test_reflect_index_requires_positive_mu(self):
        with pytest.raises(ValueError, match="mu must be positive"):
            kernels.reflect_index(-0.5, 2.0, 3.0)
