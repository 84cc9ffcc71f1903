"""Finite-difference route: mesh, march, flux, and accuracy targets."""

import math

import numpy as np
import pytest

from bkk import hunt, kernels, pde

HALF = 0.5


def interior_rel_err(sl, x, log_ref_fn):
    """Max relative error against a log-scale reference on |y-x| <= 4 sqrt(t)."""
    m = (np.abs(sl.y - x) <= 4.0 * math.sqrt(sl.t)) & (sl.y > 1.0 + 1e-9)
    ref = log_ref_fn(sl.y[m])
    return float(np.abs(np.expm1(sl.log_values[m] - ref)).max())


class TestPdeConfig:
    @pytest.mark.parametrize("kw,msg", [
        (dict(nodes=100), "nodes must be at least 200"),
        (dict(time_steps=10), "time_steps must be at least 40"),
        (dict(theta=0.4), r"theta must lie in \[1/2, 1\]"),
        (dict(time_grading=1.5), "time_grading must lie in"),
        (dict(wall_cell_ratio=1.2), "wall_cell_ratio must lie in"),
        (dict(wall_refine=0.0001), "wall_refine must lie in"),
        (dict(domain_cap=0.8), "domain_cap must exceed the barrier"),
    ])
    def test_validation(self, kw, msg):
        with pytest.raises(ValueError, match=msg):
            pde.PdeConfig(**kw)


class TestDefaultDomainCap:
    def test_scales_with_time_and_start(self):
        assert pde.default_domain_cap(0.5, 1.0, 2.0) == 50.0
        assert pde.default_domain_cap(0.5, 1e4, 2.0) == pytest.approx(
            8.0 * math.sqrt(3e4), rel=1e-12)
        assert pde.default_domain_cap(0.5, 1.0, 100.0) == 800.0

    def test_finite_for_strongly_negative_index(self):
        # 2 mu + 2 < 0 here; the spread floor keeps the sqrt argument positive
        for mu in (-1.0, -2.5, -40.0):
            cap = pde.default_domain_cap(mu, 10.0, 2.0)
            assert math.isfinite(cap) and cap >= 50.0


class TestMesh:
    def test_mesh_shape_and_refinement(self):
        solver = pde.KilledKernelSolver(HALF, 50.0, pde.PdeConfig(nodes=2000))
        y = solver.y
        assert y[0] == 1.0 and y[-1] == pytest.approx(50.0)
        assert np.all(np.diff(y) > 0)
        h = np.diff(y)
        # near-wall cells about wall_refine times the uniform spacing
        assert h[0] < 0.02 * h[-1]

    def test_uniform_mesh_when_refine_is_one(self):
        solver = pde.KilledKernelSolver(
            HALF, 50.0, pde.PdeConfig(nodes=1000, wall_refine=1.0))
        h = np.diff(solver.y)
        assert np.allclose(h, h[0], rtol=1e-9)

    def test_delta_profile_needs_interior_point(self):
        solver = pde.KilledKernelSolver(HALF, 50.0, pde.PdeConfig(nodes=500))
        with pytest.raises(ValueError, match="x must lie well inside the mesh"):
            solver.delta_profile(49.9)


class TestAccuracyAgainstClosedForm:
    def test_half_index_interior(self):
        for t, x in [(0.1, 1.5), (1.0, 2.0), (10.0, 5.0)]:
            sl = pde.solve_killed_kernel(HALF, t, x)
            err = interior_rel_err(
                sl, x, lambda y, t=t, x=x: kernels.log_half_killed_kernel(t, x, y))
            assert err < 1e-3, (t, x, err)

    def test_negative_half_index_via_reflection(self):
        sl = pde.solve_killed_kernel(-HALF, 1.0, 2.0)
        err = interior_rel_err(
            sl, 2.0,
            lambda y: kernels.log_half_killed_kernel(1.0, 2.0, y)
            + kernels.reflect_index(HALF, 2.0, y))
        assert err < 1e-3

    def test_spatial_convergence_is_fourth_order(self):
        # uniform mesh and a dense time grid isolate the spatial error;
        # halving the spacing should cut it by about sixteen
        errs = []
        for nodes in (600, 1200):
            cfg = pde.PdeConfig(nodes=nodes, wall_refine=1.0, time_steps=20000)
            sl = pde.solve_killed_kernel(HALF, 1.0, 2.0, cfg)
            errs.append(interior_rel_err(
                sl, 2.0, lambda y: kernels.log_half_killed_kernel(1.0, 2.0, y)))
        assert errs[0] / errs[1] > 4.0

    def test_survival_probability(self):
        surv = pde.survival_probability(HALF, 1.0, 2.0)
        exact = 1.0 - math.exp(kernels.log_half_hitting_cdf(2.0, 1.0))
        assert surv == pytest.approx(exact, rel=1e-4)

    def test_checkpoints_consistent_with_closed_form(self):
        solver = pde.KilledKernelSolver(HALF, 60.0, pde.PdeConfig())
        slices = solver.solve_checkpoints(2.0, [0.5, 1.0, 4.0])
        assert [sl.t for sl in slices] == [0.5, 1.0, 4.0]
        for sl in slices:
            err = interior_rel_err(
                sl, 2.0,
                lambda y, t=sl.t: kernels.log_half_killed_kernel(t, 2.0, y))
            assert err < 1e-3, (sl.t, err)


class TestLongMarchStability:
    def test_stiff_wall_modes_stay_damped(self):
        # long march from a start almost touching the wall; the wall cells
        # are the stiffest part of the operator and their roundoff must not
        # outlive the decaying field
        sl = pde.solve_killed_kernel(
            2.5, 81.11, 1.00351,
            pde.PdeConfig(domain_cap=200.0))
        assert np.all(np.isfinite(sl.log_values[1:-1]))
        free = kernels.log_free_kernel(2.5, 81.11, 1.00351, sl.y[1:-1])
        assert np.all(sl.log_values[1:-1] <= free + 1e-6)


class TestHittingFlux:
    def test_flux_matches_half_index_density(self):
        src = pde.hitting_density_flux(HALF, 2.0, 4.0)
        s = np.geomspace(0.05, 4.0, 25)
        err = np.abs(src.log_q(s) - kernels.log_half_hitting_density(2.0, s))
        assert float(err.max()) < 5e-3

    def test_flux_mass_plus_survival_is_one(self):
        src = pde.hitting_density_flux(HALF, 2.0, 4.0)
        mass = math.exp(hunt.source_log_mass(src, horizon=4.0))
        surv = pde.survival_probability(HALF, 4.0, 2.0)
        assert mass + surv == pytest.approx(1.0, abs=1e-4)


class TestGeneratorResidual:
    def test_spatial_truncation_is_small(self):
        res = pde.generator_residual(HALF, 1.0, 2.0)
        assert res < 1e-6

    def test_residual_shrinks_with_resolution(self):
        # max norm is set by the second-order one-sided end rows, so a
        # fourfold refinement should shrink it by an order of magnitude
        coarse = pde.generator_residual(
            HALF, 1.0, 2.0, pde.PdeConfig(nodes=500, wall_refine=1.0))
        fine = pde.generator_residual(
            HALF, 1.0, 2.0, pde.PdeConfig(nodes=2000, wall_refine=1.0))
        assert fine < coarse / 8.0


class TestErrors:
    def test_rejects_barrier_start(self):
        with pytest.raises(ValueError, match="require t > 0 and x > 1"):
            pde.solve_killed_kernel(HALF, 1.0, 0.9)

    def test_domain_too_small(self):
        cfg = pde.PdeConfig(domain_cap=20.0)
        with pytest.raises(pde.DomainTooSmall, match="domain cap must exceed"):
            pde.solve_killed_kernel(HALF, 100.0, 2.0, cfg)

    def test_flux_horizon_needs_room(self):
        cfg = pde.PdeConfig(domain_cap=10.0)
        with pytest.raises(pde.DomainTooSmall, match="sqrt\\(horizon\\)"):
            pde.hitting_density_flux(HALF, 2.0, 16.0, cfg)

    def test_rejects_zero_index(self):
        with pytest.raises(ValueError, match="mu must be nonzero"):
            pde.KilledKernelSolver(0.0, 50.0)


class TestKernelSlice:
    def test_interp_log_outside_mesh_is_log_zero(self):
        sl = pde.solve_killed_kernel(HALF, 1.0, 2.0)
        out = sl.interp_log(np.array([0.5, 100.0]))
        assert np.all(np.isneginf(out))

    def test_interp_log_matches_nodes(self):
        sl = pde.solve_killed_kernel(HALF, 1.0, 2.0)
        mid = len(sl.y) // 2
        v = sl.interp_log(sl.y[mid:mid + 1])
        assert v[0] == pytest.approx(sl.log_values[mid], rel=1e-12)

    def test_log_survival_in_range(self):
        sl = pde.solve_killed_kernel(HALF, 1.0, 2.0)
        assert -0.2 < sl.log_survival() < 0.0
