"""Certification tables, inequality sweeps, envelope report, serialization."""

import math

import numpy as np
import pytest

from bkk import certify, kernels

# small grids keep these tests quick; wide-grid sweeps live in the
# acceptance suite
CLOSED_SPEC = certify.GridSpec(
    mu_list=(-0.5, 0.5),
    t_grid=(0.1, 1.0, 10.0),
    x_grid=(1.1, 1.5, 2.0, 5.0),
    y_grid=(1.2, 1.8, 3.0, 6.0),
)
PDE_SPEC = certify.GridSpec(
    mu_list=(-0.25, 0.25, 0.5),
    t_grid=(0.5, 2.0),
    x_grid=(1.5, 2.5),
    y_grid=(1.4, 2.0, 3.5),
)


@pytest.fixture(scope="module")
def closed_tables():
    return certify.build_tables(CLOSED_SPEC)


@pytest.fixture(scope="module")
def pde_tables():
    return certify.build_tables(PDE_SPEC, pde_nodes=2000)


class TestGridSpec:
    def test_default_is_wide(self):
        spec = certify.GridSpec()
        assert len(spec.mu_list) == 8
        assert spec.t_grid[0] == 1e-3 and spec.t_grid[-1] == 1e3

    @pytest.mark.parametrize("kw,msg", [
        (dict(mu_list=()), "grids must be nonempty"),
        (dict(mu_list=(0.0,)), "mu must be nonzero"),
        (dict(a=-1.0), "a must be positive"),
        (dict(t_grid=(0.0, 1.0)), "t must be positive"),
        (dict(x_grid=(0.5, 2.0)), "x and y must exceed a"),
    ])
    def test_validation(self, kw, msg):
        with pytest.raises(ValueError, match=msg):
            certify.GridSpec(**kw)

    def test_scaled_unit_reduces_barrier(self):
        spec = certify.GridSpec(
            mu_list=(0.5,), t_grid=(4.0,), x_grid=(4.0,), y_grid=(6.0,),
            a=2.0)
        tu, xu, yu = spec.scaled_unit()
        assert tu == (1.0,) and xu == (2.0,) and yu == (3.0,)


class TestBuildTablesClosedForm:
    def test_half_index_cells_match_closed_form(self, closed_tables):
        tbl = closed_tables.tables[0.5]
        assert bool(np.all(tbl.ok))
        assert bool(np.all(tbl.method == 1))
        for it, t in enumerate(CLOSED_SPEC.t_grid):
            for ix, x in enumerate(CLOSED_SPEC.x_grid):
                for iy, y in enumerate(CLOSED_SPEC.y_grid):
                    assert tbl.log_p1[it, ix, iy] == pytest.approx(
                        kernels.log_half_killed_kernel(t, x, y), rel=1e-13)

    def test_negative_half_is_exact_reflection(self, closed_tables):
        pos = closed_tables.tables[0.5]
        neg = closed_tables.tables[-0.5]
        X = np.asarray(CLOSED_SPEC.x_grid)[None, :, None]
        Y = np.asarray(CLOSED_SPEC.y_grid)[None, None, :]
        refl = kernels.reflect_index(0.5, X, Y)
        np.testing.assert_allclose(
            neg.log_p1, pos.log_p1 + refl, rtol=0, atol=1e-12)

    def test_free_kernel_column(self, closed_tables):
        tbl = closed_tables.tables[0.5]
        assert tbl.log_p[1, 2, 1] == pytest.approx(
            kernels.log_free_kernel(0.5, 1.0, 2.0, 1.8), rel=1e-13)

    def test_node_budget_validated(self):
        with pytest.raises(ValueError, match="pde_nodes must be at least 500"):
            certify.build_tables(CLOSED_SPEC, pde_nodes=100)


class TestBuildTablesPde:
    def test_marched_cells_are_labeled_and_bounded(self, pde_tables):
        tbl = pde_tables.tables[0.25]
        ok = tbl.ok
        assert np.any(ok)
        assert bool(np.all(tbl.method[ok] == 2))
        # killed kernel can never exceed the free one beyond solver slack
        assert float((tbl.log_p1 - tbl.log_p)[ok].max()) < certify.SLACK_PDE

    def test_negative_index_is_exact_reflection(self, pde_tables):
        pos = pde_tables.tables[0.25]
        neg = pde_tables.tables[-0.25]
        assert bool(np.all(pos.skip == neg.skip))
        ok = pos.ok
        X = np.asarray(PDE_SPEC.x_grid)[None, :, None]
        Y = np.asarray(PDE_SPEC.y_grid)[None, None, :]
        refl = np.broadcast_to(kernels.reflect_index(0.25, X, Y),
                               pos.log_p1.shape)
        np.testing.assert_allclose(
            neg.log_p1[ok], (pos.log_p1 + refl)[ok], rtol=0, atol=1e-12)

    def test_flux_records_feed_sources(self, pde_tables):
        keys = [k for k in pde_tables.flux_records if k[0] == 0.25]
        assert keys
        mu, ix = keys[0]
        t = PDE_SPEC.t_grid[0]
        src = pde_tables.source_for(mu, ix, t)
        assert src is not None and src.kind == "pde_flux"
        combined = pde_tables.combined_source(mu, ix)
        s_probe = np.geomspace(1e-3, 1.0, 9)
        assert np.all(np.isfinite(combined.log_q(s_probe)))

    def test_thread_count_never_changes_values(self):
        a = certify.build_tables(PDE_SPEC, pde_nodes=2000, threads=1)
        b = certify.build_tables(PDE_SPEC, pde_nodes=2000, threads=4)
        for m in PDE_SPEC.mu_list:
            np.testing.assert_array_equal(a.tables[m].log_p1,
                                          b.tables[m].log_p1)
            np.testing.assert_array_equal(a.tables[m].skip, b.tables[m].skip)


class TestInequalitySuite:
    def test_all_checks_pass_on_closed_grid(self, closed_tables):
        results = certify.run_inequality_suite(
            CLOSED_SPEC, tables=closed_tables, seed=0)
        assert [r.check_id for r in results] == list(certify.CHECK_IDS)
        for r in results:
            assert r.passed, (r.check_id, r.worst_margin, r.worst_cell)

    def test_deterministic_under_fixed_seed(self, closed_tables):
        a = certify.run_inequality_suite(
            CLOSED_SPEC, tables=closed_tables, seed=123)
        b = certify.run_inequality_suite(
            CLOSED_SPEC, tables=closed_tables, seed=123)
        assert a == b

    def test_pde_grid_passes_including_brackets(self, pde_tables):
        results = certify.run_inequality_suite(
            PDE_SPEC, tables=pde_tables, seed=1)
        by_id = {r.check_id: r for r in results}
        bracket = by_id["half-index-bracket"]
        assert bracket.cells_total > 0 and bracket.passed
        for r in results:
            assert r.passed, (r.check_id, r.worst_margin, r.worst_cell)

    def test_xchecks_can_be_skipped(self, closed_tables):
        results = certify.run_inequality_suite(
            CLOSED_SPEC, tables=closed_tables, seed=0, include_xchecks=False)
        ids = [r.check_id for r in results]
        assert "xcheck-hunt" not in ids and "xcheck-mc" not in ids


class TestEnvelopeReport:
    def test_rows_and_identity(self, closed_tables):
        rep = certify.run_envelope_report(CLOSED_SPEC, tables=closed_tables)
        assert [r.mu for r in rep.rows] == list(CLOSED_SPEC.mu_list)
        for row in rep.rows:
            assert row.identity_max_abs == 0.0
            assert row.cells_used == 48
            assert row.spread == pytest.approx(
                row.max_log_ratio - row.min_log_ratio, rel=1e-12)
            assert row.max_log_ratio < 0.0  # kernel sits under its envelope
            for key, stats in row.regimes.items():
                assert stats["cells"] > 0

    def test_row_lookup(self, closed_tables):
        rep = certify.run_envelope_report(CLOSED_SPEC, tables=closed_tables)
        assert rep.row(0.5).mu == 0.5
        with pytest.raises(KeyError):
            rep.row(7.0)


@pytest.fixture(scope="module")
def payload():
    results = certify.run_inequality_suite(
        CLOSED_SPEC, seed=0, include_xchecks=False)
    envelope = certify.run_envelope_report(CLOSED_SPEC)
    return results, envelope


class TestReportSerialization:
    def test_json_round_trip(self, payload):
        results, envelope = payload
        text = certify.emit_report(results, envelope, fmt="json")
        checks2, env2 = certify.parse_report(text)
        assert checks2 == results
        assert env2 == envelope

    def test_csv_round_trip(self, payload):
        results, envelope = payload
        text = certify.emit_report(results, envelope, fmt="csv")
        checks2, env2 = certify.parse_report(text)
        assert checks2 == results
        assert env2 == envelope

    def test_rejects_unknown_format_and_schema(self, payload):
        results, envelope = payload
        with pytest.raises(ValueError, match="fmt must be json or csv"):
            certify.emit_report(results, envelope, fmt="xml")
        with pytest.raises(ValueError, match="unrecognized report schema"):
            certify.parse_report('{"schema": "other"}')
        with pytest.raises(ValueError, match="unrecognized record type"):
            certify.parse_report("record_type,check_id\nbogus,x\n")
