import numpy as np
import pytest

from glmmselect.errors import ConfigurationError
from glmmselect.model import ModelDims
from glmmselect.report import (
    ModelLabel,
    fixed_effect_rmse,
    format_table,
    grid_report,
    inclusion_probabilities,
    label_of,
    modal_random_pattern,
    top_models,
)
from glmmselect.sampler import ChainTrace, Trace


def fabricate_trace(J_rows, I_rows, beta_rows=None, l=None, q=None):
    """Build a single-chain Trace directly from indicator/coefficient rows."""
    J = np.asarray(J_rows, dtype=np.int8)
    I = np.asarray(I_rows, dtype=np.int8)
    n, l = J.shape
    q = I.shape[1]
    beta = np.asarray(beta_rows, dtype=float) if beta_rows is not None else np.ones((n, l))
    chain = ChainTrace(
        seed=0,
        beta=beta,
        J=J,
        lam=[np.abs(beta[:, :q]) * 0 + 0.5],
        include=[I],
        r=[np.zeros((n, q * (q - 1) // 2))],
        xi=[np.zeros((n, 3, q))],
        kappa=[np.ones((n, q))],
        log_posterior=np.zeros(n),
    )
    dims = ModelDims(l=l, blocks=((q, 3),))
    return Trace(chains=[chain], settings=None, dims=dims, family_kind="poisson")


class TestLabelOf:
    def test_patterns(self):
        class FakeBlock:
            include = np.array([1, 0, 1])

        class FakeState:
            J = np.array([1, 1, 0])
            blocks = [FakeBlock()]

        lab = label_of(FakeState())
        assert lab == ModelLabel(fixed=(1, 1, 0), random=((1, 0, 1),))

    def test_describe(self):
        lab = ModelLabel(fixed=(1, 0), random=((0, 1),))
        assert lab.describe() == "fixed[1] random[2]"


class TestTopModels:
    def test_single_repeated_label(self):
        trace = fabricate_trace([[1, 1]] * 10, [[1]] * 10)
        rep = top_models(trace)
        assert rep.entries[0][2] == pytest.approx(100.0)
        assert rep.modal == ModelLabel(fixed=(1, 1), random=((1,),))

    def test_uniform_over_two_labels(self):
        J = [[1, 1]] * 5 + [[1, 0]] * 5
        trace = fabricate_trace(J, [[1]] * 10)
        rep = top_models(trace)
        assert rep.entries[0][2] == pytest.approx(50.0)
        assert rep.entries[1][2] == pytest.approx(50.0)

    def test_counts_sum_to_trace_length(self):
        rng = np.random.default_rng(0)
        J = rng.integers(0, 2, (200, 3))
        I = rng.integers(0, 2, (200, 2))
        trace = fabricate_trace(J, I)
        rep = top_models(trace)
        assert sum(cnt for _, cnt, _ in rep.entries) == 200

    def test_tie_break_by_label_order(self):
        J = [[0, 1]] * 5 + [[1, 0]] * 5
        trace = fabricate_trace(J, [[1]] * 10)
        rep = top_models(trace)
        assert rep.entries[0][0].fixed == (0, 1)

    def test_truncation(self):
        rng = np.random.default_rng(1)
        trace = fabricate_trace(rng.integers(0, 2, (100, 3)), rng.integers(0, 2, (100, 1)))
        rep = top_models(trace, k=2)
        assert len(rep.entries) == 2

    def test_empty_trace_raises(self):
        trace = fabricate_trace(np.zeros((0, 2)), np.zeros((0, 1)))
        with pytest.raises(ConfigurationError):
            top_models(trace)


class TestInclusion:
    def test_all_ones(self):
        trace = fabricate_trace([[1, 1]] * 8, [[1]] * 8)
        incl = inclusion_probabilities(trace)
        np.testing.assert_array_equal(incl["fixed"], [1.0, 1.0])
        np.testing.assert_array_equal(incl["random"][0], [1.0])

    def test_alternating_half(self):
        J = [[1, 0], [0, 1]] * 5
        trace = fabricate_trace(J, [[1]] * 10)
        incl = inclusion_probabilities(trace)
        np.testing.assert_allclose(incl["fixed"], [0.5, 0.5])

    def test_matches_label_weighted_marginal(self):
        rng = np.random.default_rng(2)
        J = rng.integers(0, 2, (300, 3))
        I = rng.integers(0, 2, (300, 2))
        trace = fabricate_trace(J, I)
        incl = inclusion_probabilities(trace)
        rep = top_models(trace)
        total = sum(cnt for _, cnt, _ in rep.entries)
        marg = np.zeros(3)
        for lab, cnt, _ in rep.entries:
            marg += np.array(lab.fixed) * cnt
        np.testing.assert_allclose(incl["fixed"], marg / total, atol=1e-12)

    def test_fraction_reporting_precision(self):
        # a 4349-in-9000 inclusion rate is reportable to 4 decimals
        J = np.zeros((9000, 1), dtype=np.int8)
        J[:4349] = 1
        trace = fabricate_trace(J, np.ones((9000, 1)))
        incl = inclusion_probabilities(trace)
        assert round(float(incl["fixed"][0]), 4) == round(4349 / 9000, 4)

    def test_modal_random_pattern(self):
        I = [[1, 0]] * 6 + [[0, 1]] * 4
        trace = fabricate_trace([[1, 1]] * 10, I)
        assert modal_random_pattern(trace, block=0) == (1, 0)


class TestRmse:
    def test_exact_recovery_is_zero(self):
        beta = np.tile([1.0, -0.5], (20, 1))
        trace = fabricate_trace([[1, 1]] * 20, [[1]] * 20, beta_rows=beta)
        assert fixed_effect_rmse(trace, [1.0, -0.5]) == 0.0

    def test_single_offset_coordinate(self):
        # one of ten coordinates off by 0.1: rmse = sqrt(0.01/10)
        beta = np.tile(np.zeros(10), (5, 1))
        truth = np.zeros(10)
        truth[3] = 0.1
        trace = fabricate_trace(np.ones((5, 10)), [[1]] * 5, beta_rows=beta)
        assert fixed_effect_rmse(trace, truth) == pytest.approx(np.sqrt(0.01 / 10))

    def test_single_draw(self):
        beta = np.array([[0.3, 0.7]])
        trace = fabricate_trace([[1, 1]], [[1]], beta_rows=beta)
        want = np.sqrt(np.mean((np.array([0.3, 0.7]) - np.array([0.0, 0.0])) ** 2))
        assert fixed_effect_rmse(trace, [0.0, 0.0]) == pytest.approx(want)

    def test_masked_coefficients_average_as_zero(self):
        beta = np.array([[5.0, 1.0]] * 4)
        J = np.array([[0, 1]] * 4)
        trace = fabricate_trace(J, [[1]] * 4, beta_rows=beta)
        assert fixed_effect_rmse(trace, [0.0, 1.0]) == 0.0

    def test_length_mismatch(self):
        trace = fabricate_trace([[1, 1]] * 3, [[1]] * 3)
        with pytest.raises(ConfigurationError):
            fixed_effect_rmse(trace, [1.0])


class TestGridReport:
    def test_single_cell(self):
        rows = grid_report({(1.0, 0.1): {"percent": 44.0, "rmse": 0.001}})
        assert len(rows) == 1
        assert rows[0]["status"] == "ok"

    def test_nine_cells_ordered_by_h_then_v(self):
        cells = {}
        for v in (0.01, 1.0, 5.0):
            for h in (0.1, 1.0, 10.0):
                cells[(v, h)] = {"percent": 0.0, "rmse": 0.0}
        rows = grid_report(cells)
        assert len(rows) == 9
        assert [(r["v"], r["h"]) for r in rows[:3]] == [(0.01, 0.1), (1.0, 0.1), (5.0, 0.1)]

    def test_missing_cell_flagged(self):
        rows = grid_report({(1.0, 0.1): None})
        assert rows[0]["status"] == "missing"
        assert np.isnan(rows[0]["percent"])

    def test_format_table_alignment(self):
        text = format_table(["a", "bb"], [(1, 2), (30, 4)])
        lines = text.splitlines()
        assert lines[0].startswith("a")
        assert len(lines) == 4
