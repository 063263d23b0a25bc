import numpy as np
import pytest

from algoprice import demand
from algoprice.errors import (
    CalibrationError,
    DomainError,
    GridMismatchError,
    InvalidPDError,
)

from conftest import REF5, TABLE2


class TestPriceGrid:
    def test_from_bounds(self):
        grid = demand.PriceGrid.from_bounds(4, 8, 5)
        assert grid.prices == (4, 5, 6, 7, 8)
        assert grid.k == 5
        assert grid.delta == 1
        assert grid.competitive_index == 0
        assert grid.monopoly_index == 4

    def test_rejects_uneven_spacing(self):
        with pytest.raises(DomainError):
            demand.PriceGrid((1.0, 2.0, 4.0))

    def test_rejects_tiny_grid(self):
        with pytest.raises(DomainError):
            demand.PriceGrid((1.0,))

    def test_index_of(self):
        grid = demand.PriceGrid.from_bounds(4, 8, 5)
        assert grid.index_of(6.0) == 2
        with pytest.raises(DomainError):
            grid.index_of(6.5)


class TestProfit:
    def test_discrete_choice_reference_points(self):
        model = demand.DiscreteChoiceDemand(0.0158, 0.4760)
        assert demand.profit(model, 8, 8) == pytest.approx(2.95, abs=0.01)
        assert demand.profit(model, 7, 8) == pytest.approx(3.39, abs=0.01)

    def test_linear_zero_price_zero_profit(self):
        model = demand.LinearDemand(10.0, 1.0)
        assert demand.profit(model, 0.0, 7.0) == 0.0

    def test_explicit_matrix_domain_error(self):
        grid = demand.PriceGrid.from_bounds(0, 1, 2)
        model = demand.ExplicitMatrix(((0.0, 2.0), (-1.0, 1.0)), grid)
        assert demand.profit(model, 1.0, 0.0) == -1.0
        with pytest.raises(DomainError):
            demand.profit(model, 0.5, 0.0)

    def test_finite_and_nonnegative_on_grids(self):
        # discrete choice is nonnegative everywhere; the linear form is
        # nonnegative on its own [p_C, p_M] grid for alpha <= 2 (beyond
        # that the linearized demand itself turns negative at (p_M, p_C))
        rng = np.random.default_rng(3)
        for _ in range(20):
            dc = demand.DiscreteChoiceDemand(rng.uniform(1e-3, 1), rng.uniform(0.1, 2))
            lin = demand.LinearDemand(rng.uniform(1, 50), rng.uniform(0.05, 2.0))
            grid = demand.PriceGrid.from_bounds(lin.competitive_price(),
                                                lin.monopoly_price(), 4)
            for p in grid.prices:
                for q in grid.prices:
                    val_l = demand.profit(lin, p, q)
                    val_d = demand.profit(dc, p, q)
                    assert np.isfinite(val_l) and np.isfinite(val_d)
                    assert val_l >= -1e-12
                    assert val_d >= 0.0


class TestPayoffMatrix:
    def test_five_price_reference(self, calibrated):
        _, _, _, table = calibrated
        assert np.max(np.abs(table - REF5)) < 0.01

    def test_explicit_passthrough(self):
        grid = demand.PriceGrid.from_bounds(0, 1, 2)
        model = demand.ExplicitMatrix(tuple(map(tuple, TABLE2)), grid)
        assert np.array_equal(demand.payoff_matrix(model, grid), TABLE2)

    def test_linear_closed_form_matches_elementwise(self):
        model = demand.LinearDemand(1.0, 1.0)
        pc, pm = model.competitive_price(), model.monopoly_price()
        grid = demand.PriceGrid.from_bounds(pc, pm, 2)
        table = demand.payoff_matrix(model, grid)
        for i, p in enumerate(grid.prices):
            for j, q in enumerate(grid.prices):
                closed = p * (1.0 - p + (q - p)) / 2.0
                assert table[i, j] == pytest.approx(closed, abs=1e-15)

    def test_grid_mismatch(self):
        grid2 = demand.PriceGrid.from_bounds(0, 1, 2)
        grid3 = demand.PriceGrid.from_bounds(0, 1, 3)
        model = demand.ExplicitMatrix(tuple(map(tuple, TABLE2)), grid2)
        with pytest.raises(GridMismatchError):
            demand.payoff_matrix(model, grid3)


class TestRegularity:
    def test_five_price_all_flags(self, calibrated):
        report = demand.regularity_report(calibrated[3])
        assert report.all_ok

    def test_two_price_pd_flags(self):
        report = demand.regularity_report(TABLE2)
        assert report.monotone_in_q
        assert report.static_nash_at_competitive
        assert report.joint_max_at_monopoly

    def test_constant_table_fails_uniqueness(self):
        report = demand.regularity_report(np.ones((3, 3)))
        assert not report.unique_best_response
        assert not report.static_nash_at_competitive


class TestNormalize:
    def test_two_price_example(self):
        x, y = demand.pd_normalize(TABLE2)
        assert x == pytest.approx(1.0)
        assert y == pytest.approx(1.0)

    def test_normalized_form_round_trip(self):
        for x0, y0 in [(0.5, 0.7), (1.5, 2.0), (0.1, 0.2)]:
            t = demand.normalized_table(x0, y0)
            x, y = demand.pd_normalize(t)
            assert x == pytest.approx(x0)
            assert y == pytest.approx(y0)

    def test_best_response_structure_preserved(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            x0 = rng.uniform(0.05, 2.0)
            y0 = rng.uniform(max(0.0, x0 - 1.0) + 0.05, 2.0)
            scale = rng.uniform(0.5, 10.0)
            shift = rng.uniform(0.0, 5.0)
            original = shift + scale * demand.normalized_table(x0, y0)
            x, y = demand.pd_normalize(original)
            rebuilt = demand.normalized_table(x, y)
            for j in range(2):
                assert np.argmax(original[:, j]) == np.argmax(rebuilt[:, j])

    def test_ordering_violation_raises(self):
        with pytest.raises(InvalidPDError):
            demand.pd_normalize(np.array([[1.0, 0.5], [0.0, 2.0]]))

    def test_utilitarian_violation_raises(self):
        # ordering fine but the off-diagonal mix beats two monopoly payoffs
        t = np.array([[1.0, 9.0], [0.0, 2.0]])
        with pytest.raises(InvalidPDError):
            demand.pd_normalize(t)

    def test_linear_models_have_y_above_x(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            model = demand.LinearDemand(rng.uniform(1, 50), rng.uniform(0.1, 4))
            grid = demand.PriceGrid.from_bounds(model.competitive_price(),
                                                model.monopoly_price(), 2)
            x, y = demand.pd_normalize(demand.payoff_matrix(model, grid))
            # identity behind the sufficiency condition: the joint loss from
            # one-sided undercutting is alpha*(pm-pc)^2/(2D) > 0
            assert y > x

    def test_supermodular_inequality_linear(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            d = rng.uniform(1, 50)
            alpha = rng.uniform(0.05, 4)
            model = demand.LinearDemand(d, alpha)
            pm = model.monopoly_price()
            for gap in rng.uniform(0.05, 0.95, size=4) * pm:
                lhs = (demand.profit(model, pm, pm)
                       + demand.profit(model, pm - gap, pm - gap))
                rhs = (demand.profit(model, pm, pm - gap)
                       + demand.profit(model, pm - gap, pm))
                assert lhs - rhs == pytest.approx(alpha * gap * gap / (2 * d))
                assert lhs > rhs

    def test_supermodular_inequality_discrete_choice(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            model = demand.DiscreteChoiceDemand(rng.uniform(1e-3, 0.5),
                                                rng.uniform(0.1, 1.5))
            pm = model.monopoly_price()
            for gap in rng.uniform(0.05, 0.95, size=4) * pm:
                lhs = (demand.profit(model, pm, pm)
                       + demand.profit(model, pm - gap, pm - gap))
                rhs = (demand.profit(model, pm, pm - gap)
                       + demand.profit(model, pm - gap, pm))
                assert lhs > rhs


class TestCalibration:
    def test_reference_values(self):
        a, b = demand.calibrate_discrete_choice(4, 8)
        assert a == pytest.approx(0.0158, abs=0.0005)
        assert b == pytest.approx(0.4760, abs=0.0005)

    def test_residuals_below_tolerance(self):
        a, b = demand.calibrate_discrete_choice(4, 8)
        model = demand.DiscreteChoiceDemand(a, b)
        assert abs(model._nash_foc(4.0)) < 1e-9
        assert abs(model._joint_foc(8.0)) < 1e-9

    def test_round_trip_regularity(self):
        a, b = demand.calibrate_discrete_choice(4, 8)
        grid = demand.PriceGrid.from_bounds(4, 8, 5)
        table = demand.payoff_matrix(demand.DiscreteChoiceDemand(a, b), grid)
        assert demand.regularity_report(table).all_ok

    def test_recovers_target_prices(self):
        a, b = demand.calibrate_discrete_choice(2.5, 7.0)
        model = demand.DiscreteChoiceDemand(a, b)
        assert model.competitive_price(hint=2.5) == pytest.approx(2.5, abs=1e-7)
        assert model.monopoly_price(hint=7.0) == pytest.approx(7.0, abs=1e-7)

    def test_failure_reports_residuals(self):
        with pytest.raises(CalibrationError) as err:
            demand.calibrate_discrete_choice(4, 8, b_bounds=(0.6, 1.0))
        assert err.value.residuals is not None

    def test_invalid_targets(self):
        with pytest.raises(DomainError):
            demand.calibrate_discrete_choice(8, 4)


class TestModelFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("model = discrete_choice\na = 0.0158\nb = 0.476\n"
                        "grid_min = 4\ngrid_max = 8\nk = 5\n")
        model, grid = demand.load_model_file(str(path))
        assert isinstance(model, demand.DiscreteChoiceDemand)
        assert grid.k == 5

    def test_matrix_variant(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("model = matrix\ngrid_min = 0\ngrid_max = 1\nk = 2\n"
                        "row_0 = 1.0 3.0\nrow_1 = 0.0 2.0\n")
        model, grid = demand.load_model_file(str(path))
        assert demand.profit(model, 1.0, 0.0) == 0.0

    def test_missing_key(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("a = 1\n")
        with pytest.raises(DomainError):
            demand.load_model_file(str(path))
