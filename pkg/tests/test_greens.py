"""
Testy funkcji Greena: wagi E±, postać zamknięta dla stałego D, dodatniość,
stała Lipschitza i punkt stały linearyzacji.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slopeflow.core import DiffusionProfile, Grid, SourceFunction
from slopeflow.greens import (
    build_greens,
    closed_form_green,
    closed_form_max_slope,
    closed_form_unit_source,
    constant_diffusion_table,
    exp_weights,
    fixed_point_check,
    gap_lower_bound,
    green_eval,
    green_solve,
    lipschitz_estimate,
    positivity_scan,
)

LAM = math.sin(0.2) ** 2


@pytest.fixture(scope="module")
def constant_table():
    return constant_diffusion_table(1.0, LAM, Grid.uniform(256))


# ============================================================
# Wagi wykładnicze
# ============================================================


class TestExpWeights:
    def test_linear_diffusion_is_integrated_exactly(self):
        grid = Grid.uniform(32)
        D = 1.0 + 0.5 * grid.nodes
        diffusion = DiffusionProfile(grid=grid, D=D, floor_used=0.5)
        _, _, cumulative = exp_weights(diffusion, 0.3)
        exact = 2.0 * 0.3 * np.log((1.0 + 0.5 * grid.nodes) / 0.5)
        np.testing.assert_allclose(cumulative, exact, rtol=1e-12, atol=1e-15)

    def test_endpoint_values(self, constant_table):
        assert constant_table.E_minus[0] == 1.0
        assert constant_table.E_plus[-1] == pytest.approx(1.0, abs=1e-15)
        assert np.all(np.diff(constant_table.E_minus) < 0)
        assert np.all(np.diff(constant_table.E_plus) < 0)

    def test_rejects_nonpositive_diffusion(self):
        grid = Grid.uniform(4)
        diffusion = DiffusionProfile(
            grid=grid, D=np.array([1.0, 1.0, 0.0, 1.0, 1.0]), floor_used=0.1
        )
        with pytest.raises(ValueError):
            exp_weights(diffusion, 0.1)
        with pytest.raises(ValueError):
            exp_weights(DiffusionProfile(grid, np.ones(5), 0.1), 0.0)


# ============================================================
# Stałe D: postać zamknięta
# ============================================================


class TestConstantDiffusion:
    def test_matches_closed_form(self, constant_table):
        nodes = constant_table.grid.nodes
        X, Y = np.meshgrid(nodes, nodes, indexing="ij")
        exact = closed_form_green(1.0, LAM, X, Y)
        assert np.max(np.abs(constant_table.G - exact)) <= 1e-8

    def test_unit_source(self, constant_table):
        profile = green_solve(constant_table, SourceFunction.constant(1.0))
        exact = closed_form_unit_source(1.0, LAM, constant_table.grid.nodes)
        assert np.max(np.abs(profile.u - exact)) <= 1e-4

    def test_lipschitz_constant_is_inverse_diffusion(self):
        table = constant_diffusion_table(2.0, LAM, Grid.uniform(128))
        result = lipschitz_estimate(table, samples=2000, seed=3)
        assert result.kappa == pytest.approx(closed_form_max_slope(2.0), rel=1e-9)
        assert result.worst_ratio <= 1.0 + 1e-9

    @given(
        D0=st.floats(min_value=0.5, max_value=5.0),
        lam=st.floats(min_value=0.01, max_value=1.0),
        s=st.floats(min_value=-1.0, max_value=1.0),
        t=st.floats(min_value=-1.0, max_value=1.0),
        y=st.floats(min_value=-1.0, max_value=1.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_lipschitz_in_x(self, D0, lam, s, t, y):
        table = constant_diffusion_table(D0, lam, Grid.uniform(32))
        kappa = 1.0 / D0
        lhs = abs(green_eval(table, s, y) - green_eval(table, t, y))
        assert lhs <= kappa * abs(s - t) * (1.0 + 1e-9) + 1e-14


# ============================================================
# Własności tablicy
# ============================================================


class TestGreensTable:
    def test_boundary_rows_vanish(self, constant_table):
        assert np.all(constant_table.G[0, :] == 0.0)
        assert np.max(np.abs(constant_table.G[-1, :])) <= 1e-15

    def test_positive_inside(self, constant_table):
        min_G, (x, y) = positivity_scan(constant_table)
        assert min_G > 0
        assert -1.0 < x < 1.0 and -1.0 < y < 1.0

    def test_gap_bound(self, constant_table):
        gap_min, bound = gap_lower_bound(constant_table)
        assert gap_min >= bound - 1e-15
        assert bound > 0

    def test_eval_matches_table_at_nodes(self, constant_table):
        nodes = constant_table.grid.nodes
        i, j = np.array([3, 100, 200, 255]), np.array([50, 100, 10, 250])
        values = green_eval(constant_table, nodes[i], nodes[j])
        expected = constant_table.G[i, j]
        np.testing.assert_allclose(values, expected, rtol=1e-10, atol=1e-14)

    def test_eval_continuous_on_diagonal(self, constant_table):
        x = 0.123
        below = green_eval(constant_table, x - 1e-10, x)
        above = green_eval(constant_table, x + 1e-10, x)
        assert abs(below - above) <= 1e-8

    def test_eval_domain(self, constant_table):
        with pytest.raises(ValueError):
            green_eval(constant_table, 1.5, 0.0)

    def test_dense_size_limit(self):
        with pytest.raises(ValueError):
            constant_diffusion_table(1.0, LAM, Grid.uniform(4096))


# ============================================================
# Punkt stały dla rozwiązania nieliniowego
# ============================================================


class TestFixedPoint:
    def test_profile_solves_own_linearization(self, small_spec, small_profile):
        result = fixed_point_check(small_spec, small_profile)
        assert result.discrepancy <= 1e-4
        assert positivity_scan(result.table)[0] > 0
        assert result.reproduced.residual_first_order <= 1e-3

    def test_lipschitz_on_variable_diffusion(self, small_spec, small_profile):
        diffusion = fixed_point_check(small_spec, small_profile).diffusion
        table = build_greens(diffusion, small_spec.lam)
        result = lipschitz_estimate(table, samples=5000, seed=0)
        assert np.isfinite(result.kappa)
        assert result.worst_ratio <= 1.0 + 1e-9
