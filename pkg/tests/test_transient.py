"""
Testy schematu nieustalonego: stan stały, bilans masy, CFL, zbieżność w czasie
i relaksacja do profilu ustalonego.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slopeflow.core import CflViolation, Grid, ProblemSpec, SourceFunction
from slopeflow.oracle import FdConfig, solve_fd
from slopeflow.steady import solve_steady
from slopeflow.transient import (
    TransientConfig,
    flux,
    h0_values,
    initial_state,
    run,
    stable_dt,
    step,
)


def bump(grid: Grid, H: float = 1.0) -> np.ndarray:
    """Gładki garb na poziomie H, zgodny z warunkami brzegowymi."""
    return H + 0.3 * np.cos(0.5 * np.pi * grid.nodes) ** 2


@pytest.fixture(scope="module")
def rain_spec():
    return ProblemSpec(p=3.0, H=1.0, phi=0.2, source=SourceFunction.constant(0.05))


# ============================================================
# Pojedynczy krok
# ============================================================


class TestStep:
    def test_constant_state_is_stationary(self, zero_spec):
        grid = Grid.uniform(64)
        state = initial_state(zero_spec, grid, zero_spec.H)
        summary = run(zero_spec, state, TransientConfig(t_end=1.0))
        np.testing.assert_array_equal(summary.final_state.h_hat, state.h_hat)
        assert summary.steps > 0

    @given(
        p=st.floats(min_value=1.5, max_value=4.0),
        phi=st.floats(min_value=0.1, max_value=0.8),
        rain=st.floats(min_value=-0.05, max_value=0.2),
    )
    @settings(max_examples=30, deadline=None)
    def test_mass_balance(self, p, phi, rain):
        spec = ProblemSpec(p=p, H=1.0, phi=phi, source=SourceFunction.constant(rain))
        grid = Grid.uniform(64)
        state = initial_state(spec, grid, bump(grid))
        dt = stable_dt(spec, state.h_hat, grid)
        _, report = step(spec, state, dt)
        assert report.clipped_mass == 0.0
        assert report.mass_residual <= 1e-12

    def test_cfl_violation(self, rain_spec):
        grid = Grid.uniform(64)
        state = initial_state(rain_spec, grid, bump(grid))
        limit = stable_dt(rain_spec, state.h_hat, grid)
        with pytest.raises(CflViolation) as info:
            step(rain_spec, state, 10.0 * limit)
        assert info.value.suggested_dt == pytest.approx(limit)

    def test_nonpositive_step(self, rain_spec):
        grid = Grid.uniform(16)
        state = initial_state(rain_spec, grid, rain_spec.H)
        with pytest.raises(ValueError):
            step(rain_spec, state, 0.0)

    def test_boundaries_stay_pinned(self):
        spec = ProblemSpec(
            p=3.0,
            H=1.0,
            phi=0.3,
            source=SourceFunction.constant(0.1),
            H_minus=0.5,
            H_plus=1.5,
        )
        grid = Grid.uniform(32)
        state = initial_state(spec, grid, 1.0)
        assert state.h_hat[0] == 0.5 and state.h_hat[-1] == 1.5
        new, _ = step(spec, state, stable_dt(spec, state.h_hat, grid))
        assert new.h_hat[0] == 0.5 and new.h_hat[-1] == 1.5

    def test_negative_thickness_clipped(self):
        spec = ProblemSpec(p=3.0, H=1.0, phi=0.3, source=SourceFunction.constant(-1.0))
        grid = Grid.uniform(32)
        state = initial_state(spec, grid, np.zeros(33))
        new, report = step(spec, state, stable_dt(spec, state.h_hat, grid))
        assert report.clipped_mass > 0
        assert np.all(new.h_hat >= 0.0)

    def test_requires_uniform_grid(self, rain_spec):
        grid = Grid.graded(32, 0.5)
        with pytest.raises(ValueError):
            flux(rain_spec, np.ones(33), grid)


class TestFlux:
    def test_downslope_flux_of_flat_sheet(self, rain_spec):
        grid = Grid.uniform(8)
        Q = flux(rain_spec, np.full(9, 2.0), grid)
        expected = -2.0 * np.sin(0.2) ** 2
        np.testing.assert_allclose(Q, expected, rtol=1e-14)

    def test_upwind_takes_upstream_node(self, rain_spec):
        grid = Grid.uniform(4)
        h = np.array([1.0, 1.0, 3.0, 1.0, 1.0])
        central = flux(rain_spec, h, grid)
        upwind = flux(rain_spec, h, grid, upwind=True)
        # ściana 1-2: g > 0, węzeł pod prąd to 2; ściana 2-3: g < 0, węzeł 2
        ratio = upwind / central
        assert ratio[1] == pytest.approx(3.0 / 2.0)
        assert ratio[2] == pytest.approx(3.0 / 2.0)
        assert ratio[0] == pytest.approx(1.0)

    def test_negative_thickness_rejected(self, rain_spec):
        with pytest.raises(ValueError):
            flux(rain_spec, np.array([1.0, -0.1, 1.0]), Grid.uniform(2))


# ============================================================
# Stan początkowy
# ============================================================


class TestInitialData:
    def test_constant_defaults_to_ditch_level(self, rain_spec):
        grid = Grid.uniform(8)
        np.testing.assert_array_equal(
            h0_values(rain_spec, grid, {"kind": "constant"}), np.ones(9)
        )

    def test_samples_interpolated(self, rain_spec):
        grid = Grid.uniform(4)
        h = h0_values(
            rain_spec, grid, {"kind": "samples", "x": [-1.0, 1.0], "h": [1.0, 2.0]}
        )
        np.testing.assert_allclose(h, [1.0, 1.25, 1.5, 1.75, 2.0])

    def test_steady_requires_profile(self, rain_spec):
        with pytest.raises(ValueError):
            h0_values(rain_spec, Grid.uniform(4), {"kind": "steady"})

    def test_unknown_kind(self, rain_spec):
        with pytest.raises(ValueError):
            h0_values(rain_spec, Grid.uniform(4), {"kind": "wave"})

    def test_negative_initial_thickness(self, rain_spec):
        with pytest.raises(ValueError):
            initial_state(rain_spec, Grid.uniform(4), -1.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"t_end": -1.0},
            {"snapshot_every": 0.0},
            {"cfl_safety": 0.6},
            {"max_dt": 0.0},
        ],
    )
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            TransientConfig(**kwargs)


# ============================================================
# Całkowanie
# ============================================================


class TestRun:
    def test_zero_duration_returns_initial_state(self, rain_spec):
        grid = Grid.uniform(32)
        state = initial_state(rain_spec, grid, bump(grid))
        summary = run(rain_spec, state, TransientConfig(t_end=0.0))
        assert summary.steps == 0
        assert len(summary.snapshots) == 1
        np.testing.assert_array_equal(summary.final_state.h_hat, state.h_hat)

    def test_snapshots_at_cadence(self, rain_spec):
        grid = Grid.uniform(32)
        state = initial_state(rain_spec, grid, bump(grid))
        seen = []
        summary = run(
            rain_spec,
            state,
            TransientConfig(t_end=0.1, snapshot_every=0.025),
            callback=lambda s: seen.append(s.t),
        )
        times = [t for t, _ in summary.snapshots]
        np.testing.assert_allclose(times, [0.0, 0.025, 0.05, 0.075, 0.1], atol=1e-12)
        assert seen == times
        assert summary.t_end == pytest.approx(0.1)
        assert summary.max_mass_residual <= 1e-12

    def test_first_order_in_time(self, rain_spec):
        grid = Grid.uniform(64)
        state = initial_state(rain_spec, grid, bump(grid))
        base = stable_dt(rain_spec, state.h_hat, grid)

        def final(dt):
            config = TransientConfig(t_end=0.05, max_dt=dt)
            return run(rain_spec, state, config).final_state.h_hat

        coarse, medium, fine = final(base / 4), final(base / 8), final(base / 16)
        e1 = np.max(np.abs(coarse - medium))
        e2 = np.max(np.abs(medium - fine))
        assert e2 < 0.75 * e1

    def test_discrete_steady_state_does_not_drift(self, rain_spec):
        oracle = solve_fd(rain_spec, FdConfig(n_cells=512))
        state = initial_state(rain_spec, oracle.grid, oracle.u + rain_spec.H)
        summary = run(rain_spec, state, TransientConfig(t_end=0.1))
        drift = np.max(np.abs(summary.final_state.h_hat - state.h_hat))
        assert drift <= 1e-9

    @pytest.mark.slow
    def test_relaxes_towards_steady_profile(self, rain_spec):
        steady = solve_steady(rain_spec, grid=Grid.uniform(2048))
        grid = Grid.uniform(512)
        state = initial_state(rain_spec, grid, rain_spec.H)
        summary = run(rain_spec, state, TransientConfig(t_end=10.0), steady=steady)
        assert summary.final_sup_distance <= 1e-3
        assert summary.clipped_mass == 0.0
