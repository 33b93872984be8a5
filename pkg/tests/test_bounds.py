"""
Testy hipotezy (HF) i jawnych stałych oszacowań.
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slopeflow.bounds import (
    DerivativeBounds,
    HfVerdict,
    build_bounds_report,
    check_hf,
    derivative_bounds,
    diffusion_floor,
    end_slope_bounds,
    existence_condition,
    hf_objective,
    k_prime,
    no_touch_kappa,
    sup_norm_bound,
)
from slopeflow.core import ProblemSpec, SourceFunction, UnsupportedRegimeError
from slopeflow.linearize import build_diffusion


def spec_with(source, p=3.0, H=1.0, phi=0.3):
    return ProblemSpec(p=p, H=H, phi=phi, source=source)


# ============================================================
# Hipoteza (HF)
# ============================================================


class TestHypothesisHF:
    def test_fast_path_for_nonnegative_source(self, small_spec):
        result = check_hf(small_spec)
        assert result.verdict is HfVerdict.HOLDS
        assert result.min_value == pytest.approx(small_spec.H**small_spec.conj_p)

    @given(amplitude=st.floats(min_value=0.0, max_value=0.5))
    @settings(max_examples=10, deadline=None)
    def test_grid_agrees_with_fast_path(self, amplitude):
        spec = spec_with(SourceFunction.constant(amplitude))
        result = check_hf(spec, resolution=64, use_fast_path=False)
        assert result.holds
        assert result.min_value == pytest.approx(spec.H**spec.conj_p, rel=1e-12)

    def test_strong_evaporation_fails(self):
        spec = spec_with(SourceFunction.constant(-2.0), H=0.1)
        result = check_hf(spec, resolution=64)
        assert result.verdict is HfVerdict.FAILS
        assert result.min_value < 0
        x0, x = result.argmin
        assert -1.0 <= x0 <= x <= 1.0

    def test_mild_sign_change_holds(self, sign_changing_source):
        result = check_hf(spec_with(sign_changing_source), resolution=128)
        assert result.holds

    def test_refinement_never_raises_minimum(self, sign_changing_source):
        spec = spec_with(sign_changing_source)
        coarse = check_hf(spec, resolution=64, refine=False)
        refined = check_hf(spec, resolution=64, refine=True)
        assert refined.min_value <= coarse.min_value

    def test_objective_at_right_end_is_head_term(self, sign_changing_source):
        spec = spec_with(sign_changing_source, H=2.0)
        assert hf_objective(spec, -0.3, 1.0) == pytest.approx(2.0**1.5)

    def test_resolution_floor(self, small_spec):
        with pytest.raises(ValueError):
            check_hf(small_spec, resolution=32)


# ============================================================
# Stałe jawne
# ============================================================


class TestExplicitConstants:
    def test_sup_norm_bound(self, small_spec):
        assert sup_norm_bound(small_spec) == pytest.approx(0.04 / math.sin(0.3) ** 2)

    def test_existence_condition_is_strict(self):
        lam = math.sin(0.3) ** 2
        at_threshold = spec_with(SourceFunction.constant(0.5 * lam))
        below = spec_with(SourceFunction.constant(0.49 * lam))
        assert not existence_condition(at_threshold)
        assert existence_condition(below)

    def test_k_prime_sign(self, small_spec):
        assert k_prime(small_spec) > 0
        assert k_prime(small_spec, beta=small_spec.H * small_spec.lam) == pytest.approx(
            0.0, abs=1e-15
        )
        assert k_prime(small_spec, beta=2.0 * small_spec.H * small_spec.lam) < 0

    def test_diffusion_floor_kinds(self, small_spec, sign_changing_source):
        slope = math.sin(0.3) * math.cos(0.3)
        assert diffusion_floor(small_spec) == pytest.approx(0.5 * slope)
        mixed = spec_with(sign_changing_source)
        assert diffusion_floor(mixed) == pytest.approx(k_prime(mixed, mixed.source_l1))

    def test_diffusion_floor_requires_linear_regime(self):
        with pytest.raises(UnsupportedRegimeError):
            diffusion_floor(spec_with(SourceFunction.constant(0.01), p=2.0))

    def test_negative_end_slope_bound_is_double(self, small_spec):
        pos, neg = end_slope_bounds(small_spec)
        assert neg == pytest.approx(2.0 * pos)

    def test_no_touch_kappa(self, sign_changing_source):
        spec = spec_with(sign_changing_source)
        assert no_touch_kappa(spec, 0.0) == pytest.approx(-0.04)

    def test_respected_tolerates_round_off(self):
        bounds = DerivativeBounds(
            end_bound=0.0,
            uniform_bound=0.0,
            profile_bound=0.0,
            uniform_source="K_prime",
        )
        assert bounds.respected(1e-17, 1e-17)
        assert not bounds.respected(1e-6, 0.0)


class TestBoundsOnProfile:
    def test_computed_profile_respects_bounds(self, small_spec, small_profile):
        diffusion = build_diffusion(small_spec, small_profile)
        bounds = derivative_bounds(small_spec, small_profile, float(diffusion.D[-1]))
        assert bounds.uniform_source == "K_prime"
        assert bounds.respected(small_profile.s_end, small_profile.du_sup_norm)
        assert small_profile.sup_norm <= sup_norm_bound(small_spec)

    def test_report(self, small_spec, small_profile):
        diffusion = build_diffusion(small_spec, small_profile)
        report = build_bounds_report(
            small_spec, 64, small_profile, float(diffusion.D[-1])
        )
        data = report.to_json()
        assert data["hf_holds"] is True
        assert data["existence_ok"] is True
        assert data["du_uniform_bound"] is not None
        assert isinstance(data["hf_argmin"], list)

    def test_report_without_linearization(self):
        spec = spec_with(SourceFunction.constant(0.02), p=1.8)
        report = build_bounds_report(spec, 64)
        assert report.K_prime is None
        assert report.du_end_bound_pos is None
        assert report.du_uniform_bound is None
