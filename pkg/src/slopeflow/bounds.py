"""
Hipoteza (HF) i jawne stałe oszacowań a priori.

Moduł sprawdza warunek dodatniości całkowej na f, który gwarantuje, że
zwierciadło wody nie dotyka dna (u > -H), oraz liczy wszystkie jawne
ograniczenia: normę sup, warunek istnienia, dolne ograniczenia D(x) i
ograniczenia pochodnej u'.
"""

import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from .core import ProblemSpec, SolutionProfile, phi_pow, require_linear_regime

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

# Pasmo, w którym znak minimum (HF) nie jest rozstrzygalny
HF_BAND = 1e-10
MIN_HF_RESOLUTION = 64


class HfVerdict(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class HfResult:
    verdict: HfVerdict
    min_value: float
    argmin: tuple

    @property
    def holds(self) -> bool:
        return self.verdict is HfVerdict.HOLDS


def _hf_constant(spec: ProblemSpec) -> float:
    return spec.p / ((spec.p - 1.0) * math.cos(spec.phi))


def hf_objective(spec: ProblemSpec, x0: float, x: float) -> float:
    """Wyrażenie (HF) w punkcie (x0, x) z całką zewnętrzną adaptacyjnie."""
    f = spec.steady_source
    conj = spec.conj_p
    F0 = f.tail(x0)
    breaks = [b for b in f.breakpoints if x < b < 1.0]

    def integrand(tau: float) -> float:
        return phi_pow(conj, F0 - f.tail(tau))

    outer = 0.0
    if x < 1.0:
        outer, _ = quad(integrand, x, 1.0, points=breaks or None, limit=200)
    return spec.H**conj + _hf_constant(spec) * outer


def _verdict(value: float) -> HfVerdict:
    if abs(value) <= HF_BAND:
        return HfVerdict.INDETERMINATE
    return HfVerdict.HOLDS if value > 0 else HfVerdict.FAILS


def check_hf(
    spec: ProblemSpec,
    resolution: int = 512,
    use_fast_path: bool = True,
    refine: bool = True,
) -> HfResult:
    """
    Sprawdza hipotezę (HF).

    Minimum po x0 ∈ [-1, 1], x ∈ [x0, 1] z
    H^{p'} + p/((p-1) cos φ) ∫_x^1 Φ_{p'}(∫_{x0}^τ f) dτ
    liczone na siatce tensorowej (całka wewnętrzna dokładna, zewnętrzna
    trapezami), a potem doprecyzowane złotym podziałem wokół argmin.

    Args:
        spec: Specyfikacja problemu
        resolution: Liczba komórek siatki (>= 64)
        use_fast_path: Dla f >= 0 zwróć wynik bez siatki
        refine: Doprecyzuj minimum metodą złotego podziału

    Returns:
        HfResult z werdyktem, wartością minimum i parą (x0, x)
    """
    if resolution < MIN_HF_RESOLUTION:
        raise ValueError(
            f"Rozdzielczość (HF) musi być >= {MIN_HF_RESOLUTION}, "
            f"otrzymano {resolution}"
        )
    f = spec.steady_source
    head = spec.H**spec.conj_p

    if use_fast_path and f.is_nonnegative():
        return HfResult(HfVerdict.HOLDS, head, (1.0, 1.0))

    x = np.linspace(-1.0, 1.0, resolution + 1)
    h = np.diff(x)
    F = f.tail(x)
    # wiersze: x0 = x_i, kolumny: τ = x_j
    inner = phi_pow(spec.conj_p, F[:, None] - F[None, :])
    cells = 0.5 * (inner[:, :-1] + inner[:, 1:]) * h[None, :]
    outer = np.zeros_like(inner)
    outer[:, :-1] = np.cumsum(cells[:, ::-1], axis=1)[:, ::-1]
    objective = head + _hf_constant(spec) * outer
    objective[np.tril_indices(len(x), k=-1)] = np.inf

    i, j = np.unravel_index(int(np.argmin(objective)), objective.shape)
    best = float(objective[i, j])
    x0_best, x_best = float(x[i]), float(x[j])

    if refine:
        step = float(np.max(h))
        x0_cur, x_cur, val_cur = x0_best, x_best, hf_objective(spec, x0_best, x_best)
        for _ in range(2):
            lo, hi = max(x0_cur, x_cur - step), min(1.0, x_cur + step)
            if hi > lo:
                res = minimize_scalar(
                    lambda t: hf_objective(spec, x0_cur, t),
                    bounds=(lo, hi),
                    method="bounded",
                    options={"xatol": 1e-10},
                )
                if res.fun < val_cur:
                    x_cur, val_cur = float(res.x), float(res.fun)
            lo, hi = max(-1.0, x0_cur - step), min(x_cur, x0_cur + step)
            if hi > lo:
                res = minimize_scalar(
                    lambda t: hf_objective(spec, t, x_cur),
                    bounds=(lo, hi),
                    method="bounded",
                    options={"xatol": 1e-10},
                )
                if res.fun < val_cur:
                    x0_cur, val_cur = float(res.x), float(res.fun)
        if val_cur < best:
            best, x0_best, x_best = val_cur, x0_cur, x_cur

    verdict = _verdict(best)
    if verdict is not HfVerdict.HOLDS:
        logger.warning(
            f"⚠️ Hipoteza (HF): {verdict.value}, min = {best:.3e} "
            f"w (x0, x) = ({x0_best:.4f}, {x_best:.4f})"
        )
    return HfResult(verdict, best, (x0_best, x_best))


# ============================================================
# Jawne stałe
# ============================================================


def sup_norm_bound(spec: ProblemSpec) -> float:
    """‖u‖∞ <= ‖f‖₁ / (sin φ)^{p-1}."""
    return spec.source_l1 / spec.lam


def existence_condition(spec: ProblemSpec) -> bool:
    """‖f‖₁ < H (sin φ)^{p-1} (ostro)."""
    return spec.source_l1 < spec.H * spec.lam


def _slope_factor(spec: ProblemSpec) -> float:
    # (sin φ)^{p-2} cos φ
    return math.sin(spec.phi) ** (spec.p - 2.0) * math.cos(spec.phi)


def k_prime(spec: ProblemSpec, beta: Optional[float] = None) -> float:
    """K'(β) = ½ (H - β/(sin φ)^{p-1}) (sin φ)^{p-2} cos φ; może być <= 0."""
    beta = spec.margin_beta if beta is None else beta
    return 0.5 * (spec.H - beta / spec.lam) * _slope_factor(spec)


def c_prime(spec: ProblemSpec, beta: Optional[float] = None) -> float:
    """Stała C' ograniczająca D(1)."""
    beta = spec.margin_beta if beta is None else beta
    p, phi = spec.p, spec.phi
    growth = max(1.0, 2.0 ** (p - 1.0))
    return (p - 1.0) * spec.H * growth * math.cos(phi) * math.sin(phi) ** (
        p - 2.0
    ) + 2.0 * growth * math.cos(phi) ** (p - 2.0) * math.sin(phi) ** (2.0 - p) * beta


def diffusion_floor(spec: ProblemSpec) -> float:
    """
    Dolne ograniczenie D(x).

    Dla f >= 0: ½ H (sin φ)^{p-2} cos φ, w przeciwnym razie K' przy β = ‖f‖₁.
    """
    require_linear_regime(spec.p)
    if spec.steady_source.is_nonnegative():
        return 0.5 * spec.H * _slope_factor(spec)
    if not existence_condition(spec):
        raise ValueError(
            "Dolne ograniczenie K' wymaga ‖f‖₁ < H (sin φ)^{p-1} albo f >= 0"
        )
    return k_prime(spec, spec.source_l1)


def end_slope_bounds(spec: ProblemSpec) -> tuple:
    """Ograniczenia |u'(1)|: (dla u'(1) >= 0, dla u'(1) < 0)."""
    pos = spec.source_l1 / (spec.H * _slope_factor(spec))
    return pos, 2.0 * pos


def profile_derivative_bound(
    spec: ProblemSpec, profile: SolutionProfile, D_end: float
) -> float:
    """Ograniczenie ‖u'‖∞ z K = ½ min(u + H) (sin φ)^{p-2} cos φ i zmierzonym D(1)."""
    require_linear_regime(spec.p)
    K = 0.5 * profile.min_head * _slope_factor(spec)
    ratio = D_end / (spec.H * _slope_factor(spec))
    if profile.s_end >= 0:
        return (2.0 + ratio) * spec.source_l1 / K
    return 2.0 * (1.0 + ratio) * spec.source_l1 / K


@dataclass(frozen=True)
class DerivativeBounds:
    end_bound: float
    uniform_bound: float
    profile_bound: float
    uniform_source: str

    def respected(self, s_end: float, du_sup: float, tol: float = 1e-12) -> bool:
        """Czy zmierzone |u'(1)| i ‖u'‖∞ mieszczą się w ograniczeniach."""
        return abs(s_end) <= self.end_bound * (1.0 + tol) + tol and du_sup <= (
            self.uniform_bound * (1.0 + tol) + tol
        )


def derivative_bounds(
    spec: ProblemSpec, profile: SolutionProfile, D_end: float
) -> DerivativeBounds:
    """
    Ograniczenia |u'(1)| oraz ‖u'‖∞.

    Ograniczenie jednostajne pochodzi z K'(β) i C'(β), gdy β leży poniżej
    progu istnienia; w przeciwnym razie z dolnego ograniczenia profilu.
    """
    require_linear_regime(spec.p)
    pos, neg = end_slope_bounds(spec)
    end_bound = pos if profile.s_end >= 0 else neg
    profile_bound = profile_derivative_bound(spec, profile, D_end)

    beta = spec.margin_beta
    kp = k_prime(spec, beta)
    if kp > 0:
        denom = spec.H * _slope_factor(spec)
        uniform = 2.0 / kp * (1.0 + c_prime(spec, beta) / denom) * spec.source_l1
        source = "K_prime"
    else:
        uniform = profile_bound
        source = "profile"
    return DerivativeBounds(end_bound, uniform, profile_bound, source)


def no_touch_kappa(spec: ProblemSpec, x0: float) -> float:
    """Wartość κ, przy której zwierciadło dotknęłoby dna w x0: κ = -∫_{x0}^1 f."""
    return -float(spec.steady_source.tail(x0))


# ============================================================
# Raport
# ============================================================


@dataclass(frozen=True)
class BoundsReport:
    hf_holds: bool
    hf_verdict: str
    hf_min_value: float
    hf_argmin: tuple
    sup_bound: float
    existence_ok: bool
    margin_beta: float
    K_prime: Optional[float]
    du_end_bound_pos: Optional[float]
    du_end_bound_neg: Optional[float]
    du_uniform_bound: Optional[float]
    source_l1: float

    def to_json(self) -> dict:
        data = asdict(self)
        data["hf_argmin"] = list(self.hf_argmin)
        return data


def build_bounds_report(
    spec: ProblemSpec,
    resolution: int = 512,
    profile: Optional[SolutionProfile] = None,
    D_end: Optional[float] = None,
) -> BoundsReport:
    """Składa BoundsReport; pola pochodnej tylko dla p > 2."""
    hf = check_hf(spec, resolution)
    existence_ok = existence_condition(spec)
    if not existence_ok:
        logger.warning(
            f"⚠️ Warunek istnienia niespełniony: ‖f‖₁ = {spec.source_l1:.4g} "
            f">= H (sin φ)^(p-1) = {spec.H * spec.lam:.4g}"
        )

    kp = pos = neg = uniform = None
    if spec.p > 2:
        kp = k_prime(spec, spec.source_l1)
        pos, neg = end_slope_bounds(spec)
        if profile is not None and D_end is not None:
            uniform = derivative_bounds(spec, profile, D_end).uniform_bound

    return BoundsReport(
        hf_holds=hf.holds,
        hf_verdict=hf.verdict.value,
        hf_min_value=hf.min_value,
        hf_argmin=hf.argmin,
        sup_bound=sup_norm_bound(spec),
        existence_ok=existence_ok,
        margin_beta=spec.margin_beta,
        K_prime=kp,
        du_end_bound_pos=pos,
        du_end_bound_neg=neg,
        du_uniform_bound=uniform,
        source_l1=spec.source_l1,
    )
