"""
Linearyzacja w obliczonym rozwiązaniu (tylko p > 2).

    D(x) = (u + H) (p - 1) ∫_0^1 |sin φ + θ u' cos φ|^{p-2} dθ · cos φ

Rozwiązanie u jest wtedy także słabym rozwiązaniem problemu liniowego
-(D u')' - (sin φ)^{p-1} u' = f z zerowymi warunkami brzegowymi.
"""

import logging
import math

import numpy as np
from scipy.integrate import quad

from .bounds import existence_condition, k_prime
from .core import (
    DiffusionProfile,
    ProblemSpec,
    SolutionProfile,
    require_linear_regime,
    theta_integral,
)

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def select_floor(spec: ProblemSpec, min_head: float) -> tuple:
    """Najsilniejsze dostępne dolne ograniczenie D: (wartość, rodzaj)."""
    slope = math.sin(spec.phi) ** (spec.p - 2.0) * math.cos(spec.phi)
    if spec.steady_source.is_nonnegative():
        return 0.5 * spec.H * slope, "f_nonnegative"
    if existence_condition(spec):
        return k_prime(spec, spec.source_l1), "K_prime"
    return 0.5 * min_head * slope, "K"


def diffusion_values(spec: ProblemSpec, u: np.ndarray, du: np.ndarray) -> np.ndarray:
    """D w węzłach z całką θ w postaci zamkniętej."""
    cos_phi, sin_phi = math.cos(spec.phi), math.sin(spec.phi)
    return (
        (u + spec.H)
        * (spec.p - 1.0)
        * theta_integral(sin_phi, du * cos_phi, spec.p)
        * cos_phi
    )


def build_diffusion(spec: ProblemSpec, profile: SolutionProfile) -> DiffusionProfile:
    """
    Buduje D(x) z profilu i dołącza najsilniejsze pasujące ograniczenie.

    Kolejność: ograniczenie dla f >= 0, potem K', potem K z min(u + H).
    """
    require_linear_regime(spec.p)
    if not profile.min_head > 0:
        raise ValueError(f"min(u + H) musi być > 0, otrzymano {profile.min_head}")

    D = diffusion_values(spec, profile.u, profile.du)
    floor, kind = select_floor(spec, profile.min_head)
    if float(np.min(D)) < floor:
        logger.warning(
            f"⚠️ min D = {float(np.min(D)):.6g} "
            f"poniżej ograniczenia {kind} = {floor:.6g}"
        )
    else:
        logger.info(f"📊 min D = {float(np.min(D)):.6g} >= {kind} = {floor:.6g}")
    return DiffusionProfile(grid=profile.grid, D=D, floor_used=floor, floor_kind=kind)


def max_adjacent_jump(diffusion: DiffusionProfile) -> float:
    return float(np.max(np.abs(np.diff(diffusion.D))))


def theta_integral_quad(a: float, b: float, p: float) -> float:
    """Referencyjna całka θ kwadraturą adaptacyjną; osobliwość jako punkt podziału."""
    points = None
    if b != 0.0:
        root = -a / b
        if 0.0 < root < 1.0:
            points = [root]
    value, _ = quad(
        lambda t: abs(a + t * b) ** (p - 2.0), 0.0, 1.0, points=points, limit=200
    )
    return float(value)


def lemma_half_bound(a, p: float):
    """(p - 1) ∫_0^1 |1 + θ a|^{p-2} dθ; dla p > 2 nie mniejsze niż ½."""
    require_linear_regime(p)
    return (p - 1.0) * theta_integral(1.0, a, p)


def taylor_remainder_check(a: float, b: float, p: float) -> float:
    """
    Reszta wzoru Taylora rzędu zerowego dla ψ(t) = |t|^{p-2} t:
    |ψ(a) - ψ(b) - (p - 1) ∫_0^1 |b + θ(a - b)|^{p-2} dθ · (a - b)|.

    Dla p <= 2 z osobliwą całką używana jest kwadratura adaptacyjna.
    """
    if p <= 1:
        raise ValueError(f"Wykładnik p musi być > 1, otrzymano {p}")
    lhs = math.copysign(abs(a) ** (p - 1.0), a) - math.copysign(abs(b) ** (p - 1.0), b)
    if a == b:
        return abs(lhs)
    try:
        integral = theta_integral(b, a - b, p)
    except ValueError:
        integral = theta_integral_quad(b, a - b, p)
    if p <= 2 and b * a < 0:
        integral = theta_integral_quad(b, a - b, p)
    return abs(lhs - (p - 1.0) * integral * (a - b))
