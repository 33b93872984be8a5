"""
Solver problemu ustalonego metodą strzałów.

Redukcja do równania pierwszego rzędu:
    (u + H) Φ_p(u' cos φ + sin φ) = κ + ∫_x^1 f,   κ = H Φ_p(u'(1) cos φ + sin φ)
daje jawny wzór na pochodną
    u' = Φ_{p'}((κ + F(x)) / (u + H)) / cos φ - tg φ,
całkowany wstecz od (x = 1, u = 0) klasyczną metodą RK4. Parametr strzału
s = u'(1) dobierany jest tak, aby u(-1) = 0.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.optimize import bisect

from .bounds import existence_condition
from .core import (
    Grid,
    InfeasibleError,
    NoBracketError,
    ProblemSpec,
    SolutionProfile,
    ToleranceError,
    phi_pow,
    truncate,
)

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ShooterConfig:
    """
    Ustawienia metody strzałów.

    Args:
        bracket_init: Początkowy przedział dla s = u'(1)
        max_expansions: Ile razy wolno podwoić przedział
        root_tol: Dopuszczalne |u(-1)| w rozwiązaniu
        ode_steps: Liczba kroków RK4 (None = komórki siatki)
        head_guard: Minimalne dopuszczalne u + H (None = 1e-9 H)
        scan_points: Liczba próbek s przy szukaniu wielu pierwiastków
        bisection_xtol: Tolerancja bisekcji w s
    """

    bracket_init: tuple = (-1.0, 1.0)
    max_expansions: int = 20
    root_tol: float = 1e-9
    ode_steps: Optional[int] = None
    head_guard: Optional[float] = None
    scan_points: int = 17
    bisection_xtol: float = 1e-12

    def __post_init__(self):
        lo, hi = self.bracket_init
        if not hi > lo:
            raise ValueError(f"Zły przedział początkowy strzału: {self.bracket_init}")
        if not self.root_tol > 0:
            raise ValueError("root_tol musi być > 0")
        if self.head_guard is not None and not self.head_guard > 0:
            raise ValueError("head_guard musi być > 0")
        if self.scan_points < 2:
            raise ValueError("scan_points musi być >= 2")

    def guard_for(self, spec: ProblemSpec) -> float:
        return 1e-9 * spec.H if self.head_guard is None else self.head_guard


@dataclass(frozen=True, eq=False)
class ShotResult:
    """Trajektoria jednego strzału."""

    s: float
    kappa: float
    u: np.ndarray
    du: np.ndarray
    endpoint: float
    feasible: bool


def shot_kappa(spec: ProblemSpec, s: float) -> float:
    """κ = H Φ_p(s cos φ + sin φ)."""
    return spec.H * phi_pow(spec.p, s * math.cos(spec.phi) + math.sin(spec.phi))


def integrate_profile(
    spec: ProblemSpec,
    s: float,
    grid: Grid,
    head_guard: Optional[float] = None,
) -> ShotResult:
    """
    Całkuje trajektorię wstecz od x = 1 dla próbnego s = u'(1).

    Niedopuszczalność (u + H <= head_guard na którymkolwiek etapie) jest
    zwracana flagą, a wartość końca ustawiana jest na -H.
    """
    if not math.isfinite(s):
        raise ValueError(f"Parametr strzału musi być skończony: {s}")
    guard = 1e-9 * spec.H if head_guard is None else head_guard
    f = spec.steady_source
    x = grid.nodes
    F_nodes = f.tail(x)
    F_mid = f.tail(0.5 * (x[:-1] + x[1:]))

    H = spec.H
    expo = 1.0 / (spec.p - 1.0)
    inv_cos = 1.0 / math.cos(spec.phi)
    tan_phi = math.tan(spec.phi)
    kappa = shot_kappa(spec, s)

    def rhs(F: float, u: float) -> float:
        z = (kappa + F) / (u + H)
        return inv_cos * math.copysign(abs(z) ** expo, z) - tan_phi

    n = len(x)
    u = np.zeros(n)
    du = np.zeros(n)
    du[-1] = rhs(F_nodes[-1], 0.0)
    ui = 0.0
    for i in range(n - 2, -1, -1):
        h = x[i] - x[i + 1]
        k1 = rhs(F_nodes[i + 1], ui)
        u2 = ui + 0.5 * h * k1
        if u2 + H <= guard:
            return ShotResult(s, kappa, u, du, -H, False)
        k2 = rhs(F_mid[i], u2)
        u3 = ui + 0.5 * h * k2
        if u3 + H <= guard:
            return ShotResult(s, kappa, u, du, -H, False)
        k3 = rhs(F_mid[i], u3)
        u4 = ui + h * k3
        if u4 + H <= guard:
            return ShotResult(s, kappa, u, du, -H, False)
        k4 = rhs(F_nodes[i], u4)
        ui = ui + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if ui + H <= guard or not math.isfinite(ui):
            return ShotResult(s, kappa, u, du, -H, False)
        u[i] = ui
        du[i] = rhs(F_nodes[i], ui)
    return ShotResult(s, kappa, u, du, float(u[0]), True)


def first_order_residual(
    spec: ProblemSpec, profile: SolutionProfile, k: Optional[float] = None
) -> float:
    """
    max_i |(u_i + H) Φ_p(u'_i cos φ + sin φ) - κ - ∫_{x_i}^1 f|.

    Z k podanym czynnik (u + H) zastępowany jest przez (T_k(u) + H).
    """
    u = profile.u if k is None else truncate(profile.u, k)
    F = spec.steady_source.tail(profile.grid.nodes)
    flux = (u + spec.H) * phi_pow(
        spec.p, profile.du * math.cos(spec.phi) + math.sin(spec.phi)
    )
    return float(np.max(np.abs(flux - profile.kappa - F)))


def truncated_first_order_residual(
    spec: ProblemSpec, profile: SolutionProfile, k: float
) -> float:
    return first_order_residual(spec, profile, k=k)


def _endpoint_function(spec: ProblemSpec, grid: Grid, guard: float):
    cache = {}

    def endpoint(s: float) -> float:
        if s not in cache:
            cache[s] = integrate_profile(spec, s, grid, guard)
        return cache[s].endpoint

    return endpoint, cache


def _expand_bracket(endpoint, config: ShooterConfig, cache) -> tuple:
    lo, hi = (float(v) for v in config.bracket_init)
    e_lo, e_hi = endpoint(lo), endpoint(hi)
    expansions = 0
    while np.sign(e_lo) == np.sign(e_hi) and e_lo != 0.0:
        if expansions >= config.max_expansions:
            if not any(shot.feasible for shot in cache.values()):
                raise InfeasibleError(
                    "Każdy próbny strzał spycha u + H poniżej strażnika"
                )
            raise NoBracketError(
                f"Brak zmiany znaku u(-1) w przedziale [{lo:.4g}, {hi:.4g}] "
                f"po {expansions} rozszerzeniach"
            )
        center, half = 0.5 * (lo + hi), hi - lo
        lo, hi = center - half, center + half
        e_lo, e_hi = endpoint(lo), endpoint(hi)
        expansions += 1
    return lo, hi


def find_roots(spec: ProblemSpec, grid: Grid, config: ShooterConfig) -> list:
    """Wszystkie pierwiastki u(-1) = 0 znalezione w przeglądzie przedziału."""
    guard = config.guard_for(spec)
    endpoint, cache = _endpoint_function(spec, grid, guard)
    lo, hi = _expand_bracket(endpoint, config, cache)

    samples = np.linspace(lo, hi, config.scan_points)
    values = [endpoint(float(s)) for s in samples]
    roots = []
    for k, (s, e) in enumerate(zip(samples, values)):
        if e == 0.0 and cache[float(s)].feasible:
            roots.append(float(s))
            continue
        if k + 1 < len(samples):
            e_next = values[k + 1]
            if e != 0.0 and e_next != 0.0 and np.sign(e) != np.sign(e_next):
                try:
                    root = bisect(
                        endpoint,
                        float(s),
                        float(samples[k + 1]),
                        xtol=config.bisection_xtol,
                        maxiter=200,
                    )
                except RuntimeError as exc:
                    raise ToleranceError(f"Bisekcja nie zbiegła się: {exc}") from exc
                roots.append(_secant_polish(endpoint, cache, root))
    if not roots:
        raise NoBracketError("Przegląd przedziału nie znalazł zmiany znaku u(-1)")
    return roots


def _secant_polish(endpoint, cache, root: float) -> float:
    delta = 1e-8 * max(1.0, abs(root))
    e0, e1 = endpoint(root), endpoint(root - delta)
    if not (cache[root].feasible and cache[root - delta].feasible) or e0 == e1:
        return root
    candidate = root - e0 * delta / (e0 - e1)
    e_new = endpoint(candidate)
    if cache[candidate].feasible and abs(e_new) < abs(e0):
        return candidate
    return root


def solve_steady(
    spec: ProblemSpec,
    config: Optional[ShooterConfig] = None,
    grid: Optional[Grid] = None,
) -> SolutionProfile:
    """
    Rozwiązuje problem ustalony metodą strzałów na s = u'(1).

    Args:
        spec: Specyfikacja problemu
        config: Ustawienia strzału
        grid: Siatka (domyślnie równomierna, ode_steps lub 2048 komórek)

    Returns:
        SolutionProfile z rezyduum tożsamości pierwszego rzędu
    """
    config = config or ShooterConfig()
    if grid is None:
        grid = Grid.uniform(config.ode_steps or 2048)

    if not existence_condition(spec):
        logger.warning(
            "⚠️ Warunek istnienia ‖f‖₁ < H (sin φ)^(p-1) nie jest spełniony - "
            "próbuję mimo to"
        )

    roots = find_roots(spec, grid, config)
    primary = min(roots, key=abs)
    if len(roots) > 1:
        logger.warning(
            f"⚠️ Znaleziono {len(roots)} pierwiastki strzału: "
            + ", ".join(f"{r:.10g}" for r in roots)
        )

    shot = integrate_profile(spec, primary, grid, config.guard_for(spec))
    if not shot.feasible:
        raise InfeasibleError(f"Strzał s = {primary:.6g} jest niedopuszczalny")
    if abs(shot.endpoint) > config.root_tol:
        raise ToleranceError(
            f"|u(-1)| = {abs(shot.endpoint):.3e} > root_tol = {config.root_tol:.1e}"
        )

    profile = SolutionProfile(
        grid=grid,
        u=shot.u,
        du=shot.du,
        s_end=primary,
        kappa=shot.kappa,
        residual_first_order=0.0,
        min_head=float(np.min(shot.u + spec.H)),
        method="shooting",
        roots=tuple(roots),
    )
    residual = first_order_residual(spec, profile)
    threshold = 1e-8 * (1.0 + spec.source_l1)
    if residual > threshold:
        logger.warning(f"⚠️ Rezyduum pierwszego rzędu {residual:.3e} > {threshold:.1e}")
    logger.info(
        f"✅ Strzał: s* = {primary:.12g}, κ = {shot.kappa:.12g}, "
        f"‖u‖∞ = {profile.sup_norm:.6g}, rezyduum = {residual:.2e}"
    )
    return replace(profile, residual_first_order=residual)
