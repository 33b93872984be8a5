"""
Niezależny solver referencyjny: tłumiony Newton dla postaci słabej.

Elementy liniowe kawałkami na siatce równomiernej, strumień nieliniowy w
środku komórki, jakobian z różnic centralnych (trójdiagonalny, kolorowanie
co trzeci węzeł), kontynuacja po amplitudzie źródła od rozwiązania zerowego.
Solver nie korzysta z redukcji pierwszego rzędu, więc może ją weryfikować.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import LinAlgError, solve_banded

from .core import (
    Grid,
    JacobianSingularError,
    NewtonDivergedError,
    ProblemSpec,
    SolutionProfile,
    phi_pow,
    truncate,
)
from .steady import first_order_residual

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FdConfig:
    """
    Ustawienia solvera różnicowego.

    Args:
        n_cells: Liczba komórek (>= 16)
        newton_tol: Tolerancja kroku Newtona (względna do 1 + ‖u‖∞)
        max_iters: Maksymalna liczba iteracji na poziom kontynuacji
        damping_min: Najmniejszy dopuszczalny współczynnik tłumienia
        continuation_steps: Liczba poziomów homotopii w amplitudzie f
        jacobian_step: Względny krok różnic centralnych
        residual_tol: Próg zatrzymania dla ‖R‖∞
        armijo: Stała warunku Armijo dla funkcji celu ½‖R‖₂²
    """

    n_cells: int = 512
    newton_tol: float = 1e-12
    max_iters: int = 50
    damping_min: float = 1.0 / 1024.0
    continuation_steps: int = 4
    jacobian_step: float = 1e-7
    residual_tol: float = 1e-14
    armijo: float = 1e-4

    def __post_init__(self):
        if self.n_cells < 16:
            raise ValueError(f"n_cells musi być >= 16, otrzymano {self.n_cells}")
        if not 0.0 < self.damping_min <= 1.0:
            raise ValueError(f"damping_min musi leżeć w (0, 1]: {self.damping_min}")
        if self.continuation_steps < 1:
            raise ValueError("continuation_steps musi być >= 1")
        if not 0.0 < self.armijo < 0.5:
            raise ValueError(f"armijo musi leżeć w (0, 0.5): {self.armijo}")


class WeakResidual:
    """Rezyduum postaci słabej w węzłach wewnętrznych."""

    def __init__(self, spec: ProblemSpec, grid: Grid, k: Optional[float] = None):
        self.spec = spec
        self.h = float(grid.spacing[0])
        self.moments = spec.steady_source.hat_moments(grid.nodes)[1:-1]
        self.k = k
        self.cos_phi = math.cos(spec.phi)
        self.sin_phi = math.sin(spec.phi)

    def head(self, u_full: np.ndarray) -> np.ndarray:
        mid = 0.5 * (u_full[:-1] + u_full[1:])
        if self.k is not None:
            mid = truncate(mid, self.k)
        return self.spec.H + mid

    def __call__(self, interior: np.ndarray, scale: float) -> np.ndarray:
        u_full = np.concatenate([[0.0], interior, [0.0]])
        slope = np.diff(u_full) / self.h
        flux = self.head(u_full) * phi_pow(
            self.spec.p, slope * self.cos_phi + self.sin_phi
        )
        return flux[:-1] - flux[1:] - scale * self.moments


def _merit(R: np.ndarray) -> float:
    return 0.5 * float(np.linalg.norm(R)) ** 2


def _banded_jacobian(
    residual: WeakResidual, interior: np.ndarray, scale: float, rel_step: float
) -> np.ndarray:
    m = len(interior)
    ab = np.zeros((3, m))
    delta = rel_step * np.maximum(1.0, np.abs(interior))
    idx = np.arange(m)
    for color in range(3):
        cols = idx[idx % 3 == color]
        bump = np.zeros(m)
        bump[cols] = delta[cols]
        diff = residual(interior + bump, scale) - residual(interior - bump, scale)
        inv = 1.0 / (2.0 * delta[cols])
        ab[1, cols] = diff[cols] * inv
        up = cols >= 1
        ab[0, cols[up]] = diff[cols[up] - 1] * inv[up]
        down = cols <= m - 2
        ab[2, cols[down]] = diff[cols[down] + 1] * inv[down]
    return ab


def solve_fd(
    spec: ProblemSpec,
    config: Optional[FdConfig] = None,
    truncated: bool = False,
    k: Optional[float] = None,
) -> SolutionProfile:
    """
    Rozwiązuje postać słabą tłumionym Newtonem z kontynuacją.

    Args:
        spec: Specyfikacja problemu
        config: Ustawienia solvera
        truncated: Czy zastąpić u w czynniku (u + H) przez T_k(u)
        k: Poziom obcięcia (domyślnie ‖f‖₁ / (sin φ)^{p-1})

    Returns:
        SolutionProfile z pochodną z różnic (drugi rząd) i rezyduum
    """
    config = config or FdConfig()
    if truncated:
        k = spec.source_l1 / spec.lam if k is None else k
        if k < 0:
            raise ValueError(f"Poziom obcięcia k musi być >= 0, otrzymano {k}")
    else:
        k = None

    grid = Grid.uniform(config.n_cells)
    residual = WeakResidual(spec, grid, k)
    interior = np.zeros(config.n_cells - 1)
    total_iters = 0

    levels = config.continuation_steps
    for level in range(1, levels + 1):
        scale = level / levels
        R = residual(interior, scale)
        merit = _merit(R)
        for _ in range(config.max_iters):
            if float(np.max(np.abs(R))) <= config.residual_tol:
                break
            ab = _banded_jacobian(residual, interior, scale, config.jacobian_step)
            try:
                step = solve_banded((1, 1), ab, -R)
            except (LinAlgError, ValueError) as exc:
                raise JacobianSingularError(
                    f"Osobliwy jakobian na poziomie kontynuacji {level}/{levels}",
                    level=level,
                ) from exc
            if not np.all(np.isfinite(step)):
                raise JacobianSingularError(
                    f"Niezdefiniowany krok Newtona na poziomie {level}/{levels}",
                    level=level,
                )
            total_iters += 1
            step_tol = config.newton_tol * (1.0 + float(np.max(np.abs(interior))))

            # Kierunek Newtona: pochodna ½‖R‖₂² wzdłuż kroku wynosi -‖R‖₂²
            damping = 1.0
            accepted = False
            while damping >= config.damping_min:
                trial = interior + damping * step
                if np.min(trial) + spec.H > 0.0:
                    R_trial = residual(trial, scale)
                    trial_merit = _merit(R_trial)
                    if trial_merit <= (1.0 - 2.0 * config.armijo * damping) * merit:
                        interior, R, merit = trial, R_trial, trial_merit
                        accepted = True
                        break
                damping *= 0.5

            if float(np.max(np.abs(step))) <= step_tol:
                break
            if not accepted:
                raise NewtonDivergedError(
                    f"Tłumienie spadło poniżej {config.damping_min} "
                    f"na poziomie {level}/{levels} "
                    f"(‖R‖∞ = {float(np.max(np.abs(R))):.3e})",
                    level=level,
                )
        else:
            raise NewtonDivergedError(
                f"Brak zbieżności po {config.max_iters} iteracjach "
                f"na poziomie {level}/{levels}",
                level=level,
            )

    u = np.concatenate([[0.0], interior, [0.0]])
    du = np.gradient(u, grid.nodes, edge_order=2)
    s_end = float(du[-1])
    kappa = spec.H * phi_pow(spec.p, s_end * math.cos(spec.phi) + math.sin(spec.phi))
    profile = SolutionProfile(
        grid=grid,
        u=u,
        du=du,
        s_end=s_end,
        kappa=kappa,
        residual_first_order=0.0,
        min_head=float(np.min(u + spec.H)),
        method="fd-truncated" if truncated else "fd",
        iterations=total_iters,
    )
    residual_value = first_order_residual(spec, profile, k=k)
    logger.info(
        f"📊 Newton FD: n = {config.n_cells}, iteracje = {total_iters}, "
        f"‖u‖∞ = {profile.sup_norm:.6g}, rezyduum I rzędu = {residual_value:.2e}"
    )
    return replace(profile, residual_first_order=residual_value)


def compare_profiles(a: SolutionProfile, b: SolutionProfile) -> tuple:
    """
    Odległości (sup, L²) wartości u.

    Przy różnych siatkach profil rzadszy interpolowany jest liniowo na gęstszą.
    """
    for profile in (a, b):
        if len(profile.u) != len(profile.grid.nodes):
            raise ValueError("Profil niezgodny z własną siatką")
    xa, xb = a.grid.nodes, b.grid.nodes
    if xa[0] != xb[0] or xa[-1] != xb[-1]:
        raise ValueError("Profile określone na różnych dziedzinach")
    if len(xa) == len(xb) and np.array_equal(xa, xb):
        x, diff = xa, a.u - b.u
    elif len(xa) >= len(xb):
        x, diff = xa, a.u - np.interp(xa, xb, b.u)
    else:
        x, diff = xb, np.interp(xb, xa, a.u) - b.u
    sup = float(np.max(np.abs(diff)))
    l2 = float(math.sqrt(trapezoid(diff**2, x)))
    return sup, l2
