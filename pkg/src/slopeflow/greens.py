"""
Funkcja Greena operatora zlinearyzowanego L u = -(D u')' - λ u', λ = (sin φ)^{p-1}.

Wagi wykładnicze:
    E-(s) = exp(-∫_{-1}^s λ/D),   E+(s) = exp(∫_s^1 λ/D)
Funkcja Greena (dla x <= y i gałąź lustrzana dla x > y):
    G(x, y) = (E+(y) - 1) / (E-(y) - E+(y)) · λ^{-1} · (E-(x) - 1)

D traktowane jest jako liniowe kawałkami między węzłami, a całka λ/D po
panelu liczona jest dokładnie dla tej reprezentacji.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import psutil
from scipy.optimize import minimize_scalar

from .core import (
    DiffusionProfile,
    Grid,
    GreensTable,
    ProblemSpec,
    SolutionProfile,
    SourceFunction,
)
from .linearize import build_diffusion

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

# Gęsta macierz G tylko do tej liczby komórek
MAX_DENSE_CELLS = 2048


def _log_ratio(r: np.ndarray) -> np.ndarray:
    # log(1 + r) / r z granicą 1 - r/2 + r²/3 przy małym r
    small = np.abs(r) < 1e-6
    safe = np.where(small, 1.0, r)
    return np.where(small, 1.0 - 0.5 * r + r * r / 3.0, np.log1p(safe) / safe)


def exp_weights(diffusion: DiffusionProfile, lam: float) -> tuple:
    """
    Tablice E- i E+ w węzłach oraz skumulowana całka ∫_{-1}^{x_i} λ/D.

    Returns:
        (E_minus, E_plus, cumulative)
    """
    D = np.asarray(diffusion.D, dtype=float)
    if np.any(D <= 0.0):
        raise ValueError("Współczynnik dyfuzji musi być dodatni we wszystkich węzłach")
    if not lam > 0:
        raise ValueError(f"λ musi być > 0, otrzymano {lam}")
    h = diffusion.grid.spacing
    r = (D[1:] - D[:-1]) / D[:-1]
    panels = lam * h / D[:-1] * _log_ratio(r)
    cumulative = np.concatenate([[0.0], np.cumsum(panels)])
    total = cumulative[-1]
    E_minus = np.exp(-cumulative)
    E_plus = np.exp(total - cumulative)
    return E_minus, E_plus, cumulative


def _check_dense_size(n_cells: int):
    if n_cells > MAX_DENSE_CELLS:
        raise ValueError(
            f"Gęsta macierz G ograniczona do {MAX_DENSE_CELLS} komórek, "
            f"otrzymano {n_cells}"
        )
    needed_gb = 4 * (n_cells + 1) ** 2 * 8 / (1024**3)
    available_gb = psutil.virtual_memory().available / (1024**3)
    logger.info(
        f"📊 Macierz G: {n_cells + 1}², potrzeba ~{needed_gb:.2f} GB, "
        f"dostępny RAM: {available_gb:.1f} GB"
    )
    if needed_gb > available_gb:
        raise MemoryError(
            f"Za mało RAM na macierz G ({needed_gb:.2f} GB > {available_gb:.1f} GB)"
        )


def build_greens(diffusion: DiffusionProfile, lam: float) -> GreensTable:
    """Tablicuje E± i gęstą macierz G(x_i, y_j)."""
    grid = diffusion.grid
    _check_dense_size(grid.n_cells)
    E_minus, E_plus, cumulative = exp_weights(diffusion, lam)

    gap = E_minus - E_plus
    a = (E_plus - 1.0) / gap
    b = (E_minus - 1.0) / gap
    n = len(grid.nodes)
    upper = np.arange(n)[:, None] <= np.arange(n)[None, :]
    G = np.where(
        upper,
        a[None, :] * (E_minus[:, None] - 1.0),
        b[None, :] * (E_plus[:, None] - 1.0),
    ) / lam
    return GreensTable(
        grid=grid,
        E_minus=E_minus,
        E_plus=E_plus,
        G=G,
        lam=lam,
        D=np.asarray(diffusion.D, dtype=float),
        cumulative=cumulative,
    )


def _weights_at(table: GreensTable, x: np.ndarray) -> tuple:
    """E-(x), E+(x), D(x) w dowolnych punktach (dokładnie dla D liniowego)."""
    nodes = table.grid.nodes
    k = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, len(nodes) - 2)
    t = x - nodes[k]
    h = nodes[k + 1] - nodes[k]
    D_k = table.D[k]
    slope = (table.D[k + 1] - D_k) / h
    partial = table.lam * t / D_k * _log_ratio(slope * t / D_k)
    integral = table.cumulative[k] + partial
    E_minus = np.exp(-integral)
    E_plus = np.exp(table.total_integral - integral)
    return E_minus, E_plus, D_k + slope * t


def green_eval(table: GreensTable, x, y):
    """G(x, y) ze wzoru dwugałęziowego; ciągła na przekątnej."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if np.any(np.abs(xa) > 1.0) or np.any(np.abs(ya) > 1.0):
        raise ValueError("Argumenty G muszą leżeć w [-1, 1]")
    Emx, Epx, _ = _weights_at(table, xa)
    Emy, Epy, _ = _weights_at(table, ya)
    gap = Emy - Epy
    value = np.where(
        xa <= ya,
        (Epy - 1.0) / gap * (Emx - 1.0),
        (Emy - 1.0) / gap * (Epx - 1.0),
    ) / table.lam
    if np.ndim(value) == 0:
        return float(value)
    return value


def green_solve(
    table: GreensTable, f: SourceFunction, H: Optional[float] = None
) -> SolutionProfile:
    """
    u(x_i) = ∫ G(x_i, y) f(y) dy.

    G(x_i, ·) interpolowana liniowo między węzłami (załamanie w y = x_i jest
    węzłem), więc całka sprowadza się do dokładnych momentów f na daszkach.
    Stała κ to odpowiednik liniowy D(1) u'(1).
    """
    nodes = table.grid.nodes
    u = table.G @ f.hat_moments(nodes)
    u[0] = 0.0
    u[-1] = 0.0
    du = np.gradient(u, nodes, edge_order=2)
    kappa = float(table.D[-1] * du[-1])
    flux = table.D * du + table.lam * u
    residual = float(np.max(np.abs(flux - kappa - f.tail(nodes))))
    min_head = float("nan") if H is None else float(np.min(u + H))
    return SolutionProfile(
        grid=table.grid,
        u=u,
        du=du,
        s_end=float(du[-1]),
        kappa=kappa,
        residual_first_order=residual,
        min_head=min_head,
        method="green",
    )


def positivity_scan(table: GreensTable) -> tuple:
    """Minimum G po parach węzłów wewnętrznych i jego położenie (x, y)."""
    inner = table.G[1:-1, 1:-1]
    if inner.size == 0:
        raise ValueError("Siatka bez węzłów wewnętrznych")
    i, j = np.unravel_index(int(np.argmin(inner)), inner.shape)
    nodes = table.grid.nodes
    return float(inner[i, j]), (float(nodes[i + 1]), float(nodes[j + 1]))


def gap_lower_bound(table: GreensTable) -> tuple:
    """(min_s (E+ - E-)(s), 1 - exp(-∫λ/D)); pierwsze nie mniejsze od drugiego."""
    gap = table.E_plus - table.E_minus
    return float(np.min(gap)), float(-np.expm1(-table.total_integral))


@dataclass(frozen=True)
class LipschitzResult:
    kappa: float
    argmax: float
    worst_ratio: float
    samples: int


def _slope_envelope(table: GreensTable, x):
    """max(|a(x)| E-(x), b(x) E+(x)) / D(x) - kres |∂G/∂x| po y."""
    Em, Ep, D = _weights_at(table, np.asarray(x, dtype=float))
    gap = Ep - Em
    left = (Ep - 1.0) / gap * Em
    right = (1.0 - Em) / gap * Ep
    return np.maximum(left, right) / D


def lipschitz_estimate(
    table: GreensTable, samples: int = 10_000, seed: int = 0
) -> LipschitzResult:
    """
    Stała Lipschitza κ funkcji G względem x.

    |∂G/∂x| = |a(y)| E-(x)/D(x) dla x < y i b(y) E+(x)/D(x) dla x > y;
    |a| maleje, a b rośnie w y, więc kres po y osiągany jest w y = x.
    Maksimum po x: węzły plus złoty podział wokół najlepszego węzła.
    Następnie wyrywkowa kontrola |G(s, y) - G(t, y)| <= κ |s - t|.
    """
    nodes = table.grid.nodes
    envelope = _slope_envelope(table, nodes)
    best = int(np.argmax(envelope))
    kappa, argmax = float(envelope[best]), float(nodes[best])
    lo, hi = nodes[max(best - 1, 0)], nodes[min(best + 1, len(nodes) - 1)]
    res = minimize_scalar(
        lambda t: -float(_slope_envelope(table, t)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    if -res.fun > kappa:
        kappa, argmax = float(-res.fun), float(res.x)
    if not np.isfinite(kappa):
        raise ValueError("Stała Lipschitza G nie jest skończona")

    worst = 0.0
    if samples > 0:
        rng = np.random.default_rng(seed)
        s, t, y = rng.uniform(-1.0, 1.0, size=(3, samples))
        lhs = np.abs(green_eval(table, s, y) - green_eval(table, t, y))
        rhs = kappa * np.abs(s - t)
        nonzero = rhs > 0
        if np.any(nonzero):
            worst = float(np.max(lhs[nonzero] / rhs[nonzero]))
    return LipschitzResult(
        kappa=kappa, argmax=argmax, worst_ratio=worst, samples=samples
    )


# ============================================================
# Przypadek stałego D (tryb syntetyczny)
# ============================================================


def constant_diffusion_table(D0: float, lam: float, grid: Grid) -> GreensTable:
    diffusion = DiffusionProfile(
        grid=grid, D=np.full(len(grid.nodes), D0), floor_used=D0, floor_kind="constant"
    )
    return build_greens(diffusion, lam)


def closed_form_green(D0: float, lam: float, x, y):
    """
    Funkcja Greena -D0 u'' - λ u' z warunków zszycia w y.

    Lewa gałąź c1 (1 - e^{-r(x+1)}), prawa c2 (1 - e^{r(1-x)}), r = λ/D0;
    ciągłość i skok pochodnej -D0 [u'] = 1 dają układ 2x2.
    """
    r = lam / D0
    xa, ya = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    left_y = 1.0 - np.exp(-r * (ya + 1.0))
    right_y = 1.0 - np.exp(r * (1.0 - ya))
    dleft_y = r * np.exp(-r * (ya + 1.0))
    dright_y = r * np.exp(r * (1.0 - ya))
    system = np.stack(
        [
            np.stack([left_y, -right_y], axis=-1),
            np.stack([-dleft_y, dright_y], axis=-1),
        ],
        axis=-2,
    )
    rhs = np.stack([np.zeros_like(ya), np.full_like(ya, -1.0 / D0)], axis=-1)
    coeffs = np.linalg.solve(system, rhs[..., None])[..., 0]
    c1, c2 = coeffs[..., 0], coeffs[..., 1]
    value = np.where(
        xa <= ya,
        c1 * (1.0 - np.exp(-r * (xa + 1.0))),
        c2 * (1.0 - np.exp(r * (1.0 - xa))),
    )
    if np.ndim(value) == 0:
        return float(value)
    return value


def closed_form_unit_source(D0: float, lam: float, x):
    """Rozwiązanie -D0 u'' - λ u' = 1, u(±1) = 0."""
    r = lam / D0
    B = -1.0 / (lam * np.sinh(r))
    A = 1.0 / lam - B * np.exp(-r)
    xa = np.asarray(x, dtype=float)
    return A + B * np.exp(-r * xa) - xa / lam


def closed_form_max_slope(D0: float) -> float:
    """max |∂G/∂x| w przypadku stałego D; osiągane w narożnikach (-1, -1) i (1, 1)."""
    return 1.0 / D0


# ============================================================
# Punkt stały linearyzacji
# ============================================================


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    discrepancy: float
    diffusion: DiffusionProfile
    table: GreensTable
    reproduced: SolutionProfile


def fixed_point_check(spec: ProblemSpec, profile: SolutionProfile) -> FixedPointResult:
    """
    ‖G f - u‖∞: rozwiązanie nieliniowe jest punktem stałym operatora
    rozwiązującego własną linearyzację.
    """
    diffusion = build_diffusion(spec, profile)
    table = build_greens(diffusion, spec.lam)
    reproduced = green_solve(table, spec.steady_source, H=spec.H)
    discrepancy = float(np.max(np.abs(reproduced.u - profile.u)))
    logger.info(f"📊 Punkt stały: ‖Gf - u‖∞ = {discrepancy:.3e}")
    return FixedPointResult(discrepancy, diffusion, table, reproduced)
