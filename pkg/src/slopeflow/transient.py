"""
Przebieg nieustalony: jawny, konserwatywny schemat dla grubości warstwy ĥ.

    ∂ĥ/∂t + ∂Q/∂x = f,   Q = -c ĥ Φ_p(∂ĥ/∂x cos φ + sin φ),   f = r cos φ
z ĥ(-1, t) = H_{-1}, ĥ(1, t) = H_1 i ĥ(x, 0) = h0(x).
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core import CflViolation, Grid, ProblemSpec, SolutionProfile, phi_pow

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

# Dolne obcięcie |nachylenia| w warunku CFL dla p < 2
SLOPE_FLOOR = 1e-6


@dataclass(frozen=True)
class TransientConfig:
    """
    Args:
        t_end: Czas końcowy
        snapshot_every: Odstęp czasowy migawek (None = tylko początek i koniec)
        cfl_safety: Współczynnik bezpieczeństwa CFL (0.4)
        upwind: Grubość na ściance z węzła pod prąd zamiast średniej
        max_dt: Górne ograniczenie kroku (None = tylko CFL)
    """

    t_end: float = 1.0
    snapshot_every: Optional[float] = None
    cfl_safety: float = 0.4
    upwind: bool = False
    max_dt: Optional[float] = None

    def __post_init__(self):
        if self.t_end < 0:
            raise ValueError(f"t_end musi być >= 0, otrzymano {self.t_end}")
        if self.snapshot_every is not None and not self.snapshot_every > 0:
            raise ValueError("snapshot_every musi być > 0")
        if not 0.0 < self.cfl_safety <= 0.5:
            raise ValueError(f"cfl_safety musi leżeć w (0, 0.5]: {self.cfl_safety}")
        if self.max_dt is not None and not self.max_dt > 0:
            raise ValueError("max_dt musi być > 0")


@dataclass(frozen=True, eq=False)
class TransientState:
    grid: Grid
    h_hat: np.ndarray
    t: float
    dt: float
    H_minus: float
    H_plus: float


@dataclass(frozen=True)
class StepReport:
    mass_change: float
    flux_balance: float
    mass_residual: float
    clipped_mass: float


@dataclass
class TransientSummary:
    t_end: float
    steps: int
    clipped_mass: float
    final_sup_distance: Optional[float]
    max_mass_residual: float
    final_state: TransientState
    snapshots: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "t_end": self.t_end,
            "steps": self.steps,
            "clipped_mass": self.clipped_mass,
            "final_sup_distance": self.final_sup_distance,
            "max_mass_residual": self.max_mass_residual,
        }


def _spacing(grid: Grid) -> float:
    if not grid.is_uniform:
        raise ValueError("Schemat nieustalony wymaga siatki równomiernej")
    return float(grid.spacing[0])


def initial_state(spec: ProblemSpec, grid: Grid, h0) -> TransientState:
    """Stan początkowy z wartości h0 w węzłach i przypiętymi brzegami."""
    h = np.array(h0, dtype=float) * np.ones(len(grid.nodes))
    if np.any(h < 0):
        raise ValueError("Grubość początkowa ĥ0 musi być >= 0")
    H_minus, H_plus = spec.boundary_levels
    h[0], h[-1] = H_minus, H_plus
    return TransientState(grid, h, 0.0, 0.0, H_minus, H_plus)


def h0_values(
    spec: ProblemSpec,
    grid: Grid,
    h0: dict,
    steady: Optional[SolutionProfile] = None,
) -> np.ndarray:
    """
    Wartości ĥ0 w węzłach z opisu {"kind": ...}.

    constant: wartość "value" (domyślnie H); samples: interpolacja liniowa
    par (x, h); steady: u + H z podanego profilu ustalonego.
    """
    kind = h0.get("kind", "constant")
    nodes = grid.nodes
    if kind == "constant":
        return np.full(len(nodes), float(h0.get("value", spec.H)))
    if kind == "samples":
        x = np.asarray(h0["x"], dtype=float)
        h = np.asarray(h0["h"], dtype=float)
        if np.any(np.diff(x) <= 0):
            raise ValueError("Próbki ĥ0 wymagają rosnących x")
        return np.interp(nodes, x, h)
    if kind == "steady":
        if steady is None:
            raise ValueError("ĥ0 typu steady wymaga profilu ustalonego")
        return np.interp(nodes, steady.grid.nodes, steady.u) + spec.H
    raise ValueError(f"Nieznany rodzaj ĥ0: {kind}")


def _face_slopes(spec: ProblemSpec, h_hat: np.ndarray, dx: float) -> np.ndarray:
    return np.diff(h_hat) / dx * math.cos(spec.phi) + math.sin(spec.phi)


def flux(
    spec: ProblemSpec, h_hat: np.ndarray, grid: Grid, upwind: bool = False
) -> np.ndarray:
    """
    Strumienie na ściankach między węzłami i, i+1.

    Q = -c ĥ_face Φ_p(∂ĥ/∂x cos φ + sin φ); ĥ_face to średnia arytmetyczna
    albo wartość z węzła pod prąd.
    """
    h_hat = np.asarray(h_hat, dtype=float)
    if np.any(h_hat < 0):
        raise ValueError("Grubość ĥ musi być >= 0")
    dx = _spacing(grid)
    g = _face_slopes(spec, h_hat, dx)
    if upwind:
        # Q < 0 dla g > 0: przepływ w stronę -x, węzeł pod prąd to i+1
        h_face = np.where(g > 0, h_hat[1:], h_hat[:-1])
    else:
        h_face = 0.5 * (h_hat[:-1] + h_hat[1:])
    return -spec.conductivity * h_face * phi_pow(spec.p, g)


def stable_dt(
    spec: ProblemSpec, h_hat: np.ndarray, grid: Grid, safety: float = 0.4
) -> float:
    """Największy krok dopuszczony przez warunki CFL dyfuzji i dryfu."""
    dx = _spacing(grid)
    g = np.maximum(np.abs(_face_slopes(spec, h_hat, dx)), SLOPE_FLOOR)
    h_face = 0.5 * (h_hat[:-1] + h_hat[1:])
    c, p = spec.conductivity, spec.p
    coef = c * (p - 1.0) * h_face * g ** (p - 2.0) * math.cos(spec.phi) ** 2
    max_coef = float(np.max(coef))
    dt_diff = safety * dx * dx / max_coef if max_coef > 0 else math.inf
    drift = c * max(spec.lam, float(np.max(g ** (p - 1.0))))
    dt_drift = safety * dx / drift
    return min(dt_diff, dt_drift)


def step(
    spec: ProblemSpec,
    state: TransientState,
    dt: float,
    upwind: bool = False,
    safety: float = 0.4,
) -> tuple:
    """
    Jeden krok jawny.

    Returns:
        (nowy stan, StepReport)
    """
    if not dt > 0:
        raise ValueError(f"Krok czasowy musi być > 0, otrzymano {dt}")
    limit = stable_dt(spec, state.h_hat, state.grid, safety)
    if dt > limit * (1.0 + 1e-12):
        raise CflViolation(
            f"Krok dt = {dt:.3e} przekracza ograniczenie CFL {limit:.3e}", limit
        )

    dx = _spacing(state.grid)
    h = state.h_hat
    Q = flux(spec, h, state.grid, upwind)
    source = np.asarray(spec.source.evaluate(state.grid.nodes))

    new = h.copy()
    new[1:-1] = h[1:-1] - dt * (Q[1:] - Q[:-1]) / dx + dt * source[1:-1]

    mass_before = float(np.sum(h[1:-1]) * dx)
    mass_after = float(np.sum(new[1:-1]) * dx)
    mass_change = mass_after - mass_before
    flux_balance = dt * (Q[0] - Q[-1] + float(np.sum(source[1:-1])) * dx)
    scale = max(abs(mass_before), abs(mass_after), 1e-300)
    mass_residual = abs(mass_change - flux_balance) / scale

    negative = new < 0
    clipped = float(-np.sum(new[negative]) * dx) if np.any(negative) else 0.0
    if clipped > 0:
        new[negative] = 0.0
        logger.warning(
            f"⚠️ Obcięto ujemną grubość: masa {clipped:.3e} (t = {state.t:.4g})"
        )

    new[0], new[-1] = state.H_minus, state.H_plus
    new_state = replace(state, h_hat=new, t=state.t + dt, dt=dt)
    return new_state, StepReport(mass_change, flux_balance, mass_residual, clipped)


def run(
    spec: ProblemSpec,
    state0: TransientState,
    config: TransientConfig,
    steady: Optional[SolutionProfile] = None,
    callback: Optional[Callable[[TransientState], None]] = None,
) -> TransientSummary:
    """
    Całkuje do t_end z adaptacyjnym krokiem CFL, emitując migawki.

    Jeśli podano profil ustalony, raportuje ‖ĥ(·, T) - (u + H)‖∞.
    """
    state = state0
    snapshots = [(state.t, state.h_hat.copy())]
    if callback is not None:
        callback(state)
    steps = 0
    clipped_total = 0.0
    worst_mass = 0.0
    cadence = config.snapshot_every
    next_snapshot = cadence if cadence is not None else config.t_end
    eps = 1e-12 * max(1.0, config.t_end)

    while config.t_end - state.t > eps:
        dt = stable_dt(spec, state.h_hat, state.grid, config.cfl_safety)
        if config.max_dt is not None:
            dt = min(dt, config.max_dt)
        dt = min(dt, config.t_end - state.t, next_snapshot - state.t)
        state, report = step(spec, state, dt, config.upwind, config.cfl_safety)
        steps += 1
        clipped_total += report.clipped_mass
        worst_mass = max(worst_mass, report.mass_residual)
        if state.t >= next_snapshot - eps:
            snapshots.append((state.t, state.h_hat.copy()))
            if callback is not None:
                callback(state)
            next_snapshot = (
                min(next_snapshot + cadence, config.t_end)
                if cadence is not None
                else config.t_end
            )

    distance = None
    if steady is not None:
        target = np.interp(state.grid.nodes, steady.grid.nodes, steady.u) + spec.H
        distance = float(np.max(np.abs(state.h_hat - target)))

    if clipped_total > 0:
        logger.warning(f"⚠️ Łączna obcięta masa: {clipped_total:.3e}")
    logger.info(
        f"✅ Przebieg nieustalony: t = {state.t:.4g}, kroki = {steps}, "
        f"max rezyduum masy = {worst_mass:.2e}"
    )
    return TransientSummary(
        t_end=state.t,
        steps=steps,
        clipped_mass=clipped_total,
        final_sup_distance=distance,
        max_mass_residual=worst_mass,
        final_state=state,
        snapshots=snapshots,
    )
