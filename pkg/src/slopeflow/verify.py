"""
Twierdzenia jako testy: zasady maksimum na obliczonych profilach oraz
nierówności strukturalne sprawdzane jako niezależne własności.

Każdy wynik niesie status (PASS/FAIL/SKIP), treść sprawdzanego twierdzenia
i świadka - konkretny punkt x albo krotkę parametrów.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .bounds import (
    check_hf,
    derivative_bounds,
    end_slope_bounds,
    existence_condition,
    sup_norm_bound,
)
from .core import (
    Grid,
    GreensTable,
    ProblemSpec,
    SolutionProfile,
    phi_pow,
    truncate,
)
from .greens import (
    fixed_point_check,
    green_solve,
    gap_lower_bound,
    lipschitz_estimate,
    positivity_scan,
)
from .linearize import lemma_half_bound, select_floor
from .oracle import FdConfig, compare_profiles, solve_fd
from .steady import ShooterConfig, solve_steady

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

MARGIN_TOL = 1e-12
WMP_TOL = 1e-10
SUP_BOUND_TOL = 1e-9
ORACLE_TOL = 5e-5
# Wykładniki przeglądu nierówności dla p >= 2
SIMON_P_GRID = np.linspace(2.0, 6.0, 33)


class CheckStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIP = "skip"


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: CheckStatus
    statement: str
    witness: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.status is CheckStatus.FAIL

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "status": self.status.value,
            "statement": self.statement,
            "witness": self.witness,
        }


def _status(ok: bool) -> CheckStatus:
    return CheckStatus.PASS if ok else CheckStatus.FAIL


def _skip(name: str, statement: str, reason: str) -> CheckResult:
    return CheckResult(name, CheckStatus.SKIP, statement, {"reason": reason})


@dataclass
class VerificationReport:
    checks: list
    scenario_hash: str
    tolerances: dict

    @property
    def passed(self) -> bool:
        return not any(check.failed for check in self.checks)

    def counts(self) -> dict:
        counts = {status.value: 0 for status in CheckStatus}
        for check in self.checks:
            counts[check.status.value] += 1
        return counts

    def to_json(self) -> dict:
        return {
            "scenario_hash": self.scenario_hash,
            "passed": self.passed,
            "counts": self.counts(),
            "tolerances": self.tolerances,
            "checks": [check.to_json() for check in self.checks],
        }

    def table(self) -> str:
        """Tabela do wypisania na standardowe wyjście."""
        icons = {CheckStatus.PASS: "✅", CheckStatus.FAIL: "❌", CheckStatus.SKIP: "⏭️"}
        width = max((len(c.name) for c in self.checks), default=10)
        lines = [f"{'Sprawdzenie':<{width}}  Status", "-" * (width + 10)]
        for check in self.checks:
            icon = icons[check.status]
            lines.append(f"{check.name:<{width}}  {icon} {check.status.value}")
        return "\n".join(lines)


# ============================================================
# Zasady maksimum
# ============================================================

WMP_STATEMENT = "f >= 0, p > 2 => u >= 0 na [-1, 1] (słaba zasada maksimum)"
SMP_STATEMENT = (
    "f >= 0, f ≢ 0, p > 2 => u > 0 w (-1, 1) (silna zasada maksimum; "
    "droga dowodu: G > 0 i u = ∫ G f)"
)


def _sign_precondition(spec: ProblemSpec) -> Optional[str]:
    if spec.p <= 2:
        return f"wymaga p > 2 (p = {spec.p})"
    if not spec.steady_source.is_nonnegative():
        return "wymaga f >= 0"
    return None


def wmp_check(
    spec: ProblemSpec, profile: SolutionProfile, tol: float = WMP_TOL
) -> CheckResult:
    reason = _sign_precondition(spec)
    if reason is not None:
        return _skip("wmp", WMP_STATEMENT, reason)
    i = int(np.argmin(profile.u))
    min_u = float(profile.u[i])
    witness = {"min_u": min_u, "x": float(profile.grid.nodes[i])}
    return CheckResult("wmp", _status(min_u >= -tol), WMP_STATEMENT, witness)


def smp_check(
    spec: ProblemSpec,
    profile: SolutionProfile,
    table: GreensTable,
    fixed_point_tol: float = 1e-4,
) -> CheckResult:
    """
    (a) min wewnętrznych u > 0, (b) min G > 0 na parach wewnętrznych,
    (c) ∫ G f odtwarza u w tolerancji punktu stałego.
    """
    reason = _sign_precondition(spec)
    if reason is None and spec.steady_source.is_zero():
        reason = "wymaga f ≢ 0"
    if reason is not None:
        return _skip("smp", SMP_STATEMENT, reason)

    interior = profile.u[1:-1]
    i = int(np.argmin(interior))
    min_interior = float(interior[i])
    min_G, (gx, gy) = positivity_scan(table)
    reproduced = green_solve(table, spec.steady_source)
    on_grid = np.interp(reproduced.grid.nodes, profile.grid.nodes, profile.u)
    discrepancy = float(np.max(np.abs(reproduced.u - on_grid)))

    ok = min_interior > 0 and min_G > 0 and discrepancy <= fixed_point_tol
    witness = {
        "min_interior_u": min_interior,
        "x": float(profile.grid.nodes[i + 1]),
        "min_G": min_G,
        "G_argmin": [gx, gy],
        "fixed_point_discrepancy": discrepancy,
    }
    return CheckResult("smp", _status(ok), SMP_STATEMENT, witness)


# ============================================================
# Nierówności strukturalne
# ============================================================


def simon_constant(p: float) -> float:
    """c_p = 2^{2-p} dla p >= 2; p - 1 w gałęzi 1 < p < 2."""
    if p <= 1:
        raise ValueError(f"Wykładnik p musi być > 1, otrzymano {p}")
    return 2.0 ** (2.0 - p) if p >= 2 else p - 1.0


def simon_inequality_check(x, y, p: float):
    """
    Margines (Φ_p(x) - Φ_p(y))(x - y) - c_p |x - y|^p dla p >= 2.

    Dla 1 < p < 2 prawa strona to (p - 1)|x - y|² (|x| + |y|)^{p-2};
    ta gałąź jest tylko skanowana.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lhs = (phi_pow(p, x) - phi_pow(p, y)) * (x - y)
    gap = np.abs(x - y)
    c_p = simon_constant(p)
    if p >= 2:
        rhs = c_p * gap**p
    else:
        scale = np.abs(x) + np.abs(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            rhs = np.where(scale > 0, c_p * gap**2 * scale ** (p - 2.0), 0.0)
    margin = lhs - rhs
    if np.ndim(margin) == 0:
        return float(margin)
    return margin


def coercivity_expression(s, p: float, phi: float):
    """Φ_p(s + tg φ) s - ½ |s|^p."""
    s = np.asarray(s, dtype=float)
    value = phi_pow(p, s + math.tan(phi)) * s - 0.5 * np.abs(s) ** p
    if np.ndim(value) == 0:
        return float(value)
    return value


def coercivity_scan_radius(p: float, phi: float) -> float:
    """
    Promień S, poza którym wyrażenie jest nieujemne.

    Dla s > 0 zawsze; dla s = -σ wystarcza tg φ / σ <= 1 - 2^{-1/(p-1)}.
    """
    return max(1.0, 2.0 * math.tan(phi) / (1.0 - 2.0 ** (-1.0 / (p - 1.0))))


def coercivity_gap(spec: ProblemSpec, samples: int = 20_001) -> float:
    """μ = -min(0, min_s [Φ_p(s + tg φ) s - ½ |s|^p]); μ >= 0 i skończone."""
    p, phi = spec.p, spec.phi
    S = coercivity_scan_radius(p, phi)
    grid = np.linspace(-S, S, samples)
    values = coercivity_expression(grid, p, phi)
    k = int(np.argmin(values))
    best = float(values[k])
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, samples - 1)]
    res = minimize_scalar(
        lambda s: coercivity_expression(s, p, phi),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    best = min(best, float(res.fun))
    return -min(0.0, best)


def main_part_monotonicity_check(r, s, s_tilde, spec: ProblemSpec, k: float):
    """
    Margines (a(r, s) - a(r, s̃))(s - s̃) - c_p (H + T_k(r)) cos^{p-1} φ |s - s̃|^p
    dla a(r, s) = (H + T_k(r)) cos^{p-1} φ Φ_p(s + tg φ).
    """
    if not 0.0 < k < spec.H:
        raise ValueError(f"Poziom obcięcia musi leżeć w (0, H): k = {k}")
    if spec.p < 2:
        raise ValueError(f"Monotoniczność części głównej wymaga p >= 2: p = {spec.p}")
    p, tan_phi = spec.p, math.tan(spec.phi)
    s = np.asarray(s, dtype=float)
    s_tilde = np.asarray(s_tilde, dtype=float)
    weight = (spec.H + truncate(np.asarray(r, dtype=float), k)) * math.cos(
        spec.phi
    ) ** (p - 1.0)
    a_s = weight * phi_pow(p, s + tan_phi)
    a_t = weight * phi_pow(p, s_tilde + tan_phi)
    margin = (a_s - a_t) * (s - s_tilde) - simon_constant(p) * weight * np.abs(
        s - s_tilde
    ) ** p
    if np.ndim(margin) == 0:
        return float(margin)
    return margin


# ============================================================
# Przeglądy losowe (jako CheckResult)
# ============================================================


def _sweep_result(
    name: str, statement: str, margins, params: dict, scale=None
) -> CheckResult:
    # Margines względny: na przekątnej x = -y równość jest dokładna
    scale = np.ones_like(margins) if scale is None else scale
    relative = margins / scale
    k = int(np.argmin(relative))
    witness = {"min_margin": float(margins[k]), "relative": float(relative[k])}
    witness.update({key: float(values[k]) for key, values in params.items()})
    ok = float(relative[k]) >= -MARGIN_TOL
    return CheckResult(name, _status(ok), statement, witness)


def simon_sweep(seed: int, samples: int = 100_000) -> CheckResult:
    statement = "(Φ_p(x) - Φ_p(y))(x - y) >= 2^(2-p) |x - y|^p dla p >= 2"
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(-10.0, 10.0, size=(2, samples))
    p_values = rng.choice(SIMON_P_GRID, size=samples)
    margins = np.empty(samples)
    for p in SIMON_P_GRID:
        mask = p_values == p
        margins[mask] = simon_inequality_check(x[mask], y[mask], float(p))
    gap = np.abs(x - y) ** p_values
    scale = 1.0 + np.abs(x) ** p_values + np.abs(y) ** p_values + gap
    params = {"x": x, "y": y, "p": p_values}
    return _sweep_result("simon_inequality", statement, margins, params, scale)


def monotonicity_sweep(
    spec: ProblemSpec, seed: int, samples: int = 100_000
) -> CheckResult:
    statement = (
        "(a(r, s) - a(r, s̃))(s - s̃) >= c_p (H + T_k(r)) cos^(p-1) φ |s - s̃|^p"
    )
    if spec.p < 2:
        reason = f"wymaga p >= 2 (p = {spec.p})"
        return _skip("main_part_monotonicity", statement, reason)
    rng = np.random.default_rng(seed + 1)
    k = 0.5 * spec.H
    r = rng.uniform(-3.0 * spec.H, 3.0 * spec.H, size=samples)
    s, s_tilde = rng.uniform(-10.0, 10.0, size=(2, samples))
    margins = main_part_monotonicity_check(r, s, s_tilde, spec, k)
    tan_phi, p = math.tan(spec.phi), spec.p
    scale = (spec.H + k) * (
        1.0
        + np.abs(s + tan_phi) ** p
        + np.abs(s_tilde + tan_phi) ** p
        + np.abs(s - s_tilde) ** p
    )
    params = {"r": r, "s": s, "s_tilde": s_tilde}
    return _sweep_result("main_part_monotonicity", statement, margins, params, scale)


def lemma_half_scan(points: int = 4001) -> CheckResult:
    """(p - 1) ∫_0^1 |1 + θ a|^{p-2} dθ >= ½ dla a ∈ [-50, 50], p ∈ (2, 8]."""
    statement = "(p - 1) ∫_0^1 |1 + θ a|^(p-2) dθ >= 1/2 dla p > 2"
    a = np.linspace(-50.0, 50.0, points)
    worst, witness = math.inf, {}
    for p in np.linspace(2.0, 8.0, 25)[1:]:
        values = lemma_half_bound(a, float(p))
        k = int(np.argmin(values))
        if values[k] < worst:
            worst = float(values[k])
            witness = {"min_value": worst, "a": float(a[k]), "p": float(p)}
    return CheckResult(
        "lemma_half", _status(worst >= 0.5 - MARGIN_TOL), statement, witness
    )


def coercivity_check(spec: ProblemSpec) -> CheckResult:
    statement = "μ = -min(0, min_s [Φ_p(s + tg φ) s - ½|s|^p]) jest skończone i >= 0"
    mu = coercivity_gap(spec)
    witness = {"mu": mu, "radius": coercivity_scan_radius(spec.p, spec.phi)}
    if spec.p == 2:
        exact = 0.5 * math.tan(spec.phi) ** 2
        witness["exact"] = exact
        ok = abs(mu - exact) <= 1e-10
    else:
        ok = math.isfinite(mu) and mu >= 0
    return CheckResult("coercivity", _status(ok), statement, witness)


# ============================================================
# Zestaw dla jednego scenariusza
# ============================================================


@dataclass(frozen=True)
class SuiteConfig:
    """
    Args:
        n_cells: Siatka solvera strzałów i profilu odniesienia
        hf_resolution: Rozdzielczość sprawdzania (HF)
        oracle_cells: Siatka solvera FD (0 = bez porównania)
        lipschitz_samples: Liczba losowych trójek (s, t, y)
        sweep_samples: Liczba próbek przeglądów nierówności
        workers: Wątki dla niezależnych sprawdzeń (None = domyślnie)
    """

    n_cells: int = 1024
    hf_resolution: int = 256
    oracle_cells: int = 1024
    lipschitz_samples: int = 10_000
    sweep_samples: int = 100_000
    workers: Optional[int] = None

    @property
    def fixed_point_tol(self) -> float:
        return 1e-5 if self.n_cells >= 2048 else 1e-4


def _scenario_checks(
    spec: ProblemSpec, profile: SolutionProfile, config: SuiteConfig
) -> list:
    """Sprawdzenia zależne od profilu, kolejno (współdzielą tablicę Greena)."""
    results = []
    hf = check_hf(spec, config.hf_resolution)

    statement = "(HF) => ‖u‖∞ <= ‖f‖₁ / (sin φ)^(p-1)"
    if hf.holds:
        bound = sup_norm_bound(spec)
        results.append(
            CheckResult(
                "sup_bound",
                _status(profile.sup_norm <= bound + SUP_BOUND_TOL),
                statement,
                {"sup_norm": profile.sup_norm, "bound": bound},
            )
        )
    else:
        results.append(_skip("sup_bound", statement, f"(HF): {hf.verdict.value}"))

    statement = "(HF) => u > -H na [-1, 1]"
    if hf.holds:
        i = int(np.argmin(profile.u))
        results.append(
            CheckResult(
                "no_touch",
                _status(profile.min_head > 0),
                statement,
                {"min_head": profile.min_head, "x": float(profile.grid.nodes[i])},
            )
        )
    else:
        results.append(_skip("no_touch", statement, f"(HF): {hf.verdict.value}"))

    threshold = 1e-8 * (1.0 + spec.source_l1)
    results.append(
        CheckResult(
            "first_order_identity",
            _status(profile.residual_first_order <= threshold),
            "(u + H) Φ_p(u' cos φ + sin φ) = κ + ∫_x^1 f punktowo",
            {"residual": profile.residual_first_order, "threshold": threshold},
        )
    )

    statement = "rozwiązanie strzałów = rozwiązanie postaci słabej (Newton FD)"
    if config.oracle_cells > 0:
        reference = solve_fd(spec, FdConfig(n_cells=config.oracle_cells))
        sup, l2 = compare_profiles(profile, reference)
        allowed = ORACLE_TOL * (1.0 + profile.sup_norm)
        results.append(
            CheckResult(
                "oracle_agreement",
                _status(sup <= allowed),
                statement,
                {"sup_distance": sup, "l2_distance": l2, "threshold": allowed},
            )
        )
    else:
        results.append(_skip("oracle_agreement", statement, "oracle_cells = 0"))

    results.append(wmp_check(spec, profile))

    linear_names = (
        "diffusion_floor",
        "derivative_bounds",
        "green_positivity",
        "green_gap",
        "green_lipschitz",
        "fixed_point",
        "smp",
    )
    if spec.p <= 2:
        reason = f"linearyzacja wymaga p > 2 (p = {spec.p})"
        results.extend(_skip(name, "p > 2", reason) for name in linear_names)
        return results

    fixed = fixed_point_check(spec, profile)
    diffusion, table = fixed.diffusion, fixed.table

    floor, kind = select_floor(spec, profile.min_head)
    j = int(np.argmin(diffusion.D))
    results.append(
        CheckResult(
            "diffusion_floor",
            _status(diffusion.min_value >= floor * (1.0 - MARGIN_TOL)),
            f"min D >= dolne ograniczenie ({kind})",
            {
                "min_D": diffusion.min_value,
                "floor": floor,
                "kind": kind,
                "x": float(diffusion.grid.nodes[j]),
            },
        )
    )

    statement = "|u'(1)| i ‖u'‖∞ w ograniczeniach jawnych"
    if existence_condition(spec):
        bounds = derivative_bounds(spec, profile, float(diffusion.D[-1]))
        pos, neg = end_slope_bounds(spec)
        ok = bounds.respected(profile.s_end, profile.du_sup_norm)
        results.append(
            CheckResult(
                "derivative_bounds",
                _status(ok),
                statement,
                {
                    "du_end": profile.s_end,
                    "end_bound": bounds.end_bound,
                    "end_bound_pos": pos,
                    "end_bound_neg": neg,
                    "du_sup": profile.du_sup_norm,
                    "uniform_bound": bounds.uniform_bound,
                    "uniform_source": bounds.uniform_source,
                },
            )
        )
    else:
        results.append(
            _skip("derivative_bounds", statement, "‖f‖₁ >= H (sin φ)^(p-1)")
        )

    min_G, (gx, gy) = positivity_scan(table)
    results.append(
        CheckResult(
            "green_positivity",
            _status(min_G > 0),
            "G(x, y) > 0 dla x, y ∈ (-1, 1)",
            {"min_G": min_G, "x": gx, "y": gy},
        )
    )

    min_gap, gap_bound = gap_lower_bound(table)
    results.append(
        CheckResult(
            "green_gap",
            _status(min_gap >= gap_bound * (1.0 - MARGIN_TOL) and gap_bound > 0),
            "E+ - E- >= 1 - exp(-∫λ/D) > 0",
            {"min_gap": min_gap, "bound": gap_bound},
        )
    )

    lip = lipschitz_estimate(table, config.lipschitz_samples, seed=0)
    results.append(
        CheckResult(
            "green_lipschitz",
            _status(lip.worst_ratio <= 1.0 + 1e-9),
            "|G(s, y) - G(t, y)| <= κ |s - t|",
            {"kappa": lip.kappa, "argmax": lip.argmax, "worst_ratio": lip.worst_ratio},
        )
    )

    results.append(
        CheckResult(
            "fixed_point",
            _status(fixed.discrepancy <= config.fixed_point_tol),
            "u rozwiązuje własną linearyzację: ‖∫ G f - u‖∞ małe",
            {"discrepancy": fixed.discrepancy, "threshold": config.fixed_point_tol},
        )
    )
    results.append(smp_check(spec, profile, table, config.fixed_point_tol))
    return results


def run_suite(
    spec: ProblemSpec,
    seed: int = 0,
    config: Optional[SuiteConfig] = None,
    grid: Optional[Grid] = None,
    scenario_hash: Optional[str] = None,
    shooter: Optional[ShooterConfig] = None,
) -> VerificationReport:
    """
    Pełny zestaw twierdzeń dla jednego scenariusza.

    Sprawdzenia strukturalne biegną równolegle z łańcuchem zależnym od
    profilu; wyniki składane są w stałej kolejności.
    """
    config = config or SuiteConfig()
    grid = grid or Grid.uniform(config.n_cells)
    profile = solve_steady(spec, shooter, grid)

    jobs = [
        lambda: _scenario_checks(spec, profile, config),
        lambda: [lemma_half_scan()],
        lambda: [simon_sweep(seed, config.sweep_samples)],
        lambda: [monotonicity_sweep(spec, seed, config.sweep_samples)],
        lambda: [coercivity_check(spec)],
    ]
    checks = []
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(job) for job in jobs]
        for future in futures:
            checks.extend(future.result())

    tolerances = {
        "margin": MARGIN_TOL,
        "wmp": WMP_TOL,
        "sup_bound": SUP_BOUND_TOL,
        "oracle": ORACLE_TOL,
        "fixed_point": config.fixed_point_tol,
    }
    report = VerificationReport(
        checks=checks,
        scenario_hash=scenario_hash or spec.digest(),
        tolerances=tolerances,
    )
    failed = [c.name for c in checks if c.failed]
    if failed:
        logger.error(f"❌ Niespełnione sprawdzenia: {', '.join(failed)}")
    else:
        logger.info(f"✅ Zestaw twierdzeń: {report.counts()}")
    return report


def inject_dip(profile: SolutionProfile, depth: float, index: Optional[int] = None):
    """Profil z wstrzykniętym ujemnym dołkiem - do testów czułości detektorów."""
    u = profile.u.copy()
    i = len(u) // 2 if index is None else index
    u[i] = -abs(depth)
    return replace(profile, u=u)

