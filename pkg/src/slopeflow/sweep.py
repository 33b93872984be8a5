"""
Przegląd siatki parametrów (p, φ, amplituda) z rozwiązaniem ustalonym
i zestawem twierdzeń w każdym punkcie.

Amplituda a oznacza ‖f‖₁ = a H (sin φ)^{p-1}: kształt źródła bierzemy z
konfiguracji, a normę ustawiamy względem progu istnienia (a < 1 spełnia
warunek istnienia).
"""

import csv
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from .config import ScenarioConfig, scenario_hash, worker_count
from .core import ConfigError, SolverError
from .verify import SuiteConfig, run_suite

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

SUMMARY_FIELDS = (
    "index",
    "p",
    "phi",
    "amplitude",
    "scenario_hash",
    "status",
    "passed",
    "n_pass",
    "n_fail",
    "n_skip",
    "failed_checks",
    "error",
)


@dataclass(frozen=True)
class SweepPoint:
    index: int
    p: float
    phi: float
    amplitude: float


def sweep_points(config: ScenarioConfig) -> list:
    """Punkty w kolejności wyliczenia: p, potem φ, potem amplituda."""
    grid = itertools.product(config.sweep.p, config.sweep.phi, config.sweep.amplitude)
    return [SweepPoint(i, p, phi, a) for i, (p, phi, a) in enumerate(grid)]


def point_config(config: ScenarioConfig, point: SweepPoint) -> ScenarioConfig:
    base = config.problem.source
    norm = base.l1_norm()
    if norm == 0.0:
        raise ConfigError("Przegląd wymaga źródła o niezerowej normie ‖f‖₁")
    problem = replace(config.problem, p=point.p, phi=point.phi)
    target = point.amplitude * problem.H * problem.lam * problem.conductivity
    problem = problem.with_source(base.scaled(target / norm))
    return replace(config, name=f"{config.name}-{point.index:03d}", problem=problem)


def _run_point(args) -> dict:
    config, point = args
    row = {
        "index": point.index,
        "p": point.p,
        "phi": point.phi,
        "amplitude": point.amplitude,
        "scenario_hash": "",
        "status": "ok",
        "passed": False,
        "n_pass": 0,
        "n_fail": 0,
        "n_skip": 0,
        "failed_checks": "",
        "error": "",
    }
    try:
        scenario = point_config(config, point)
        row["scenario_hash"] = scenario_hash(scenario)
        suite = SuiteConfig(
            n_cells=scenario.grid.n_cells,
            hf_resolution=scenario.solver.hf_resolution,
            oracle_cells=scenario.solver.fd.n_cells,
            sweep_samples=10_000,
            workers=1,
        )
        report = run_suite(
            scenario.problem,
            seed=scenario.seed,
            config=suite,
            scenario_hash=row["scenario_hash"],
            shooter=scenario.solver.shooter,
        )
    except (SolverError, ValueError) as exc:
        row["status"] = type(exc).__name__
        row["error"] = str(exc)
        return row

    counts = report.counts()
    row.update(
        passed=report.passed,
        n_pass=counts["pass"],
        n_fail=counts["fail"],
        n_skip=counts["skip"],
        failed_checks=";".join(c.name for c in report.checks if c.failed),
    )
    return row


def run_sweep(config: ScenarioConfig, workers: Optional[int] = None) -> list:
    """
    Uruchamia wszystkie punkty na ograniczonej puli procesów.

    Wiersze wracają w kolejności wyliczenia niezależnie od kolejności
    zakończenia zadań.
    """
    points = sweep_points(config)
    workers = workers or worker_count()
    logger.info(f"🚀 Przegląd: {len(points)} punktów, {workers} procesów")
    jobs = [(config, point) for point in points]
    if workers == 1:
        rows = [_run_point(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_point, jobs))
    failed = sum(1 for row in rows if row["status"] != "ok" or not row["passed"])
    if failed:
        logger.warning(f"⚠️ Punkty z błędem lub niespełnionym sprawdzeniem: {failed}")
    else:
        logger.info("✅ Wszystkie punkty przeglądu przeszły")
    return rows


def write_summary(path: Path, rows: list) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _format(row[key]) for key in SUMMARY_FIELDS})
    return path


def _format(value):
    if isinstance(value, float):
        return f"{value:.17g}"
    return value
