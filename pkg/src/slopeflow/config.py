"""
Konfiguracja scenariusza: jeden ścisły dokument JSON.

Przykład:
    {
      "name": "golden",
      "problem": {"p": 3.0, "H": 1.0, "phi": 0.2, "source": 0.05},
      "grid": {"n_cells": 2048},
      "solver": {"fd": {"n_cells": 1024}},
      "seed": 0
    }

Nieznane klucze są odrzucane z pełną ścieżką (np. "solver.fd.tol").
Zmienne środowiskowe: SLOPEFLOW_OUT (katalog wyników), SLOPEFLOW_THREADS
(liczba procesów/wątków).
"""

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import psutil

from .bounds import MIN_HF_RESOLUTION
from .core import ConfigError, ProblemSpec, SourceFunction
from .oracle import FdConfig
from .steady import ShooterConfig
from .transient import TransientConfig

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).resolve().parents[2]
RESOURCES_DIR = PROJECT_ROOT / "resources"
SCENARIOS_DIR = RESOURCES_DIR / "scenarios"
GOLDEN_DIR = PROJECT_ROOT / "golden"

OUT_ENV = "SLOPEFLOW_OUT"
THREADS_ENV = "SLOPEFLOW_THREADS"


@dataclass(frozen=True)
class GridSection:
    n_cells: int = 2048
    grading: float = 0.0


@dataclass(frozen=True)
class SolverSection:
    shooter: ShooterConfig = field(default_factory=ShooterConfig)
    fd: FdConfig = field(default_factory=FdConfig)
    hf_resolution: int = 256


@dataclass(frozen=True)
class TransientSection:
    """
    Args:
        h0: {"kind": "constant", "value": ...} | {"kind": "samples", "x": [...],
            "h": [...]} | {"kind": "steady"}; domyślnie ĥ0 ≡ H
    """

    t_end: float = 1.0
    snapshot_every: Optional[float] = None
    h0: dict = field(default_factory=lambda: {"kind": "constant"})
    upwind: bool = False
    cfl_safety: float = 0.4
    n_cells: int = 512

    def run_config(self) -> TransientConfig:
        return TransientConfig(
            t_end=self.t_end,
            snapshot_every=self.snapshot_every,
            cfl_safety=self.cfl_safety,
            upwind=self.upwind,
        )


@dataclass(frozen=True)
class SweepSection:
    p: tuple = (2.5, 3.0, 4.0)
    phi: tuple = (0.1, 0.3, math.pi / 4)
    amplitude: tuple = (0.1, 0.25, 0.5)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    problem: ProblemSpec
    grid: GridSection = field(default_factory=GridSection)
    solver: SolverSection = field(default_factory=SolverSection)
    transient: TransientSection = field(default_factory=TransientSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    outputs: str = "results"
    seed: int = 0

    def with_overrides(
        self,
        n_cells: Optional[int] = None,
        seed: Optional[int] = None,
        outputs: Optional[str] = None,
    ) -> "ScenarioConfig":
        config = self
        if n_cells is not None:
            if n_cells < 16:
                raise ConfigError(f"--grid musi być >= 16, otrzymano {n_cells}")
            config = replace(config, grid=replace(config.grid, n_cells=n_cells))
        if seed is not None:
            config = replace(config, seed=seed)
        if outputs is not None:
            config = replace(config, outputs=outputs)
        return config

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "problem": self.problem.to_json(),
            "grid": {"n_cells": self.grid.n_cells, "grading": self.grid.grading},
            "seed": self.seed,
        }


# ============================================================
# Parsowanie
# ============================================================


def _require_mapping(data, path: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"Sekcja '{path}' musi być obiektem JSON")
    return data


def _reject_unknown(data: dict, allowed, path: str):
    for key in data:
        if key not in allowed:
            full = f"{path}.{key}" if path else key
            raise ConfigError(f"Nieznany klucz '{full}'")


def _build(cls, data, path: str, convert=None):
    """Tworzy dataklasę z sekcji, odrzucając nieznane klucze."""
    data = dict(_require_mapping(data, path))
    _reject_unknown(data, {f.name for f in fields(cls) if f.init}, path)
    if convert:
        data = convert(data)
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Błędna sekcja '{path}': {exc}") from exc


def parse_source(value, path: str = "problem.source") -> SourceFunction:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return SourceFunction.constant(float(value))
    if isinstance(value, list):
        return SourceFunction.from_json(value)
    raise ConfigError(f"'{path}' musi być liczbą albo listą kawałków")


def parse_problem(data) -> ProblemSpec:
    data = dict(_require_mapping(data, "problem"))
    allowed = {"p", "H", "phi", "conductivity", "source", "beta", "H_minus", "H_plus"}
    _reject_unknown(data, allowed, "problem")
    for key in ("p", "H", "phi", "source"):
        if key not in data:
            raise ConfigError(f"Brak wymaganego klucza 'problem.{key}'")
    data["source"] = parse_source(data["source"])
    try:
        return ProblemSpec(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Błędna sekcja 'problem': {exc}") from exc


def _shooter_convert(data: dict) -> dict:
    if "bracket_init" in data:
        data["bracket_init"] = tuple(data["bracket_init"])
    return data


def parse_solver(data) -> SolverSection:
    data = dict(_require_mapping(data, "solver"))
    _reject_unknown(data, {"shooter", "fd", "hf_resolution"}, "solver")
    shooter = _build(
        ShooterConfig, data.get("shooter", {}), "solver.shooter", _shooter_convert
    )
    fd = _build(FdConfig, data.get("fd", {}), "solver.fd")
    resolution = data.get("hf_resolution", SolverSection.hf_resolution)
    if not isinstance(resolution, int) or resolution < MIN_HF_RESOLUTION:
        raise ConfigError(
            f"'solver.hf_resolution' musi być liczbą całkowitą >= {MIN_HF_RESOLUTION}"
        )
    return SolverSection(shooter=shooter, fd=fd, hf_resolution=resolution)


H0_KINDS = {"constant": {"value"}, "samples": {"x", "h"}, "steady": set()}


def _transient_convert(data: dict) -> dict:
    h0 = _require_mapping(data.get("h0", {"kind": "constant"}), "transient.h0")
    kind = h0.get("kind")
    if kind not in H0_KINDS:
        raise ConfigError(f"'transient.h0.kind' musi być jednym z {sorted(H0_KINDS)}")
    _reject_unknown(h0, H0_KINDS[kind] | {"kind"}, "transient.h0")
    if kind == "samples" and (
        "x" not in h0 or "h" not in h0 or len(h0["x"]) != len(h0["h"])
    ):
        raise ConfigError(
            "'transient.h0' typu samples wymaga list x i h równej długości"
        )
    data["h0"] = dict(h0)
    return data


def _sweep_convert(data: dict) -> dict:
    for key, values in data.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"'sweep.{key}' musi być niepustą listą")
        try:
            data[key] = tuple(float(v) for v in values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"'sweep.{key}' musi zawierać liczby") from exc
    return data


def parse_config(data) -> ScenarioConfig:
    """Ścisłe wczytanie słownika JSON do ScenarioConfig."""
    data = _require_mapping(data, "")
    allowed = {
        "name",
        "problem",
        "grid",
        "solver",
        "transient",
        "sweep",
        "outputs",
        "seed",
    }
    _reject_unknown(data, allowed, "")
    if "problem" not in data:
        raise ConfigError("Brak wymaganej sekcji 'problem'")

    grid = _build(GridSection, data.get("grid", {}), "grid")
    if not isinstance(grid.n_cells, int) or grid.n_cells < 16:
        raise ConfigError(
            f"'grid.n_cells' musi być liczbą całkowitą >= 16: {grid.n_cells}"
        )
    if not 0.0 <= grid.grading <= 1.0:
        raise ConfigError(f"'grid.grading' musi leżeć w [0, 1]: {grid.grading}")
    transient = _build(
        TransientSection, data.get("transient", {}), "transient", _transient_convert
    )
    if transient.t_end < 0 or not 0.0 < transient.cfl_safety <= 0.5:
        raise ConfigError("'transient' wymaga t_end >= 0 i cfl_safety w (0, 0.5]")

    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"'seed' musi być liczbą całkowitą: {seed!r}")
    name = data.get("name", "scenario")
    outputs = data.get("outputs", "results")
    if not isinstance(name, str) or not isinstance(outputs, str):
        raise ConfigError("'name' i 'outputs' muszą być napisami")

    return ScenarioConfig(
        name=name,
        problem=parse_problem(data["problem"]),
        grid=grid,
        solver=parse_solver(data.get("solver", {})),
        transient=transient,
        sweep=_build(SweepSection, data.get("sweep", {}), "sweep", _sweep_convert),
        outputs=outputs,
        seed=seed,
    )


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Plik konfiguracji nie istnieje: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Niepoprawny JSON w {path}: {exc}") from exc
    return parse_config(data)


# ============================================================
# Tożsamość scenariusza i środowisko
# ============================================================


def scenario_hash(config: ScenarioConfig) -> str:
    """sha256 kanonicznego JSON sekcji problem i grid, 16 znaków hex."""
    payload = {
        "problem": config.problem.to_json(),
        "grid": {"n_cells": config.grid.n_cells, "grading": config.grid.grading},
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def resolve_output_dir(config: ScenarioConfig, cli_out: Optional[str] = None) -> Path:
    """--out ma pierwszeństwo przed SLOPEFLOW_OUT, ten przed 'outputs'."""
    raw = cli_out or os.environ.get(OUT_ENV) or config.outputs
    path = Path(raw)
    if not path.is_absolute():
        path = Path.cwd() / path
    return path


def worker_count() -> int:
    """SLOPEFLOW_THREADS albo liczba rdzeni logicznych."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            count = int(raw)
        except ValueError as exc:
            raise ConfigError(
                f"{THREADS_ENV} musi być liczbą całkowitą: {raw!r}"
            ) from exc
        if count < 1:
            raise ConfigError(f"{THREADS_ENV} musi być >= 1, otrzymano {count}")
        return count
    return psutil.cpu_count(logical=True) or 1


# ============================================================
# Wbudowany zestaw scenariuszy
# ============================================================

SUITE_P = (2.5, 3.0, 4.0)
SUITE_PHI = (0.1, 0.3, math.pi / 4)


def _suite_sources(amplitude: float) -> dict:
    """Trzy kształty f >= 0 o tej samej normie ‖f‖₁ = 2 amplitude."""
    return {
        "constant": SourceFunction.constant(amplitude),
        "ramp": SourceFunction.from_json(
            [{"interval": [-1.0, 1.0], "coeffs": [amplitude, amplitude]}]
        ),
        "patch": SourceFunction.from_json(
            [
                {"interval": [-1.0, 0.0], "coeffs": [0.0]},
                {"interval": [0.0, 0.5], "coeffs": [4.0 * amplitude]},
                {"interval": [0.5, 1.0], "coeffs": [0.0]},
            ]
        ),
    }


def bundled_suite(H: float = 1.0, n_cells: int = 1024) -> list:
    """
    Siatka (p, φ, kształt f) z ‖f‖₁ = ½ H (sin φ)^{p-1}.

    Warunek istnienia jest więc spełniony z zapasem, a (HF) zachodzi dla f >= 0.
    """
    configs = []
    for p in SUITE_P:
        for phi in SUITE_PHI:
            amplitude = 0.25 * H * math.sin(phi) ** (p - 1.0)
            for kind, source in _suite_sources(amplitude).items():
                problem = ProblemSpec(p=p, H=H, phi=phi, source=source)
                configs.append(
                    ScenarioConfig(
                        name=f"suite-p{p:g}-phi{phi:.4f}-{kind}",
                        problem=problem,
                        grid=GridSection(n_cells=n_cells),
                    )
                )
    return configs


def bundled_scenarios() -> list:
    """Scenariusze z resources/scenarios w kolejności nazw plików."""
    return [load_config(path) for path in sorted(SCENARIOS_DIR.glob("*.json"))]
