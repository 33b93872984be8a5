"""
Zapisywanie wyników: CSV (17 cyfr znaczących), JSON i binarny zrzut G.

Raporty JSON nie zawierają znaczników czasu - ta sama konfiguracja daje
identyczne bajty.
"""

import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from .core import DiffusionProfile, GreensTable, SolutionProfile

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

CSV_FORMAT = "%.17g"
GOLDEN_RTOL = 1e-10


def _to_plain(value):
    """Konwersja typów numpy na typy JSON."""
    if isinstance(value, dict):
        return {str(k): _to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_to_plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def write_json(path: Path, data: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_to_plain(data), f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_columns(path: Path, header: str, columns) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt=CSV_FORMAT, delimiter=",", header=header, comments="")
    return path


def read_columns(path: Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_profile(path: Path, profile: SolutionProfile) -> Path:
    """CSV `x,u,du`."""
    return write_columns(path, "x,u,du", (profile.grid.nodes, profile.u, profile.du))


def write_diffusion(path: Path, diffusion: DiffusionProfile) -> Path:
    """CSV `x,D` i plik towarzyszący JSON z dolnym ograniczeniem."""
    path = Path(path)
    write_columns(path, "x,D", (diffusion.grid.nodes, diffusion.D))
    write_json(
        path.with_suffix(".json"),
        {
            "floor_used": diffusion.floor_used,
            "floor_kind": diffusion.floor_kind,
            "min_D": diffusion.min_value,
        },
    )
    return path


def write_exp_weights(path: Path, table: GreensTable) -> Path:
    """CSV `x,E_minus,E_plus`."""
    return write_columns(
        path, "x,E_minus,E_plus", (table.grid.nodes, table.E_minus, table.E_plus)
    )


def write_green_matrix(path: Path, table: GreensTable) -> Path:
    """G jako surowe '<f8' wierszami plus nagłówek JSON {n, lambda, grid_hash}."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(table.G, dtype="<f8").tofile(path)
    write_json(
        path.with_suffix(".json"),
        {
            "n": int(table.G.shape[0]),
            "lambda": table.lam,
            "grid_hash": table.grid.digest(),
            "dtype": "<f8",
            "order": "C",
        },
    )
    return path


def read_green_matrix(path: Path) -> np.ndarray:
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    n = header["n"]
    return np.fromfile(path, dtype="<f8").reshape(n, n)


def write_snapshot(directory: Path, index: int, nodes, h_hat) -> Path:
    """CSV `x,h_hat` dla jednej migawki."""
    path = Path(directory) / f"snapshot_{index:04d}.csv"
    return write_columns(path, "x,h_hat", (nodes, h_hat))


# ============================================================
# Pliki wzorcowe (golden)
# ============================================================


def golden_path(golden_dir: Path, digest: str, table: str = "") -> Path:
    """`<hash>.csv` dla profilu, `<hash>_D.csv` i `<hash>_E.csv` dla tablic."""
    suffix = f"_{table}" if table else ""
    return Path(golden_dir) / f"{digest}{suffix}.csv"


def update_golden(
    golden_dir: Path,
    digest: str,
    profile: SolutionProfile,
    diffusion: Optional[DiffusionProfile] = None,
    weights: Optional[tuple] = None,
) -> Path:
    """Zapisuje profil oraz (dla p > 2) tablice D i E± wzorca."""
    path = write_profile(golden_path(golden_dir, digest), profile)
    if diffusion is not None:
        write_columns(
            golden_path(golden_dir, digest, "D"),
            "x,D",
            (diffusion.grid.nodes, diffusion.D),
        )
    if weights is not None:
        E_minus, E_plus = weights
        write_columns(
            golden_path(golden_dir, digest, "E"),
            "x,E_minus,E_plus",
            (profile.grid.nodes, E_minus, E_plus),
        )
    logger.info(f"💾 Zapisano profil wzorcowy: {path}")
    return path


def _column_distance(stored: np.ndarray, columns) -> Optional[tuple]:
    if stored.shape[0] != len(columns[0]) or stored.shape[1] <= len(columns):
        return None
    diff = 0.0
    scale = 1.0
    for j, values in enumerate(columns, start=1):
        diff = max(diff, float(np.max(np.abs(stored[:, j] - values))))
        scale = max(scale, 1.0 + float(np.max(np.abs(stored[:, j]))))
    return diff, scale


def compare_golden(
    golden_dir: Path,
    digest: str,
    profile: SolutionProfile,
    rtol: float = GOLDEN_RTOL,
    diffusion: Optional[DiffusionProfile] = None,
    weights: Optional[tuple] = None,
) -> Optional[dict]:
    """
    Porównanie z zapisanym profilem wzorcowym i, jeśli podano, tablicami D, E±.

    Returns:
        None gdy brak pliku profilu, inaczej {"max_abs_diff", "matches", "file",
        "tables"}; brak pliku tablicy przy podanych danych to niezgodność
    """
    path = golden_path(golden_dir, digest)
    if not path.exists():
        return None
    candidates = {"u": (path, (profile.u,))}
    if diffusion is not None:
        candidates["D"] = (golden_path(golden_dir, digest, "D"), (diffusion.D,))
    if weights is not None:
        candidates["E"] = (golden_path(golden_dir, digest, "E"), tuple(weights))

    tables = {}
    for name, (table_path, columns) in candidates.items():
        measured = (
            _column_distance(read_columns(table_path), columns)
            if table_path.exists()
            else None
        )
        if measured is None:
            tables[name] = {"max_abs_diff": None, "matches": False}
            continue
        diff, scale = measured
        tables[name] = {"max_abs_diff": diff, "matches": diff <= rtol * scale}

    matches = all(entry["matches"] for entry in tables.values())
    if not matches:
        bad = ", ".join(name for name, entry in tables.items() if not entry["matches"])
        logger.warning(f"⚠️ Niezgodność ze wzorcem ({path.name}): {bad}")
    return {
        "max_abs_diff": tables["u"]["max_abs_diff"],
        "matches": matches,
        "file": path.name,
        "tables": tables,
    }
