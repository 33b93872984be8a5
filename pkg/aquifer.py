#!/usr/bin/env python3
"""
Slopeflow
=========

Przepływ wód gruntowych nad nachylonym, nieprzepuszczalnym dnem
(uogólnione równanie Boussinesqa z prawem potęgowym).

Przepływ pracy:
1. Rozwiązanie ustalone (metoda strzałów) + solver referencyjny (Newton FD)
2. Linearyzacja i funkcja Greena (p > 2)
3. Przebieg nieustalony i relaksacja do stanu ustalonego
4. Zestaw twierdzeń (zasady maksimum, nierówności strukturalne)
5. Przegląd siatki parametrów

Użycie:
    python aquifer.py steady --config resources/scenarios/golden.json
    python aquifer.py green --config resources/scenarios/golden.json [--synthetic]
    python aquifer.py transient --config resources/scenarios/transient.json
    python aquifer.py verify --config <plik> | --all
    python aquifer.py sweep --config resources/scenarios/sweep.json

Kody wyjścia: 0 sukces, 1 błąd solvera lub niespełnione sprawdzenie,
2 błąd konfiguracji, 3 nieobsługiwany reżim (p <= 2 dla linearyzacji).
"""

import argparse
import itertools
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

# Dodaj src do path
sys.path.insert(0, str(Path(__file__).parent / "src"))

from slopeflow.artifacts import (  # noqa: E402
    compare_golden,
    update_golden,
    write_diffusion,
    write_exp_weights,
    write_green_matrix,
    write_json,
    write_profile,
    write_snapshot,
)
from slopeflow.bounds import build_bounds_report, derivative_bounds  # noqa: E402
from slopeflow.config import (  # noqa: E402
    GOLDEN_DIR,
    bundled_scenarios,
    bundled_suite,
    load_config,
    resolve_output_dir,
    scenario_hash,
    worker_count,
)
from slopeflow.core import (  # noqa: E402
    ConfigError,
    Grid,
    SolverError,
    SourceFunction,
    UnsupportedRegimeError,
    require_linear_regime,
)
from slopeflow.greens import (  # noqa: E402
    closed_form_green,
    closed_form_max_slope,
    closed_form_unit_source,
    constant_diffusion_table,
    exp_weights,
    fixed_point_check,
    gap_lower_bound,
    green_solve,
    lipschitz_estimate,
    positivity_scan,
)
from slopeflow.linearize import build_diffusion, select_floor  # noqa: E402
from slopeflow.oracle import compare_profiles, solve_fd  # noqa: E402
from slopeflow.steady import solve_steady  # noqa: E402
from slopeflow.sweep import run_sweep, write_summary  # noqa: E402
from slopeflow.transient import h0_values, initial_state, run  # noqa: E402
from slopeflow.verify import SuiteConfig, run_suite  # noqa: E402

LOG_NAME = "run_log.txt"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_UNSUPPORTED = 3


@contextmanager
def log_to_file(log_path: Path):
    """Kieruje stdout/stderr równocześnie do konsoli i pliku."""
    log_path.parent.mkdir(parents=True, exist_ok=True)
    log_file = log_path.open("w", encoding="utf-8")

    class Tee:
        def __init__(self, original, file):
            self.original = original
            self.file = file

        def write(self, data):
            self.original.write(data)
            self.file.write(data)

        def flush(self):
            self.original.flush()
            self.file.flush()

    old_stdout, old_stderr = sys.stdout, sys.stderr
    sys.stdout, sys.stderr = Tee(sys.stdout, log_file), Tee(sys.stderr, log_file)
    try:
        yield log_path
    finally:
        sys.stdout.flush()
        sys.stderr.flush()
        sys.stdout, sys.stderr = old_stdout, old_stderr
        log_file.close()


def load_scenario(args):
    """Konfiguracja z pliku z nadpisaniami --grid/--seed/--out."""
    if not args.config:
        raise ConfigError("Wymagany argument --config <plik>")
    config = load_config(args.config)
    return config.with_overrides(n_cells=args.grid, seed=args.seed)


def build_grid(config) -> Grid:
    if config.grid.grading > 0:
        return Grid.graded(config.grid.n_cells, config.grid.grading)
    return Grid.uniform(config.grid.n_cells)


def banner(title: str, config, output_dir: Path):
    print("=" * 60)
    print(f"🌊 Slopeflow: {title}")
    print("=" * 60)
    print(f"📄 Scenariusz: {config.name} ({scenario_hash(config)})")
    spec = config.problem
    print(f"📐 p = {spec.p}, H = {spec.H}, φ = {spec.phi:.6g}")
    print(f"📐 ‖f‖₁ = {spec.source_l1:.6g}")
    print(f"📁 Output: {output_dir}")
    print("=" * 60)


def step_header(text: str):
    print(f"\n{text}")
    print("-" * 40)


# ============================================================
# Komendy
# ============================================================


def cmd_steady(args) -> int:
    """Komenda: rozwiązanie ustalone, solver referencyjny i ograniczenia."""
    config = load_scenario(args)
    output_dir = resolve_output_dir(config, args.out)
    spec = config.problem
    digest = scenario_hash(config)

    with log_to_file(output_dir / LOG_NAME):
        banner("problem ustalony", config, output_dir)
        warnings = []

        step_header("📐 KROK 1/4: Metoda strzałów")
        profile = solve_steady(spec, config.solver.shooter, build_grid(config))
        print(f"✅ s* = {profile.s_end:.12g}, κ = {profile.kappa:.12g}")
        print(f"   ‖u‖∞ = {profile.sup_norm:.6g}, min(u + H) = {profile.min_head:.6g}")
        if len(profile.roots) > 1:
            warnings.append(f"wiele pierwiastków strzału: {list(profile.roots)}")

        step_header("🔁 KROK 2/4: Solver referencyjny (Newton FD)")
        reference = solve_fd(spec, config.solver.fd)
        sup, l2 = compare_profiles(profile, reference)
        oracle_threshold = 5e-5 * (1.0 + profile.sup_norm)
        print(f"📊 ‖u_strzał - u_FD‖∞ = {sup:.3e} (próg {oracle_threshold:.1e})")

        step_header("📏 KROK 3/4: Ograniczenia a priori")
        diffusion = weights = diffusion_end = None
        floor_ok = derivative_ok = None
        if spec.p > 2:
            diffusion = build_diffusion(spec, profile)
            weights = exp_weights(diffusion, spec.lam)[:2]
            diffusion_end = float(diffusion.D[-1])
            floor, kind = select_floor(spec, profile.min_head)
            floor_ok = diffusion.min_value >= floor * (1.0 - 1e-12)
            print(f"📊 min D = {diffusion.min_value:.6g}")
            print(f"   ograniczenie {kind} = {floor:.6g}")
        bounds = build_bounds_report(
            spec, config.solver.hf_resolution, profile, diffusion_end
        )
        if not bounds.existence_ok:
            warnings.append("warunek istnienia ‖f‖₁ < H (sin φ)^(p-1) niespełniony")
        if spec.p > 2 and bounds.existence_ok:
            limits = derivative_bounds(spec, profile, diffusion_end)
            derivative_ok = limits.respected(profile.s_end, profile.du_sup_norm)

        checks = {
            "residual_ok": profile.residual_first_order
            <= 1e-8 * (1.0 + spec.source_l1),
            "oracle_ok": sup <= oracle_threshold,
            "sup_bound_ok": (profile.sup_norm <= bounds.sup_bound + 1e-9)
            if bounds.hf_holds
            else None,
            "no_touch_ok": (profile.min_head > 0) if bounds.hf_holds else None,
            "floor_ok": floor_ok,
            "derivative_ok": derivative_ok,
        }

        step_header("💾 KROK 4/4: Zapis wyników")
        golden = None
        if args.update_golden:
            update_golden(GOLDEN_DIR, digest, profile, diffusion, weights)
        else:
            golden = compare_golden(
                GOLDEN_DIR, digest, profile, diffusion=diffusion, weights=weights
            )
            if golden is not None:
                checks["golden_ok"] = golden["matches"]

        write_profile(output_dir / "steady.csv", profile)
        write_profile(output_dir / "oracle.csv", reference)
        write_json(output_dir / "bounds.json", bounds.to_json())
        report = {
            "scenario": config.name,
            "scenario_hash": digest,
            "s_end": profile.s_end,
            "kappa": profile.kappa,
            "roots": list(profile.roots),
            "sup_norm": profile.sup_norm,
            "sup_bound_ratio": (
                profile.sup_norm / bounds.sup_bound if bounds.sup_bound > 0 else None
            ),
            "min_head": profile.min_head,
            "residual_first_order": profile.residual_first_order,
            "oracle": {
                "n_cells": reference.grid.n_cells,
                "iterations": reference.iterations,
                "sup_distance": sup,
                "l2_distance": l2,
                "threshold": oracle_threshold,
                "residual_first_order": reference.residual_first_order,
            },
            "golden": golden,
            "checks": checks,
            "warnings": warnings,
        }
        write_json(output_dir / "report.json", report)

        failed = [name for name, ok in checks.items() if ok is False]
        print("\n" + "=" * 60)
        if failed:
            print(f"❌ Niespełnione: {', '.join(failed)}")
        else:
            print("✅ Wszystkie sprawdzenia spełnione")
        for warning in warnings:
            print(f"⚠️ {warning}")
        print("=" * 60)
    return EXIT_FAILURE if failed else EXIT_OK


def _synthetic_green(args, output_dir: Path, lam: float) -> dict:
    """Stałe D: porównanie z rozwiązaniami w postaci zamkniętej."""
    grid = Grid.uniform(args.grid or 256)
    D0 = args.d0
    table = constant_diffusion_table(D0, lam, grid)
    X, Y = np.meshgrid(grid.nodes, grid.nodes, indexing="ij")
    green_error = float(np.max(np.abs(table.G - closed_form_green(D0, lam, X, Y))))
    unit = green_solve(table, SourceFunction.constant(1.0))
    unit_error = float(
        np.max(np.abs(unit.u - closed_form_unit_source(D0, lam, grid.nodes)))
    )
    lip = lipschitz_estimate(table, samples=10_000, seed=args.seed or 0)
    write_exp_weights(output_dir / "exp_weights.csv", table)
    write_green_matrix(output_dir / "green.bin", table)
    print(f"📊 max |G - G_dokładne| = {green_error:.3e}")
    print(f"📊 max |u - u_dokładne| (f ≡ 1) = {unit_error:.3e}")
    print(f"📊 κ = {lip.kappa:.12g} (dokładnie 1/D0 = {closed_form_max_slope(D0):.12g})")
    return {
        "mode": "synthetic",
        "D0": D0,
        "lambda": lam,
        "n_cells": grid.n_cells,
        "green_error": green_error,
        "unit_source_error": unit_error,
        "lipschitz_kappa": lip.kappa,
        "lipschitz_exact": closed_form_max_slope(D0),
        "passed": green_error <= 1e-8,
    }


def cmd_green(args) -> int:
    """Komenda: linearyzacja, E±, funkcja Greena i punkt stały."""
    config = load_scenario(args)
    output_dir = resolve_output_dir(config, args.out)
    spec = config.problem

    with log_to_file(output_dir / LOG_NAME):
        banner("funkcja Greena", config, output_dir)
        require_linear_regime(spec.p)
        if args.synthetic:
            step_header("🧪 Tryb syntetyczny (stałe D)")
            report = _synthetic_green(args, output_dir, spec.lam)
            write_json(output_dir / "green_report.json", report)
            return EXIT_OK if report["passed"] else EXIT_FAILURE

        step_header("📐 KROK 1/3: Rozwiązanie ustalone")
        profile = solve_steady(spec, config.solver.shooter, build_grid(config))

        step_header("🧮 KROK 2/3: D(x), E± i G")
        fixed = fixed_point_check(spec, profile)
        table = fixed.table
        min_G, (gx, gy) = positivity_scan(table)
        gap_min, gap_bound = gap_lower_bound(table)
        lip = lipschitz_estimate(table, samples=10_000, seed=config.seed)
        print(f"📊 min G = {min_G:.6g} w ({gx:.4f}, {gy:.4f})")
        print(f"📊 κ Lipschitza = {lip.kappa:.6g}")
        print(f"   najgorszy iloraz = {lip.worst_ratio:.6f}")
        print(f"📊 ‖Gf - u‖∞ = {fixed.discrepancy:.3e}")

        step_header("💾 KROK 3/3: Zapis wyników")
        write_diffusion(output_dir / "diffusion.csv", fixed.diffusion)
        write_exp_weights(output_dir / "exp_weights.csv", table)
        write_green_matrix(output_dir / "green.bin", table)
        tolerance = 1e-5 if profile.grid.n_cells >= 2048 else 1e-4
        report = {
            "mode": "scenario",
            "scenario_hash": scenario_hash(config),
            "min_G": min_G,
            "min_G_at": [gx, gy],
            "gap_min": gap_min,
            "gap_lower_bound": gap_bound,
            "lipschitz_kappa": lip.kappa,
            "lipschitz_argmax": lip.argmax,
            "lipschitz_worst_ratio": lip.worst_ratio,
            "fixed_point_discrepancy": fixed.discrepancy,
            "fixed_point_tolerance": tolerance,
            "floor_used": fixed.diffusion.floor_used,
            "floor_kind": fixed.diffusion.floor_kind,
            "min_D": fixed.diffusion.min_value,
        }
        report["passed"] = (
            min_G > 0
            and lip.worst_ratio <= 1.0 + 1e-9
            and fixed.discrepancy <= tolerance
        )
        write_json(output_dir / "green_report.json", report)
    return EXIT_OK if report["passed"] else EXIT_FAILURE


def cmd_transient(args) -> int:
    """Komenda: przebieg nieustalony i relaksacja."""
    config = load_scenario(args)
    output_dir = resolve_output_dir(config, args.out)
    spec = config.problem
    section = config.transient

    with log_to_file(output_dir / LOG_NAME):
        banner("przebieg nieustalony", config, output_dir)

        steady = None
        H_minus, H_plus = spec.boundary_levels
        if H_minus == spec.H and H_plus == spec.H:
            step_header("📐 Profil ustalony do porównania")
            try:
                steady = solve_steady(spec, config.solver.shooter, build_grid(config))
            except SolverError as exc:
                print(f"⚠️ Brak profilu ustalonego: {exc}")
        elif section.h0.get("kind") == "steady":
            raise ConfigError("ĥ0 typu steady wymaga H_minus = H_plus = H")

        step_header("⏱️ Całkowanie w czasie")
        grid = Grid.uniform(args.grid or section.n_cells)
        state0 = initial_state(spec, grid, h0_values(spec, grid, section.h0, steady))
        snapshots_dir = output_dir / "snapshots"
        counter = itertools.count()

        def emit(state):
            write_snapshot(snapshots_dir, next(counter), state.grid.nodes, state.h_hat)

        summary = run(spec, state0, section.run_config(), steady, callback=emit)
        print(f"✅ Kroki: {summary.steps}, obcięta masa: {summary.clipped_mass:.3e}")
        if summary.final_sup_distance is not None:
            print(f"📊 ‖ĥ(T) - (u + H)‖∞ = {summary.final_sup_distance:.3e}")
        report = summary.to_json()
        report["scenario_hash"] = scenario_hash(config)
        report["snapshots"] = len(summary.snapshots)
        write_json(output_dir / "transient.json", report)
    return EXIT_OK


def cmd_verify(args) -> int:
    """Komenda: zestaw twierdzeń dla scenariusza albo wszystkich wbudowanych."""
    if args.all:
        configs = [
            c.with_overrides(n_cells=args.grid, seed=args.seed)
            for c in bundled_scenarios() + bundled_suite()
        ]
        output_dir = resolve_output_dir(configs[0], args.out)
    else:
        configs = [load_scenario(args)]
        output_dir = resolve_output_dir(configs[0], args.out)

    failed = []
    with log_to_file(output_dir / LOG_NAME):
        for index, config in enumerate(configs, start=1):
            banner(f"twierdzenia {index}/{len(configs)}", config, output_dir)
            suite = SuiteConfig(
                n_cells=config.grid.n_cells,
                hf_resolution=config.solver.hf_resolution,
                oracle_cells=config.solver.fd.n_cells,
                workers=worker_count(),
            )
            digest = scenario_hash(config)
            report = run_suite(
                config.problem,
                seed=config.seed,
                config=suite,
                grid=build_grid(config),
                scenario_hash=digest,
                shooter=config.solver.shooter,
            )
            print(report.table())
            name = "verify.json" if len(configs) == 1 else f"verify_{config.name}.json"
            write_json(output_dir / name, report.to_json())
            if not report.passed:
                failed.append(config.name)

        print("\n" + "=" * 60)
        if failed:
            print(f"❌ Niespełnione scenariusze: {', '.join(failed)}")
        else:
            print(f"✅ Wszystkie scenariusze ({len(configs)}) spełnione")
        print("=" * 60)
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_sweep(args) -> int:
    """Komenda: przegląd siatki (p, φ, amplituda)."""
    config = load_scenario(args)
    output_dir = resolve_output_dir(config, args.out)

    with log_to_file(output_dir / LOG_NAME):
        banner("przegląd parametrów", config, output_dir)
        rows = run_sweep(config, workers=worker_count())
        path = write_summary(output_dir / "sweep_summary.csv", rows)
        bad = [row for row in rows if row["status"] != "ok" or not row["passed"]]
        print(f"💾 {len(rows)} wierszy → {path}")
        for row in bad:
            detail = f"{row['status']} {row['failed_checks']} {row['error']}"
            print(f"❌ #{row['index']}: {detail}")
    return EXIT_FAILURE if bad else EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Slopeflow - wody gruntowe nad nachylonym dnem",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Przykłady użycia:

  # Rozwiązanie ustalone ze scenariusza wzorcowego:
  python aquifer.py steady --config resources/scenarios/golden.json

  # Aktualizacja pliku wzorcowego:
  python aquifer.py steady --config resources/scenarios/golden.json --update-golden

  # Funkcja Greena dla stałego D (porównanie z postacią zamkniętą):
  python aquifer.py green --config resources/scenarios/golden.json --synthetic

  # Wszystkie wbudowane scenariusze:
  SLOPEFLOW_THREADS=4 python aquifer.py verify --all --out results/verify
        """,
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="Plik scenariusza JSON")
    common.add_argument("--out", "-o", help="Katalog wyników (nadpisuje SLOPEFLOW_OUT)")
    common.add_argument("--grid", "-g", type=int, help="Liczba komórek siatki")
    common.add_argument("--seed", "-s", type=int, help="Ziarno losowych przeglądów")

    subparsers = parser.add_subparsers(dest="command", help="Dostępne komendy")

    p_steady = subparsers.add_parser(
        "steady", parents=[common], help="Problem ustalony"
    )
    p_steady.add_argument(
        "--update-golden", action="store_true", help="Zapisz profil jako wzorcowy"
    )
    p_steady.set_defaults(func=cmd_steady)

    p_green = subparsers.add_parser("green", parents=[common], help="Funkcja Greena")
    p_green.add_argument(
        "--synthetic", action="store_true", help="Stałe D zamiast linearyzacji"
    )
    p_green.add_argument(
        "--d0", type=float, default=1.0, help="Stałe D w trybie syntetycznym"
    )
    p_green.set_defaults(func=cmd_green)

    p_transient = subparsers.add_parser(
        "transient", parents=[common], help="Przebieg nieustalony"
    )
    p_transient.set_defaults(func=cmd_transient)

    p_verify = subparsers.add_parser(
        "verify", parents=[common], help="Zestaw twierdzeń"
    )
    p_verify.add_argument(
        "--all", action="store_true", help="Wszystkie scenariusze wbudowane"
    )
    p_verify.set_defaults(func=cmd_verify)

    p_sweep = subparsers.add_parser(
        "sweep", parents=[common], help="Przegląd parametrów"
    )
    p_sweep.set_defaults(func=cmd_sweep)

    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return EXIT_FAILURE

    try:
        return args.func(args)
    except UnsupportedRegimeError as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except ConfigError as exc:
        print(f"❌ Błąd konfiguracji: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"❌ Błąd solvera: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (ValueError, MemoryError) as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
