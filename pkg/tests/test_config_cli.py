"""
Testy konfiguracji, przeglądu parametrów, zapisu wyników i linii poleceń.
"""

import csv
import json
import math
from dataclasses import replace

import numpy as np
import pytest

import aquifer
from slopeflow.artifacts import (
    compare_golden,
    golden_path,
    read_green_matrix,
    update_golden,
    write_green_matrix,
    write_json,
)
from slopeflow.config import (
    GOLDEN_DIR,
    OUT_ENV,
    SCENARIOS_DIR,
    THREADS_ENV,
    SweepSection,
    bundled_scenarios,
    bundled_suite,
    load_config,
    parse_config,
    resolve_output_dir,
    scenario_hash,
    worker_count,
)
from slopeflow.core import ConfigError, Grid, SourceFunction
from slopeflow.greens import constant_diffusion_table, exp_weights
from slopeflow.linearize import build_diffusion
from slopeflow.steady import solve_steady
from slopeflow.sweep import (
    SUMMARY_FIELDS,
    point_config,
    run_sweep,
    sweep_points,
    write_summary,
)

PROBLEM = {"p": 3.0, "H": 1.0, "phi": 0.3, "source": 0.02}


def scenario(**sections) -> dict:
    data = {"name": "tiny", "problem": dict(PROBLEM)}
    data.update(sections)
    return data


@pytest.fixture
def scenario_file(tmp_path):
    """Mały scenariusz zapisany na dysku."""

    def write(data: dict, name: str = "scenario.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return write


# ============================================================
# Parsowanie konfiguracji
# ============================================================


class TestParseConfig:
    def test_defaults(self):
        config = parse_config(scenario())
        assert config.grid.n_cells == 2048
        assert config.solver.hf_resolution == 256
        assert config.transient.h0 == {"kind": "constant"}
        assert config.sweep == SweepSection()
        assert config.problem.source_l1 == pytest.approx(0.04)

    @pytest.mark.parametrize(
        "data, path",
        [
            (scenario(solver={"fd": {"tol": 1e-9}}), "solver.fd.tol"),
            (scenario(grid={"cells": 64}), "grid.cells"),
            (scenario(extra=1), "extra"),
            (
                scenario(transient={"h0": {"kind": "constant", "x": [0]}}),
                "transient.h0.x",
            ),
        ],
    )
    def test_unknown_key_reports_path(self, data, path):
        with pytest.raises(ConfigError, match=f"'{path}'"):
            parse_config(data)

    @pytest.mark.parametrize("key", ["p", "H", "phi", "source"])
    def test_missing_problem_key(self, key):
        data = scenario()
        del data["problem"][key]
        with pytest.raises(ConfigError, match=f"problem.{key}"):
            parse_config(data)

    def test_missing_problem_section(self):
        with pytest.raises(ConfigError):
            parse_config({"name": "x"})

    @pytest.mark.parametrize(
        "sections",
        [
            {"grid": {"n_cells": 8}},
            {"grid": {"grading": 1.5}},
            {"solver": {"hf_resolution": 32}},
            {"solver": {"fd": {"n_cells": 8}}},
            {"seed": "1"},
            {"seed": True},
            {"transient": {"cfl_safety": 0.9}},
            {"transient": {"h0": {"kind": "wave"}}},
            {"transient": {"h0": {"kind": "samples", "x": [0.0, 1.0], "h": [1.0]}}},
            {"sweep": {"p": []}},
            {"sweep": {"phi": 0.3}},
            {"sweep": {"amplitude": ["duża"]}},
            {"sweep": {"p": [None]}},
        ],
    )
    def test_invalid_values(self, sections):
        with pytest.raises(ConfigError):
            parse_config(scenario(**sections))

    def test_invalid_problem_values(self):
        data = scenario()
        data["problem"]["phi"] = 2.0
        with pytest.raises(ConfigError):
            parse_config(data)
        data["problem"] = dict(PROBLEM, source="rain")
        with pytest.raises(ConfigError):
            parse_config(data)
        for piece in (
            {"interval": ["x", -0.5], "coeffs": [0.01]},
            {"interval": [-1.0, 1.0], "coeffs": [{"c": 1}]},
            {"interval": [-1.0], "coeffs": [0.01]},
        ):
            data["problem"] = dict(PROBLEM, source=[piece])
            with pytest.raises(ConfigError):
                parse_config(data)

    def test_piecewise_source_and_sweep(self):
        source = [
            {"interval": [-1.0, 0.0], "coeffs": [0.0, 0.1]},
            {"interval": [0.0, 1.0], "coeffs": [0.05]},
        ]
        data = scenario(sweep={"p": [3], "amplitude": [0.2, 0.4]})
        data["problem"]["source"] = source
        config = parse_config(data)
        assert config.problem.source.to_json() == source
        assert config.sweep.p == (3.0,)
        assert config.sweep.amplitude == (0.2, 0.4)
        assert config.sweep.phi == SweepSection.phi

    def test_load_config_errors(self, tmp_path, scenario_file):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(broken)
        assert load_config(scenario_file(scenario())).name == "tiny"

    def test_overrides(self):
        config = parse_config(scenario())
        changed = config.with_overrides(n_cells=64, seed=7, outputs="elsewhere")
        assert (changed.grid.n_cells, changed.seed, changed.outputs) == (
            64,
            7,
            "elsewhere",
        )
        with pytest.raises(ConfigError):
            config.with_overrides(n_cells=4)


# ============================================================
# Tożsamość scenariusza i środowisko
# ============================================================


class TestScenarioHash:
    def test_format_and_stability(self):
        config = parse_config(scenario())
        digest = scenario_hash(config)
        assert len(digest) == 16
        int(digest, 16)
        assert scenario_hash(parse_config(scenario())) == digest

    def test_depends_on_problem_and_grid_only(self):
        config = parse_config(scenario())
        digest = scenario_hash(config)
        assert scenario_hash(config.with_overrides(n_cells=512)) != digest
        assert scenario_hash(config.with_overrides(seed=3)) == digest
        assert scenario_hash(replace(config, name="other")) == digest
        data = scenario()
        data["problem"]["phi"] = 0.31
        assert scenario_hash(parse_config(data)) != digest


class TestEnvironment:
    def test_output_dir_precedence(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.delenv(OUT_ENV, raising=False)
        config = parse_config(scenario(outputs="from-config"))
        assert resolve_output_dir(config) == tmp_path / "from-config"
        monkeypatch.setenv(OUT_ENV, str(tmp_path / "from-env"))
        assert resolve_output_dir(config) == tmp_path / "from-env"
        assert resolve_output_dir(config, "from-cli") == tmp_path / "from-cli"

    def test_worker_count(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert worker_count() == 3
        monkeypatch.delenv(THREADS_ENV)
        assert worker_count() >= 1

    @pytest.mark.parametrize("raw", ["0", "-2", "many"])
    def test_invalid_worker_count(self, monkeypatch, raw):
        monkeypatch.setenv(THREADS_ENV, raw)
        with pytest.raises(ConfigError):
            worker_count()


class TestBundled:
    def test_suite_grid(self):
        configs = bundled_suite()
        assert len(configs) == 27
        assert len({c.name for c in configs}) == 27
        for config in configs:
            spec = config.problem
            assert spec.source_l1 == pytest.approx(0.5 * spec.H * spec.lam, rel=1e-12)
            assert spec.source_l1 < spec.H * spec.lam
            assert spec.steady_source.is_nonnegative()

    def test_scenario_files(self):
        configs = bundled_scenarios()
        names = {c.name for c in configs}
        assert len(configs) == len(list(SCENARIOS_DIR.glob("*.json")))
        assert {"golden", "zero_source", "transient", "sweep"} <= names


# ============================================================
# Przegląd parametrów
# ============================================================


def _sweep_config(source=0.05, **sweep):
    data = scenario(
        grid={"n_cells": 256},
        solver={"fd": {"n_cells": 256}, "hf_resolution": 64},
        sweep=sweep or {"p": [2.5, 3.0], "phi": [0.1, 0.3], "amplitude": [0.25]},
    )
    data["problem"]["source"] = source
    return parse_config(data)


class TestSweep:
    def test_points_are_p_major(self):
        points = sweep_points(_sweep_config())
        assert [(pt.p, pt.phi) for pt in points] == [
            (2.5, 0.1),
            (2.5, 0.3),
            (3.0, 0.1),
            (3.0, 0.3),
        ]
        assert [pt.index for pt in points] == [0, 1, 2, 3]

    def test_point_scales_source_to_amplitude(self):
        config = _sweep_config()
        for point in sweep_points(config):
            spec = point_config(config, point).problem
            assert spec.p == point.p and spec.phi == point.phi
            expected = point.amplitude * spec.H * math.sin(point.phi) ** (point.p - 1)
            assert spec.source_l1 == pytest.approx(expected, rel=1e-12)

    def test_zero_source_rejected(self):
        config = _sweep_config(source=0.0)
        with pytest.raises(ConfigError):
            point_config(config, sweep_points(config)[0])
        rows = run_sweep(config, workers=1)
        assert all(row["status"] == "ConfigError" for row in rows)

    def test_rows_in_enumeration_order(self, tmp_path):
        config = _sweep_config(p=[3.0], phi=[0.3], amplitude=[0.25, 0.5])
        rows = run_sweep(config, workers=1)
        assert [row["index"] for row in rows] == [0, 1]
        for row in rows:
            assert row["status"] == "ok", row["error"]
            assert row["n_pass"] + row["n_fail"] + row["n_skip"] == 16
        assert rows[0]["scenario_hash"] != rows[1]["scenario_hash"]

        path = write_summary(tmp_path / "sweep_summary.csv", rows)
        with open(path, encoding="utf-8") as f:
            reader = csv.DictReader(f)
            assert tuple(reader.fieldnames) == SUMMARY_FIELDS
            read = list(reader)
        assert [r["amplitude"] for r in read] == ["0.25", "0.5"]


# ============================================================
# Zapis wyników
# ============================================================


class TestArtifacts:
    def test_json_is_canonical(self, tmp_path):
        a = write_json(tmp_path / "a.json", {"b": np.float64(0.1), "a": np.arange(2)})
        b = write_json(tmp_path / "b.json", {"a": [0, 1], "b": 0.1})
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text(encoding="utf-8").endswith("}\n")

    def test_golden_profile(self, tmp_path, small_spec):
        profile = solve_steady(small_spec, grid=Grid.uniform(64))
        assert compare_golden(tmp_path, "abc", profile) is None
        update_golden(tmp_path, "abc", profile)
        assert golden_path(tmp_path, "abc").exists()
        result = compare_golden(tmp_path, "abc", profile)
        assert result["matches"] and result["max_abs_diff"] == 0.0

        other = solve_steady(
            small_spec.with_source(SourceFunction.constant(0.03)), grid=Grid.uniform(64)
        )
        assert not compare_golden(tmp_path, "abc", other)["matches"]

    def test_golden_tables(self, tmp_path, small_spec):
        profile = solve_steady(small_spec, grid=Grid.uniform(64))
        diffusion = build_diffusion(small_spec, profile)
        weights = exp_weights(diffusion, small_spec.lam)[:2]
        update_golden(tmp_path, "abc", profile, diffusion, weights)
        assert golden_path(tmp_path, "abc", "D").exists()
        assert golden_path(tmp_path, "abc", "E").exists()
        result = compare_golden(
            tmp_path, "abc", profile, diffusion=diffusion, weights=weights
        )
        assert result["matches"]
        assert result["tables"]["E"]["max_abs_diff"] == 0.0

        golden_path(tmp_path, "abc", "D").unlink()
        missing = compare_golden(tmp_path, "abc", profile, diffusion=diffusion)
        assert not missing["matches"]
        assert missing["tables"]["D"]["max_abs_diff"] is None

    def test_green_matrix_layout(self, tmp_path):
        table = constant_diffusion_table(1.0, 0.1, Grid.uniform(16))
        path = write_green_matrix(tmp_path / "green.bin", table)
        assert path.stat().st_size == 17 * 17 * 8
        header = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        assert header["n"] == 17 and header["dtype"] == "<f8"
        np.testing.assert_array_equal(read_green_matrix(path), table.G)


# ============================================================
# Linia poleceń
# ============================================================


class TestCli:
    def test_no_command(self):
        assert aquifer.main([]) == aquifer.EXIT_FAILURE

    def test_missing_config(self, tmp_path):
        assert aquifer.main(["steady", "--out", str(tmp_path)]) == aquifer.EXIT_CONFIG

    def test_invalid_config(self, tmp_path, scenario_file):
        path = scenario_file(scenario(solver={"fd": {"tol": 1.0}}))
        code = aquifer.main(["steady", "-c", str(path), "-o", str(tmp_path / "out")])
        assert code == aquifer.EXIT_CONFIG

    @pytest.mark.parametrize(
        "problem",
        [
            {"source": [{"interval": ["x", -0.5], "coeffs": [0.01]}]},
            {"source": [{"interval": [-1.0, 1.0], "coeffs": ["mało"]}]},
        ],
    )
    def test_non_numeric_source_is_config_error(self, tmp_path, scenario_file, problem):
        data = scenario()
        data["problem"].update(problem)
        path = scenario_file(data)
        code = aquifer.main(["steady", "-c", str(path), "-o", str(tmp_path / "out")])
        assert code == aquifer.EXIT_CONFIG

    def test_non_numeric_sweep_is_config_error(self, tmp_path, scenario_file):
        path = scenario_file(scenario(sweep={"phi": [0.3, "stromo"]}))
        code = aquifer.main(["sweep", "-c", str(path), "-o", str(tmp_path / "out")])
        assert code == aquifer.EXIT_CONFIG

    @pytest.mark.parametrize("extra", [[], ["--synthetic", "--grid", "64"]])
    def test_green_rejects_sublinear_regime(self, tmp_path, extra):
        code = aquifer.main(
            [
                "green",
                *extra,
                "--config",
                str(SCENARIOS_DIR / "sublinear.json"),
                "--out",
                str(tmp_path),
            ]
        )
        assert code == aquifer.EXIT_UNSUPPORTED

    def test_green_synthetic(self, tmp_path):
        code = aquifer.main(
            [
                "green",
                "--synthetic",
                "--config",
                str(SCENARIOS_DIR / "golden.json"),
                "--grid",
                "64",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == aquifer.EXIT_OK
        report = json.loads((tmp_path / "green_report.json").read_text("utf-8"))
        assert report["passed"] and report["n_cells"] == 64
        assert report["lipschitz_kappa"] == pytest.approx(1.0, rel=1e-9)
        assert read_green_matrix(tmp_path / "green.bin").shape == (65, 65)
        assert (tmp_path / "exp_weights.csv").exists()
        assert (tmp_path / aquifer.LOG_NAME).exists()

    def test_steady_writes_deterministic_report(self, tmp_path, scenario_file):
        path = scenario_file(
            scenario(
                grid={"n_cells": 256},
                solver={"fd": {"n_cells": 256}, "hf_resolution": 64},
            )
        )
        outputs = [tmp_path / "first", tmp_path / "second"]
        for out in outputs:
            assert aquifer.main(["steady", "-c", str(path), "-o", str(out)]) == 0
        for name in ("steady.csv", "oracle.csv", "bounds.json", "run_log.txt"):
            assert (outputs[0] / name).exists()
        first, second = (out / "report.json" for out in outputs)
        assert first.read_bytes() == second.read_bytes()
        report = json.loads(first.read_text("utf-8"))
        assert report["golden"] is None
        assert all(ok is not False for ok in report["checks"].values())

    def test_transient_writes_snapshots(self, tmp_path, scenario_file):
        data = scenario(
            grid={"n_cells": 256},
            transient={"t_end": 0.01, "snapshot_every": 0.005, "n_cells": 32},
        )
        data["problem"]["phi"] = 0.2
        path = scenario_file(data)
        code = aquifer.main(["transient", "-c", str(path), "-o", str(tmp_path)])
        assert code == aquifer.EXIT_OK
        snapshots = sorted((tmp_path / "snapshots").glob("snapshot_*.csv"))
        assert [p.name for p in snapshots] == [
            "snapshot_0000.csv",
            "snapshot_0001.csv",
            "snapshot_0002.csv",
        ]
        report = json.loads((tmp_path / "transient.json").read_text("utf-8"))
        assert report["snapshots"] == 3
        assert report["final_sup_distance"] is not None


# ============================================================
# Scenariusz wzorcowy
# ============================================================


def test_golden_files_are_committed():
    digest = scenario_hash(load_config(SCENARIOS_DIR / "golden.json"))
    for table in ("", "D", "E"):
        path = golden_path(GOLDEN_DIR, digest, table)
        assert path.exists(), path.name
        assert path.read_text(encoding="utf-8").count("\n") == 2050


@pytest.mark.slow
def test_golden_scenario_matches_stored_tables():
    config = load_config(SCENARIOS_DIR / "golden.json")
    spec = config.problem
    profile = solve_steady(spec, grid=Grid.uniform(config.grid.n_cells))
    diffusion = build_diffusion(spec, profile)
    weights = exp_weights(diffusion, spec.lam)[:2]
    result = compare_golden(
        GOLDEN_DIR,
        scenario_hash(config),
        profile,
        diffusion=diffusion,
        weights=weights,
    )
    assert result is not None
    assert result["matches"], result["tables"]
    assert set(result["tables"]) == {"u", "D", "E"}
