import hashlib
import json
from pathlib import Path

import pytest

from igdist import derive_seed, load_config
from igdist.cli import main as cli_main
from igdist.config import config_from_dict
from igdist.errors import ConfigError, PopulationCapError
from igdist.runner import parallel_map, run
from igdist.seeding import rng_for

GOLDEN = json.loads((Path(__file__).parent / "golden_seeds.json").read_text())

MINIMAL = {
    "model": {"n": [1000], "m": [1000], "P": [[0.002]]},
    "seed": 4242,
    "reps": {"graph": 40, "pool": 60, "bp": 200},
    "horizon": 6,
    "depth": 3,
}


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(123, "graph", 7) == derive_seed(123, "graph", 7)

    def test_replicates_distinct(self):
        seeds = {derive_seed(0, "graph", r) for r in range(10_000)}
        assert len(seeds) == 10_000

    def test_tags_distinct(self):
        assert derive_seed(0, "graph", 0) != derive_seed(0, "bp", 0)

    def test_golden_values(self):
        assert derive_seed(0, "graph", 0) == GOLDEN["derive_seed(0, 'graph', 0)"]
        assert derive_seed(0, "graph", 1) == GOLDEN["derive_seed(0, 'graph', 1)"]
        assert derive_seed(1, "graph", 0) == GOLDEN["derive_seed(1, 'graph', 0)"]
        assert derive_seed(0, "bp", 0) == GOLDEN["derive_seed(0, 'bp', 0)"]

    def test_negative_replicate_rejected(self):
        with pytest.raises(ValueError):
            derive_seed(0, "graph", -1)

    def test_rng_for_streams(self):
        a = rng_for(5, "x", 0).random(4)
        b = rng_for(5, "x", 0).random(4)
        c = rng_for(5, "x", 1).random(4)
        assert (a == b).all() and (a != c).any()


class TestConfig:
    def test_minimal_valid(self, tmp_path):
        cfg = load_config(write_config(tmp_path, MINIMAL))
        assert cfg.seed == 4242
        assert cfg.k1 == 0 and cfg.k2 == 0
        assert cfg.graph_reps == 40

    def test_seed_required(self, tmp_path):
        doc = {k: v for k, v in MINIMAL.items() if k != "seed"}
        with pytest.raises(ConfigError, match="seed required"):
            load_config(write_config(tmp_path, doc))

    def test_exactly_one_model_block(self, tmp_path):
        doc = dict(MINIMAL)
        doc["rank1"] = {"alpha": [0.01], "beta": [1.0], "n": [100], "m": [100]}
        with pytest.raises(ConfigError, match="exactly one model block"):
            load_config(write_config(tmp_path, doc))
        doc = {k: v for k, v in MINIMAL.items() if k != "model"}
        with pytest.raises(ConfigError, match="exactly one model block"):
            load_config(write_config(tmp_path, doc))

    def test_unknown_keys_rejected(self, tmp_path):
        doc = dict(MINIMAL)
        doc["sneaky"] = 1
        with pytest.raises(ConfigError, match="unknown config keys"):
            load_config(write_config(tmp_path, doc))
        doc = dict(MINIMAL)
        doc["model"] = dict(doc["model"], extra=3)
        with pytest.raises(ConfigError, match="unknown model keys"):
            load_config(write_config(tmp_path, doc))

    def test_parse_error_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"model": {,}')
        with pytest.raises(ConfigError, match="line 1"):
            load_config(path)

    def test_invalid_model_rejected(self, tmp_path):
        doc = dict(MINIMAL)
        doc["model"] = {"n": [1000], "m": [1], "P": [[0.002]]}
        with pytest.raises(ConfigError, match="m_1"):
            load_config(write_config(tmp_path, doc))

    def test_k_range(self):
        doc = dict(MINIMAL)
        doc["k1"] = 2
        with pytest.raises(ConfigError, match="k1/k2"):
            config_from_dict(doc)

    def test_rank1_block(self):
        cfg = config_from_dict(
            {
                "rank1": {
                    "alpha": [0.005, 0.004],
                    "beta": [1.0],
                    "n": [200, 300],
                    "m": [500],
                },
                "seed": 1,
            }
        )
        assert cfg.rank1 is not None
        assert cfg.params.K == 2

    def test_bad_reps(self):
        doc = dict(MINIMAL)
        doc["reps"] = {"graph": 0}
        with pytest.raises(ConfigError, match="reps.graph"):
            config_from_dict(doc)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")


class TestParallelMap:
    def test_order_preserved(self):
        args = list(range(40))
        assert parallel_map(_square, args, 1) == [a * a for a in args]
        assert parallel_map(_square, args, 4) == [a * a for a in args]


def _square(x):
    return x * x


class TestRun:
    def test_spectral_json_values(self, tmp_path):
        cfg = load_config(write_config(tmp_path, MINIMAL))
        out = run("spectral", cfg, out_dir=tmp_path / "out")
        doc = json.loads((out / "spectral.json").read_text())
        assert doc["tau"] == pytest.approx(4.0, rel=1e-10)
        assert doc["kappa"] == pytest.approx(4.0 / 3.0, rel=1e-10)
        assert doc["i0"] == 4
        assert doc["phi_n"] == pytest.approx(0.256, rel=1e-10)
        idents = (out / "identities.csv").read_text().splitlines()
        assert idents[0] == "identity,residual"
        assert all(float(line.split(",")[1]) < 1e-10 for line in idents[1:])

    def test_compare_with_zero_probability_model(self, tmp_path):
        doc = dict(MINIMAL)
        doc["model"] = {"n": [50], "m": [40], "P": [[0.0]]}
        cfg = load_config(write_config(tmp_path, doc))
        out = run("compare", cfg, out_dir=tmp_path / "out")
        lines = (out / "compare.csv").read_text().splitlines()
        assert len(lines) == 2
        row = lines[1].split(",")
        assert row[0] == "inf"
        assert float(row[1]) == 1.0 and float(row[2]) == 1.0
        assert float(row[3]) == 0.0

    def test_rerun_byte_identical(self, tmp_path):
        cfg = load_config(write_config(tmp_path, MINIMAL))
        out1 = run("compare", cfg, out_dir=tmp_path / "a")
        out2 = run("compare", cfg, out_dir=tmp_path / "b")
        for name in (
            "distances.csv", "wpool_a.csv", "wpool_b.csv", "survival.csv",
            "approx_law.csv", "compare.csv",
        ):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_manifest_lists_outputs_with_hashes(self, tmp_path):
        cfg = load_config(write_config(tmp_path, MINIMAL))
        out = run("graph-dist", cfg, out_dir=tmp_path / "out")
        manifest = json.loads((out / "manifest.json").read_text())
        names = {o["path"] for o in manifest["outputs"]}
        assert names == {"distances.csv"}
        for entry in manifest["outputs"]:
            digest = hashlib.sha256((out / entry["path"]).read_bytes()).hexdigest()
            assert digest == entry["sha256"]
        assert "graph-dist" in manifest["seeds"]

    def test_partial_outputs_removed_on_failure(self, tmp_path):
        doc = dict(MINIMAL)
        doc["model"] = {"n": [1000], "m": [1000], "P": [[0.02]]}  # tau = 400
        doc["population_cap"] = 5000
        doc["horizon"] = 10
        cfg = load_config(write_config(tmp_path, doc))
        with pytest.raises(PopulationCapError):
            run("bp", cfg, out_dir=tmp_path / "out")
        leftovers = list((tmp_path / "out").glob("*.csv"))
        assert leftovers == []

    def test_unknown_subcommand(self, tmp_path):
        cfg = load_config(write_config(tmp_path, MINIMAL))
        with pytest.raises(ConfigError, match="unknown subcommand"):
            run("frobnicate", cfg)

    def test_trajectory_csv_shape(self, tmp_path):
        cfg = load_config(write_config(tmp_path, MINIMAL))
        out = run("bp", cfg, out_dir=tmp_path / "out")
        lines = (out / "trajectory.csv").read_text().splitlines()
        assert lines[0] == "generation,side,type,count"
        gen0 = lines[1].split(",")
        assert gen0 == ["0", "X", "1", "1"]
        sides = {line.split(",")[1] for line in lines[1:]}
        assert sides == {"X", "Y"}


class TestCli:
    def test_success_exit_zero(self, tmp_path, capsys):
        path = write_config(tmp_path, MINIMAL)
        code = cli_main(
            ["spectral", "--config", str(path), "--out", str(tmp_path / "o")]
        )
        assert code == 0
        assert "spectral" in capsys.readouterr().out

    def test_config_error_exit_two(self, tmp_path, capsys):
        doc = {k: v for k, v in MINIMAL.items() if k != "seed"}
        path = write_config(tmp_path, doc)
        code = cli_main(["spectral", "--config", str(path)])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_runtime_error_exit_three(self, tmp_path, capsys):
        doc = dict(MINIMAL)
        doc["model"] = {"n": [1000], "m": [1000], "P": [[0.02]]}
        doc["population_cap"] = 5000
        path = write_config(tmp_path, doc)
        code = cli_main(
            ["bp", "--config", str(path), "--out", str(tmp_path / "o")]
        )
        assert code == 3
        assert "population cap" in capsys.readouterr().err

    def test_workers_flag_does_not_change_results(self, tmp_path):
        path = write_config(tmp_path, MINIMAL)
        assert cli_main(
            ["graph-dist", "--config", str(path), "--out", str(tmp_path / "w1"),
             "--workers", "1"]
        ) == 0
        assert cli_main(
            ["graph-dist", "--config", str(path), "--out", str(tmp_path / "w8"),
             "--workers", "8"]
        ) == 0
        assert (tmp_path / "w1" / "distances.csv").read_bytes() == (
            tmp_path / "w8" / "distances.csv"
        ).read_bytes()
