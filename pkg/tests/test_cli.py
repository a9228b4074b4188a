import csv
import json
from pathlib import Path

import pytest

from trianglet import cli
from trianglet.config import ConfigError, apply_override, build_scenario, load_config
from trianglet.errors import NumericalIntegrityError
from trianglet.protocol import EventTable

SMALL = {
    "seed": 42,
    "scenario": {"kind": "paper_like"},
    "samples": {"n_ac": 4000, "n_bc": 4000, "n_tables": [1500, 1500, 1500, 1500]},
    "grid": {"n_eps1": 4, "n_eps2": 4},
    "tomography": {"shots_per_setting": 2000, "bootstrap": 3},
    "lhv_fuzz": {"n_models": 20, "max_k": 2},
    "misalign": {"n_points": 8},
    "annotations": {"pump_wavelength_nm": 772.3},
}

OUTPUTS = {
    "distribution": ["distribution.csv"],
    "sample": [f"{n}.csv" for n in cli.TABLE_FILES],
    "sweep": ["sweep.csv"],
    "mutual-info": ["mutual_info.csv"],
    "pvalue": ["pvalue.json"],
    "tomography": ["tomography_counts.csv", "reconstruction.json"],
    "lhv-fuzz": ["lhv_fuzz.json"],
    "misalign": ["misalign.csv"],
}


def write_config(tmp_path, doc=SMALL, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def run(cfg_path, out, *extra):
    return cli.main([extra[0] if extra else "distribution", "--config", str(cfg_path), "--out", str(out),
                     *extra[1:]])


class TestConfig:
    def test_override_parsing(self):
        doc = {}
        apply_override(doc, "grid.n_eps1=7")
        apply_override(doc, "scenario.kind=ideal")
        assert doc == {"grid": {"n_eps1": 7}, "scenario": {"kind": "ideal"}}

    def test_override_needs_equals(self):
        with pytest.raises(ConfigError):
            apply_override({}, "grid.n_eps1")

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, {"bogus": 1}))

    def test_hash_ignores_output_dir(self, tmp_path):
        p = write_config(tmp_path)
        _, h1 = load_config(p, output_dir="a")
        _, h2 = load_config(p, output_dir="b")
        _, h3 = load_config(p, seed=7)
        assert h1 == h2 != h3

    def test_ideal_rejects_physical_keys(self, tmp_path):
        cfg, _ = load_config(write_config(tmp_path, {"scenario": {"kind": "ideal", "r": 0.4}}))
        with pytest.raises(ConfigError):
            build_scenario(cfg)

    def test_inconsistent_r_theta(self, tmp_path):
        doc = {"scenario": {"kind": "physical", "r": 0.3, "theta": 38.17}}
        cfg, _ = load_config(write_config(tmp_path, doc))
        with pytest.raises(ConfigError, match="inconsistent"):
            build_scenario(cfg)

    def test_shipped_configs_validate(self):
        root = Path(__file__).resolve().parents[1] / "configs"
        for p in sorted(root.glob("*.json")):
            cfg, _ = load_config(p)
            build_scenario(cfg)


class TestSubcommands:
    @pytest.mark.parametrize("sub", sorted(OUTPUTS))
    def test_exit_and_artifacts(self, tmp_path, sub):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert run(cfg, out, sub) == 0
        for name in OUTPUTS[sub]:
            assert (out / name).is_file()
        manifest = json.loads((out / f"{sub}.manifest.json").read_text())
        assert set(manifest["artifacts"]) == set(OUTPUTS[sub])
        assert manifest["seed"] == 42 and manifest["exit_code"] == 0
        assert manifest["annotations"] == {"pump_wavelength_nm": 772.3}

    def test_match_consumes_sample(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert run(cfg, out, "sample") == 0
        assert run(cfg, out, "match") == 0
        events = EventTable.from_csv(out / "events.csv")
        summary = json.loads((out / "match_summary.json").read_text())
        assert summary["events"] == len(events) == 4000 and summary["dropped_pairs"] == 0

    def test_match_partial(self, tmp_path):
        doc = dict(SMALL, samples={"n_ac": 4000, "n_bc": 4000, "n_tables": [500, 500, 500, 500]})
        cfg = write_config(tmp_path, doc)
        out = tmp_path / "out"
        assert run(cfg, out, "sample") == 0
        assert run(cfg, out, "match") == 3
        summary = json.loads((out / "match_summary.json").read_text())
        assert summary["dropped_pairs"] > 0

    def test_match_missing_input(self, tmp_path):
        assert run(write_config(tmp_path), tmp_path / "empty", "match") == 1

    def test_unknown_config_key(self, tmp_path):
        cfg = write_config(tmp_path, {"scenario": {"kind": "ideal"}, "extra": True})
        assert run(cfg, tmp_path / "o", "distribution") == 1

    def test_bad_override_value(self, tmp_path):
        cfg = write_config(tmp_path)
        assert run(cfg, tmp_path / "o", "sweep", "--set", "grid.n_eps1=-3") == 1

    def test_numerical_error_exit(self, tmp_path, monkeypatch):
        def boom(run):
            raise NumericalIntegrityError("probability out of range")
        monkeypatch.setitem(cli.COMMANDS, "distribution", boom)
        assert run(write_config(tmp_path), tmp_path / "o", "distribution") == 2

    def test_set_override(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "o"
        assert run(cfg, out, "sweep", "--set", "grid.points=[[1.0, 1.0]]") == 0
        rows = list(csv.DictReader((out / "sweep.csv").open()))
        assert len(rows) == 1 and float(rows[0]["eps1"]) == 1.0

    def test_pvalue_from_config(self, tmp_path):
        doc = dict(SMALL, pvalue={"n": 12045, "c": 8481, "beta_win": 0.5, "eps1": 1.0, "eps2": 1.0})
        out = tmp_path / "o"
        assert run(write_config(tmp_path, doc), out, "pvalue") == 0
        res = json.loads((out / "pvalue.json").read_text())
        assert res["log10_pvalue_exact"] == pytest.approx(-450.7161, abs=1e-3)

    def test_misalign_needs_pdl(self, tmp_path):
        cfg = write_config(tmp_path, {"scenario": {"kind": "ideal"}})
        assert run(cfg, tmp_path / "o", "misalign") == 1


class TestReproducibility:
    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path)
        outs = [tmp_path / "r1", tmp_path / "r2"]
        for out in outs:
            for sub in ["distribution", "sample", "match", "sweep", "mutual-info", "pvalue",
                        "tomography", "lhv-fuzz", "misalign"]:
                assert run(cfg, out, sub) in (0, 3)
        names = sorted(p.name for p in outs[0].iterdir())
        assert names == sorted(p.name for p in outs[1].iterdir())
        for name in names:
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name

    def test_seed_changes_output(self, tmp_path):
        cfg = write_config(tmp_path)
        run(cfg, tmp_path / "a", "sample")
        run(cfg, tmp_path / "b", "sample", "--seed", "43")
        assert (tmp_path / "a" / "ac.csv").read_bytes() != (tmp_path / "b" / "ac.csv").read_bytes()
