"""CSV ingestion, experiment config, CLI subcommands, output determinism."""

import json
import math
import os

import numpy as np
import pytest

from distreg.cli import (ExperimentConfig, canonical_json, load_csv, main,
                         run_experiment)
from distreg.errors import DistregError, IngestError


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("a,b,target\n1,2,3\n4,5,6\n7,8,9\n")
    return str(path)


@pytest.fixture
def synth_csv(tmp_path):
    rng = np.random.default_rng(0)
    n = 60
    x = rng.normal(size=n)
    y = 2.0 * x + rng.normal(scale=0.5, size=n)
    lines = ["x,target"] + [f"{float(a)!r},{float(b)!r}" for a, b in zip(x, y)]
    path = tmp_path / "synth.csv"
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestLoadCsv:
    def test_toy(self, toy_csv):
        d = load_csv(toy_csv, "target")
        assert d.n_rows == 3 and d.n_features == 2
        assert d.columns == ["a", "b"]
        np.testing.assert_allclose(d.targets, [3.0, 6.0, 9.0])

    def test_missing_target_column(self, toy_csv):
        with pytest.raises(IngestError):
            load_csv(toy_csv, "nope")

    def test_missing_value(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,target\n1,2\n,3\n")
        with pytest.raises(IngestError) as exc:
            load_csv(str(p), "target")
        assert exc.value.row == 3 and exc.value.col == "a"

    def test_non_numeric(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,target\n1,2\nfoo,3\n")
        with pytest.raises(IngestError):
            load_csv(str(p), "target")


class TestConfig:
    def _cfg(self, path, **kw):
        base = dict(datasets=[(path, "target")],
                    models=["N(p=C(mean(y)), s=C(std(y)))"],
                    losses=["log_capped:1e-10"], folds=3, seed=1, out="out")
        base.update(kw)
        return ExperimentConfig(**base)

    def test_normalize_roundtrip(self, toy_csv):
        cfg = self._cfg(toy_csv)
        norm = cfg.normalized()
        again = ExperimentConfig.from_dict(norm).normalized()
        assert norm == again

    def test_seed_mandatory(self, toy_csv):
        cfg = self._cfg(toy_csv, seed=None)
        with pytest.raises(DistregError):
            cfg.normalized()

    def test_models_canonicalized(self, toy_csv):
        cfg = self._cfg(toy_csv, models=["N(p=LR,s=C(std(y)))"])
        assert cfg.normalized()["models"] == ["N(p=LR, s=C(std(y)))"]


class TestCanonicalJson:
    def test_float_17_digits(self):
        assert canonical_json(1 / 3) == "0.33333333333333331\n"

    def test_sorted_keys_and_specials(self):
        s = canonical_json({"b": math.inf, "a": [1, True, None]})
        assert s == '{"a": [1, true, null], "b": "inf"}\n'


class TestRunExperiment:
    def test_deterministic_rerun(self, synth_csv, tmp_path):
        out = str(tmp_path / "out")
        cfg = ExperimentConfig(datasets=[(synth_csv, "target")],
                               models=["N(p=LR, s=C(std(y)))",
                                       "N(p=C(mean(y)), s=C(std(y)))"],
                               losses=["log_capped:1e-10"], folds=5, seed=11,
                               out=out)
        assert run_experiment(cfg) == 0
        first = open(os.path.join(out, "results.json")).read()
        assert run_experiment(cfg) == 0
        second = open(os.path.join(out, "results.json")).read()
        assert first == second
        md = open(os.path.join(out, "results.md")).read()
        assert md.startswith("| Model |")
        assert os.path.exists(os.path.join(out, "diagnostics",
                                           "N_p_LR_s_C_std_y.csv"))

    def test_failed_cell_continues(self, synth_csv, tmp_path):
        out = str(tmp_path / "out2")
        cfg = ExperimentConfig(datasets=[(synth_csv, "target")],
                               models=["N(p=KNN(k=0), s=C(std(y)))",
                                       "N(p=C(mean(y)), s=C(std(y)))"],
                               losses=["log"], folds=3, seed=2, out=out)
        assert run_experiment(cfg) == 2
        recs = json.load(open(os.path.join(out, "results.json")))["results"]
        by_model = {r["model"]: r for r in recs}
        assert by_model["N(p=KNN(k=0), s=C(std(y)))"]["failed"]
        assert not by_model["N(p=C(mean(y)), s=C(std(y)))"]["failed"]

    def test_comparison_matrix_emitted(self, synth_csv, tmp_path):
        out = str(tmp_path / "out3")
        cfg = ExperimentConfig(datasets=[(synth_csv, "target")],
                               models=["N(p=LR, s=C(std(y)))",
                                       "N(p=C(mean(y)), s=C(std(y)))"],
                               losses=["log"], folds=3, seed=3, out=out,
                               compare=True)
        run_experiment(cfg)
        data = json.load(open(os.path.join(out, "results.json")))
        assert data["comparisons"][0]["p_value"] <= 1.0


class TestMain:
    def test_cv_subcommand(self, synth_csv, tmp_path):
        out = str(tmp_path / "o")
        rc = main(["cv", "--data", synth_csv, "--target", "target",
                   "--models", "N(p=LR, s=C(std(y)))", "--loss", "log",
                   "--folds", "3", "--seed", "5", "--out", out])
        assert rc == 0
        assert os.path.exists(os.path.join(out, "results.json"))

    def test_parse_check_ok(self, capsys):
        rc = main(["parse-check", "--models", "N(p=LR, s=C(std(y)))"])
        assert rc == 0
        assert "N(p=LR, s=C(std(y)))" in capsys.readouterr().out

    def test_parse_check_error_offset(self, capsys):
        rc = main(["parse-check", "--models", "N(p=)"])
        assert rc == 2
        assert "offset 4" in capsys.readouterr().err

    def test_indep_subcommand(self, synth_csv, capsys):
        rc = main(["indep", "--data", synth_csv, "--target", "target",
                   "--seed", "5"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert set(out) == {"statistic", "p_value", "n", "alpha_decision"}
        assert out["alpha_decision"] == "dependent"

    def test_twosample_subcommand(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        p1, p2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
        for p, mu in ((p1, 0.0), (p2, 3.0)):
            vals = rng.normal(mu, 1.0, size=150)
            p.write_text("x\n" + "\n".join(repr(float(v)) for v in vals) + "\n")
        rc = main(["twosample", "--data1", str(p1), "--data2", str(p2),
                   "--seed", "5"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["alpha_decision"] == "different"

    def test_diagnose_subcommand(self, synth_csv, tmp_path):
        out = str(tmp_path / "diag")
        rc = main(["diagnose", "--data", synth_csv, "--target", "target",
                   "--models", "Baseline(normal)", "--loss", "log",
                   "--folds", "3", "--seed", "5", "--out", out])
        assert rc == 0
        path = os.path.join(out, "diagnostics", "Baseline_normal.csv")
        header = open(path).readline().strip().split(",")
        assert {"point", "loss_residual", "prob_residual", "q05", "q95"} <= set(header)

    def test_config_file_with_flag_override(self, synth_csv, tmp_path):
        out = str(tmp_path / "cfg_out")
        override_out = str(tmp_path / "override_out")
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "datasets": [[synth_csv, "target"]],
            "models": ["N(p=LR, s=C(std(y)))"],
            "losses": ["log"], "folds": 3, "seed": 9, "out": out}))
        rc = main(["cv", "--config", str(cfg_path)])
        assert rc == 0
        assert os.path.exists(os.path.join(out, "results.json"))
        rc = main(["cv", "--config", str(cfg_path), "--out", override_out])
        assert rc == 0
        assert os.path.exists(os.path.join(override_out, "results.json"))

    def test_missing_flags_reported(self, capsys):
        rc = main(["cv", "--seed", "1"])
        assert rc == 2
        assert "--data" in capsys.readouterr().err
