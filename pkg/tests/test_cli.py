import filecmp
import json
import os

import pytest

from osnbias.cli import main
from osnbias.pipeline import ConfigError, load_config, run


def write_config(tmp_path, **overrides):
    cfg = {
        "output_dir": str(tmp_path / "out"),
        "lexicon": "builtin",
        "synth": {"n_users": 200, "seed": 3, "noise_sd": 0.5},
        "train": {"seed": 1, "max_epochs": 200},
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


EXPECTED_ARTIFACTS = [
    "users.csv", "posts_scored.csv", "attitudes.csv", "histogram.csv",
    "features.csv", "model.json", "train_history.csv", "evaluation.csv",
    "evaluation.txt", "gw.csv", "report.txt",
]


class TestCliMain:
    def test_pipeline_on_synthetic_fixture(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["pipeline", "-c", str(path)]) == 0
        out = tmp_path / "out"
        for name in EXPECTED_ARTIFACTS:
            assert (out / name).exists(), name

    def test_missing_lexicon_key_fails_with_name(self, tmp_path, capsys):
        cfg = {"output_dir": str(tmp_path / "out")}
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg))
        assert main(["pipeline", "-c", str(path)]) == 1
        assert "lexicon" in capsys.readouterr().err

    def test_unknown_config_file(self, tmp_path, capsys):
        assert main(["pipeline", "-c", str(tmp_path / "nope.json")]) == 1
        assert "config" in capsys.readouterr().err

    def test_rerun_is_byte_identical_for_csvs(self, tmp_path):
        path1 = write_config(tmp_path)
        assert main(["pipeline", "-c", str(path1)]) == 0
        out2 = str(tmp_path / "out2")
        assert main(["pipeline", "-c", str(path1), "--output-dir", out2]) == 0
        for name in EXPECTED_ARTIFACTS:
            if name.endswith(".csv") or name == "model.json":
                assert filecmp.cmp(tmp_path / "out" / name,
                                   os.path.join(out2, name),
                                   shallow=False), name

    def test_synth_subcommand_writes_fixture(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["synth", "-c", str(path)]) == 0
        synth_dir = tmp_path / "out" / "synth"
        for name in ("posts.jsonl", "users.csv", "truth.csv"):
            assert (synth_dir / name).exists()

    def test_label_subcommand(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["label", "-c", str(path)]) == 0
        out = tmp_path / "out"
        assert (out / "attitudes.csv").exists()
        assert (out / "histogram.csv").exists()
        header = (out / "attitudes.csv").read_text().splitlines()[0]
        assert header == "user_id,attitude,polarity,bias"

    def test_k_override_changes_labels(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["label", "-c", str(path), "--k", "0.5"]) == 0
        rows = (tmp_path / "out" / "attitudes.csv").read_text().splitlines()[1:]
        biased = [r for r in rows if not r.endswith(",normal")]
        # with a 0.5 sigma band a large share of users must be biased
        assert len(biased) > len(rows) * 0.2


class TestRunApi:
    def test_unknown_command(self, tmp_path):
        with pytest.raises(ConfigError):
            run("frobnicate", {"output_dir": str(tmp_path), "lexicon": "builtin"})

    def test_load_config_requires_object(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("[1,2,3]")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_correlate_writes_matrix(self, tmp_path):
        path = write_config(tmp_path,
                            correlation={"method": "pearson",
                                         "subsets": ["all"]})
        assert main(["correlate", "-c", str(path)]) == 0
        out = tmp_path / "out" / "correlations_all_pearson.csv"
        lines = out.read_text().splitlines()
        assert lines[0].startswith("feature,nr,li,nfr")
