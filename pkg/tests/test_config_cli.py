import csv
import hashlib
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from textcausal.cli import exit_code_for, main
from textcausal.config import config_from_dict, load_config, with_overrides
from textcausal.errors import (
    ConfigError,
    InvariantError,
    NumericError,
    ProviderShapeError,
    ValidationError,
)
from textcausal.learners.nuisance import GbtLearner, TextTripleLearner
from textcausal.synthetic import SyntheticTruth

GEN_TOML = """
[synthetic]
n_units = 1500
seed = 4

[synthetic.effect]
kind = "group"
"""

FIT_TOML = """
[crossfit]
k_folds = 3

[crossfit.learner]
kind = "gbt"
n_trees = 60
"""

TEXT_TOML = """
[crossfit]
k_folds = 3
modality = "text"

[crossfit.learner]
kind = "text_triple"

[crossfit.learner.train]
epochs = 5
"""


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _tree_digest(root):
    return {str(p.relative_to(root)): _digest(p) for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "gen.toml").write_text(GEN_TOML)
    (d / "fit.toml").write_text(FIT_TOML)
    (d / "text.toml").write_text(TEXT_TOML)
    assert main(["generate", "--config", str(d / "gen.toml"), "--out", str(d / "data")]) == 0
    return d


# -- config ---------------------------------------------------------------------

def test_defaults_and_json_equivalence(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"crossfit": {"k_folds": 3,
                                                              "learner": {"kind": "gbt",
                                                                          "n_trees": 60}}}))
    (tmp_path / "c.toml").write_text(FIT_TOML)
    assert load_config(tmp_path / "c.json") == load_config(tmp_path / "c.toml")
    assert load_config(None).crossfit.k_folds == 5


@pytest.mark.parametrize("raw,path", [
    ({"crossfit": {"k_folds": 1}}, "crossfit.k_folds"),
    ({"crossfit": {"folds": 3}}, "crossfit.folds"),
    ({"crossfit": {"learner": {"kind": "forest"}}}, "crossfit.learner.kind"),
    ({"data": {"outcom": "y"}}, "data.outcom"),
    ({"report": {"area_baseline": "x"}}, "report.area_baseline"),
    ({"synthetic": {"n_units": 1}}, "synthetic.n_units"),
    ({"embedding": {"endpoint_url": "http://x", "dim": 0}}, "embedding.dim"),
    ({"extras": {}}, "extras"),
])
def test_config_errors_name_field(raw, path):
    with pytest.raises(ConfigError) as info:
        config_from_dict(raw)
    assert info.value.path == path


def test_unparseable_and_missing_file(tmp_path):
    (tmp_path / "bad.toml").write_text("[crossfit\nk=")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(tmp_path / "bad.toml")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.toml")


def test_text_modality_gets_text_learner():
    cfg = config_from_dict({"crossfit": {"modality": "text"}})
    assert isinstance(cfg.crossfit.learner, TextTripleLearner)
    back = with_overrides(cfg, modality="tabular", seed=3)
    assert isinstance(back.crossfit.learner, GbtLearner)
    assert back.crossfit.seed == 3 and back.synthetic.seed == 3


def test_embedding_swapped_into_text_learner():
    cfg = config_from_dict({"crossfit": {"modality": "text"},
                            "embedding": {"endpoint_url": "http://x", "dim": 8}})
    assert cfg.effective_crossfit().learner.featurizer.dim == 8


def test_exit_code_mapping():
    assert exit_code_for(ConfigError("x")) == 2
    assert exit_code_for(ValidationError("x")) == 3
    assert exit_code_for(NumericError("x")) == 4
    assert exit_code_for(ProviderShapeError("x")) == 4
    assert exit_code_for(InvariantError("x")) == 5


# -- commands -------------------------------------------------------------------

def test_generate_outputs(workspace):
    data = workspace / "data"
    lines = (data / "dataset.csv").read_text().splitlines()
    assert len(lines) == 1501
    header = lines[0].split(",")
    assert "true_theta" not in " ".join(header)
    assert (data / "truth" / "truth.csv").exists()
    assert json.loads((data / "generate_config.json").read_text())["n_units"] == 1500


def test_generate_idempotent_and_seed_sensitive(workspace, tmp_path):
    args = ["generate", "--config", str(workspace / "gen.toml")]
    assert main(args + ["--out", str(tmp_path / "again")]) == 0
    assert _tree_digest(tmp_path / "again") == _tree_digest(workspace / "data")
    assert main(args + ["--out", str(tmp_path / "seeded"), "--seed", "99"]) == 0
    assert _digest(tmp_path / "seeded" / "dataset.csv") != _digest(workspace / "data" / "dataset.csv")


def test_fit_recovers_oracle_ate(workspace, capsys):
    out = workspace / "tab"
    code = main(["fit", "--config", str(workspace / "fit.toml"), "--data",
                 str(workspace / "data" / "dataset.csv"), "--out", str(out), "--threads", "1"])
    assert code == 0
    printed = capsys.readouterr().out
    assert "ATE" in printed and "ATET" in printed
    est = {e["estimand"]: e for e in json.loads((out / "estimates.json").read_text())}
    truth = SyntheticTruth.from_csv(workspace / "data" / "truth" / "truth.csv")
    oracle = float(np.mean(truth.true_theta))
    assert abs(est["ATE"]["point"] - oracle) <= 3 * est["ATE"]["std_error"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["run_config"]["crossfit"]["k_folds"] == 3


def test_fit_threads_byte_identical(workspace, tmp_path):
    base = ["fit", "--config", str(workspace / "fit.toml"), "--data",
            str(workspace / "data" / "dataset.csv")]
    assert main(base + ["--out", str(tmp_path / "t1"), "--threads", "1"]) == 0
    assert main(base + ["--out", str(tmp_path / "t3"), "--threads", "3"]) == 0
    assert _tree_digest(tmp_path / "t1") == _tree_digest(tmp_path / "t3")


def test_text_fit_and_report(workspace, capsys):
    data = str(workspace / "data" / "dataset.csv")
    assert main(["fit", "--config", str(workspace / "text.toml"), "--data", data,
                 "--out", str(workspace / "txt")]) == 0
    scores = (workspace / "txt" / "scores.csv").read_text().splitlines()
    assert len(scores) == 1501
    if not (workspace / "tab").exists():
        main(["fit", "--config", str(workspace / "fit.toml"), "--data", data,
              "--out", str(workspace / "tab")])
    capsys.readouterr()
    assert main(["report", "compare", str(workspace / "txt"), str(workspace / "tab"),
                 "--out", str(workspace / "cmp")]) == 0
    printed = capsys.readouterr().out
    assert "GATE" in printed and "area ratio" in printed
    for name in ("metrics.json", "rank_table.csv", "cate_curve.csv", "lift_curve.csv",
                 "histograms.csv"):
        assert (workspace / "cmp" / name).exists()
    assert main(["inspect", "scores", str(workspace / "txt")]) == 0
    assert "cate quantiles" in capsys.readouterr().out


def test_text_modality_without_text_exits_3(workspace, tmp_path, capsys):
    src = (workspace / "data" / "dataset.csv").read_text().splitlines()
    header = src[0].split(",")
    keep = [i for i, h in enumerate(header) if h != "text"]
    rows = list(csv.reader(io.StringIO("\n".join(src))))
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows([[r[i] for i in keep] for r in rows])
    (tmp_path / "notext.csv").write_text(buf.getvalue())
    code = main(["fit", "--data", str(tmp_path / "notext.csv"), "--out", str(tmp_path / "o"),
                 "--modality", "text"])
    assert code == 3
    assert "text" in capsys.readouterr().err


def test_bad_config_exits_2(workspace, tmp_path, capsys):
    (tmp_path / "bad.toml").write_text("[crossfit]\nk_folds = 1\n")
    code = main(["fit", "--config", str(tmp_path / "bad.toml"), "--data",
                 str(workspace / "data" / "dataset.csv"), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "crossfit.k_folds" in capsys.readouterr().err


def test_bad_data_exits_3(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("y,t,x\n0.5,1,1\n0.2,7,2\n")
    assert main(["fit", "--data", str(tmp_path / "d.csv"), "--out", str(tmp_path / "o")]) == 3
    assert "row 2" in capsys.readouterr().err


def test_training_failure_exits_4(tmp_path, capsys):
    # all outcomes zero: the text loss cannot be normalised
    rows = ["y,t,text"] + [f"0,{i % 2},word{i % 3}" for i in range(40)]
    (tmp_path / "d.csv").write_text("\n".join(rows) + "\n")
    code = main(["fit", "--data", str(tmp_path / "d.csv"), "--out", str(tmp_path / "o"),
                 "--modality", "text"])
    assert code == 4
    assert "fold" in capsys.readouterr().err


def test_report_disjoint_runs_exit_3(workspace, tmp_path):
    (tmp_path / "small.toml").write_text(GEN_TOML.replace("1500", "300"))
    main(["generate", "--config", str(tmp_path / "small.toml"), "--out", str(tmp_path / "d")])
    main(["fit", "--config", str(workspace / "fit.toml"), "--data",
          str(tmp_path / "d" / "dataset.csv"), "--out", str(tmp_path / "r")])
    if not (workspace / "tab").exists():
        main(["fit", "--config", str(workspace / "fit.toml"), "--data",
              str(workspace / "data" / "dataset.csv"), "--out", str(workspace / "tab")])
    code = main(["report", "compare", str(tmp_path / "r"), str(workspace / "tab"),
                 "--out", str(tmp_path / "c")])
    assert code == 3


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "textcausal", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and "generate" in proc.stdout
