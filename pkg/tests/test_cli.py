import csv
import json
import subprocess
import sys

import pytest

from honeyseq.harness.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> ingest -> featurize on a small corpus, shared by the tests below."""
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--sessions", "20", "--seed", "3", "--out", str(d / "log.json")]) == 0
    assert main(["ingest", str(d / "log.json"), "--out", str(d / "store.txt")]) == 0
    assert main(["featurize", str(d / "store.txt"), "--seed", "1", "--out", str(d / "ds.json"),
                 "--csv", str(d / "cols.csv")]) == 0
    (d / "tiny.json").write_text(json.dumps({
        "profile": "desk", "models": ["tcn", "gru"], "targets": ["command_type"],
        "tcn": {"num_filters": 6}, "recurrent": {"hidden_size": 6},
        "learning_models": ["tcn"], "learning_sizes": [4, 16],
        "grid_blocks": [1, 2], "grid_filters": [4], "grid_filter_sizes": [2],
    }))
    return d


def test_end_to_end(pipeline, capsys):
    d = pipeline
    ds = json.loads((d / "ds.json").read_text())
    assert ds["format"] == "honeyseq-dataset" and len(ds["train"]) == 16 and len(ds["test"]) == 4
    with open(d / "cols.csv") as fh:
        header = next(csv.reader(fh))
    assert len(header) == 2 + 17 + 4

    code, out, _ = run(capsys, "train", d / "ds.json", "--model", "tcn", "--target", "event_type",
                       "--epochs", "2", "--config", d / "tiny.json", "--out", d / "m.json")
    assert code == 0
    trained = json.loads(out)
    code, out, _ = run(capsys, "evaluate", d / "m.json", d / "ds.json")
    assert code == 0
    ev = json.loads(out)
    assert ev["accuracy"] == trained["test_accuracy"] and ev["target"] == "event_type"
    assert 0.0 <= ev["accuracy"] <= 1.0
    code, out, _ = run(capsys, "evaluate", d / "m.json", d / "ds.json", "--split", "train",
                       "--out", d / "ev.json")
    assert code == 0 and json.loads((d / "ev.json").read_text())["sequences"] == 16


def test_synth_is_seed_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        assert run(capsys, "synth", "--sessions", "5", "--seed", "11", "--out", tmp_path / name)[0] == 0
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    code, out, _ = run(capsys, "synth", "--sessions", "5", "--out", tmp_path / "c")
    assert json.loads(out)["bayes_accuracy"] > 0.5


def test_curves_gridsearch_report(pipeline, capsys):
    d = pipeline
    common = ["--config", d / "tiny.json", "--epochs", "2", "--seed", "0"]
    assert run(capsys, "curves", d / "ds.json", "--out", d / "curves.json", *common)[0] == 0
    curves = json.loads((d / "curves.json").read_text())
    assert [c["train_size"] for c in curves["epoch_curves"]] == [16, 16, 12, 12]
    assert [r["size"] for r in curves["learning_curve"][0]["rows"]] == [4, 16]

    assert run(capsys, "gridsearch", d / "ds.json", "--out", d / "grid.json", "--csv", d / "gcsv", *common)[0] == 0
    assert len(json.loads((d / "grid.json").read_text())["rows"]) == 2
    assert (d / "gcsv" / "grid.csv").exists()

    assert run(capsys, "report", d / "ds.json", "--out", d / "r1.json", "--csv-dir", d / "rcsv", *common)[0] == 0
    assert run(capsys, "report", d / "ds.json", "--out", d / "r2.json", *common)[0] == 0
    assert (d / "r1.json").read_bytes() == (d / "r2.json").read_bytes()
    report = json.loads((d / "r1.json").read_text())
    assert report["schema"] == "honeyseq-report"
    assert sorted(p.name for p in (d / "rcsv").iterdir()) == [
        "accuracy.csv", "epoch_curves.csv", "grid.csv", "learning_curve.csv"]


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["train"])
    assert info.value.code == 2


def test_report_missing_file_exits_1(tmp_path, capsys):
    code, out, err = run(capsys, "report", tmp_path / "missing.json", "--out", tmp_path / "r.json")
    assert code == 1
    payload = json.loads(err)
    assert payload["command"] == "report" and payload["error"] == "FileNotFoundError"
    assert not (tmp_path / "r.json").exists()


@pytest.mark.parametrize("argv", [
    ["ingest", "{log}", "--out", "{out}"],
    ["featurize", "{log}", "--out", "{out}"],
    ["evaluate", "{log}", "{log}"],
])
def test_data_errors_exit_1(tmp_path, capsys, argv):
    bad = tmp_path / "bad.json"
    bad.write_text("not json at all\n")
    argv = [a.format(log=bad, out=tmp_path / "o") for a in argv]
    code, _, err = run(capsys, *argv)
    if argv[0] == "ingest":
        # bad lines are reported, not fatal
        assert code == 0
    else:
        assert code == 1 and "error" in json.loads(err)


def test_bad_config_exits_1(tmp_path, capsys, pipeline):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "train", pipeline / "ds.json", "--config", cfg, "--out", tmp_path / "m")
    assert code == 1 and json.loads(err)["error"] == "ValueError"
    code, _, err = run(capsys, "synth", "--config", cfg, "--out", tmp_path / "log")
    assert code == 1 and json.loads(err)["error"] == "InvalidConfig"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "honeyseq", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("ingest", "synth", "featurize", "train", "evaluate", "curves", "gridsearch", "report"):
        assert sub in res.stdout
