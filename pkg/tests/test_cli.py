import json

import pytest

from udgsolver import cli, corpus, synth

from conftest import FIG1_TEXT, MELANIE_TEXT


@pytest.fixture(scope="module")
def corpus_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "corpus.jsonl"
    assert cli.main(["gen-corpus", "--out", str(path), "--seed", "0", "--size", "120"]) == 0
    return path


@pytest.fixture(scope="module")
def model_file(tmp_path_factory, trained_suite):
    path = tmp_path_factory.mktemp("model") / "suite.json"
    trained_suite.save(path)
    return path


def test_gen_corpus_counts(corpus_file):
    assert len(corpus.load_problems(corpus_file)) == 120


def test_normalize_dedups_and_is_idempotent(tmp_path, corpus_file):
    out1 = tmp_path / "norm1.jsonl"
    out2 = tmp_path / "norm2.jsonl"
    assert cli.main(["normalize", "--in", str(corpus_file), "--out", str(out1)]) == 0
    assert cli.main(["normalize", "--in", str(out1), "--out", str(out2)]) == 0
    assert out2.read_bytes() == out1.read_bytes()
    assert len(corpus.load_problems(out1)) <= 120


def test_normalize_drops_duplicate(tmp_path):
    src = tmp_path / "dups.jsonl"
    record = {"id": "a", "text": "Sam had 3 pears and ate 1 pear."}
    with open(src, "w") as fh:
        fh.write(json.dumps(record) + "\n")
        fh.write(json.dumps(record | {"id": "b"}) + "\n")
    out = tmp_path / "out.jsonl"
    assert cli.main(["normalize", "--in", str(src), "--out", str(out)]) == 0
    assert len(corpus.load_problems(out)) == 1


def test_folds_command(tmp_path, corpus_file):
    out = tmp_path / "folds.json"
    assert cli.main(["folds", "--in", str(corpus_file), "--out", str(out), "--k", "4", "--seed", "1"]) == 0
    obj = json.loads(out.read_text())
    ids = [pid for fold in obj["folds"] for pid in fold]
    assert len(ids) == len(set(ids)) == 120


def test_annotate_command(tmp_path, corpus_file, capsys):
    out = tmp_path / "derived.jsonl"
    assert cli.main(["annotate", "--in", str(corpus_file), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 120
    first = json.loads(lines[0])
    assert {"id", "rates", "edges", "noisy"} <= set(first)
    assert "noise rate" in capsys.readouterr().out


def test_train_and_solve_round_trip(tmp_path, corpus_file):
    model = tmp_path / "model.json"
    assert cli.main(["train", "--in", str(corpus_file), "--out", str(model), "--epochs", "5"]) == 0
    assert cli.main(["solve", "--model", str(model), "--text", "Sara had 11 shells. Tom gave Sara 5 more shells. How many shells does Sara have now?"]) == 0


def test_solve_fig1_value(model_file, capsys):
    code = cli.main([
        "solve", "--model", str(model_file), "--text", FIG1_TEXT,
        "--lambda-rel", "1", "--lambda-vertex", "1", "--lambda-edge", "1",
    ])
    assert code == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["value"] == "7"
    assert obj["tree"] == "(/ (- 66 10) 8)"


def test_solve_melanie_value(model_file, capsys):
    code = cli.main([
        "solve", "--model", str(model_file), "--text", MELANIE_TEXT,
        "--lambda-rel", "1", "--lambda-vertex", "1", "--lambda-edge", "1",
    ])
    assert code == 0
    obj = json.loads(capsys.readouterr().out)
    assert obj["value"] == "4"


def test_solve_trace_lines(model_file, capsys):
    code = cli.main([
        "solve", "--model", str(model_file), "--text", FIG1_TEXT, "--trace", "3",
    ])
    assert code == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("{") and l.endswith("}")]
    # one compact JSON object per trace line after the main report
    assert len([l for l in lines if '"breakdown"' in l and l.count("\n") == 0]) >= 3


def test_solve_no_numbers_is_data_error(model_file, capsys):
    code = cli.main(["solve", "--model", str(model_file), "--text", "Nothing to count here."])
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_usage_error_exit_code(capsys):
    assert cli.main(["solve"]) == 1  # missing required arguments
    assert "usage" in capsys.readouterr().err.lower()


def test_missing_file_is_data_error(tmp_path, capsys):
    assert cli.main(["normalize", "--in", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "o")]) == 2


def test_malformed_record_reports_line(tmp_path, capsys):
    src = tmp_path / "bad.jsonl"
    src.write_text('{"id": "a", "text": "3 cats"}\n{broken\n')
    assert cli.main(["normalize", "--in", str(src), "--out", str(tmp_path / "o")]) == 2
    assert "line 2" in capsys.readouterr().err


def test_eval_command_small(tmp_path, capsys):
    data = tmp_path / "small.jsonl"
    problems = synth.gen_synthetic_corpus(seed=2, size=60)
    corpus.save_problems(problems, data)
    report_path = tmp_path / "report.json"
    code = cli.main([
        "eval", "--in", str(data), "--out", str(report_path),
        "--k", "2", "--epochs", "3", "--beam", "50",
        "--lambda-vertex", "1", "--lambda-edge", "1",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "solve accuracy" in out
    report = json.loads(report_path.read_text())
    assert report["aggregate"]["test_total"] == 60
    for fold in report["folds"]:
        assert fold["solve_correct"]["full"] <= fold["test_size"]


def test_eval_too_few_problems_is_data_error(tmp_path, capsys):
    data = tmp_path / "one.jsonl"
    data.write_text(json.dumps({
        "id": "only", "text": "Sam had 3 pears and ate 1 pear. How many pears are left?",
        "answer": "2", "tree": "(- 3 1)",
    }) + "\n")
    assert cli.main(["eval", "--in", str(data), "--k", "5"]) == 2
