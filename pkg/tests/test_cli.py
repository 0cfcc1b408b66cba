import json
import os

import pytest

from kgcondense.cli import EXIT_DATA, EXIT_LEAK, EXIT_TRANSPORT, EXIT_USAGE, load_config, main
from kgcondense.kg import ConfigError
from stub_server import StubService


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root / "data")]) == 0
    return root


def run(args, capsys=None):
    code = main([str(a) for a in args])
    return code


def test_stats_on_diamond(data, capsys):
    d = data / "data"
    out = data / "stats"
    assert run(["stats", "--train", d / "diamond.tsv", "--pairs", d / "diamond_pairs.tsv", "--k", 2,
                "--out", out]) == 0
    assert "enumerated=2 condensed=4" in capsys.readouterr().out
    rows = (out / "stats.csv").read_text().splitlines()
    assert rows[0] == "head,tail,edges,enumerated,condensed,ratio,truncated"
    assert rows[1] == "s,t,4,2,4,0.5,0"
    assert json.loads((out / "config.json").read_text())["k"] == 2


def test_ingest_extract_condense(data):
    d = data / "data" / "source"
    common = ["--train", d / "train.tsv", "--test", d / "test.tsv", "--k", 3]
    assert run(["ingest", *common, "--out", data / "ing"]) == 0
    assert json.loads((data / "ing" / "summary.json").read_text())["test"] == 32
    assert (data / "ing" / "entities.tsv").exists()
    assert run(["extract", *common, "--out", data / "ext"]) == 0
    assert len(os.listdir(data / "ext" / "tg")) == 32
    assert run(["condense", *common, "--out", data / "cond"]) == 0
    assert len(os.listdir(data / "cond" / "cg")) == 32


@pytest.fixture(scope="module")
def model(data):
    d = data / "data" / "source"
    out = data / "model"
    assert run(["train", "--train", d / "train.tsv", "--test", d / "test.tsv", "--dim", 16, "--epochs", 30,
                "--out", out]) == 0
    return out


def test_train_outputs(model):
    assert (model / "params.bin").exists()
    assert (model / "loss.csv").read_text().count("\n") == 31
    assert (model / "relations.tsv").read_text().startswith("0\talpha_")


def test_eval_embed_predict_are_reproducible(data, model):
    d = data / "data" / "target"
    common = ["--train", d / "train.tsv", "--test", d / "test.tsv", "--model", model, "--dim", 16, "--jobs", 1]
    for i in (1, 2):
        assert run(["eval", *common, "--out", data / f"eval{i}"]) == 0
        assert run(["embed", *common, "--l", 2, "--d-llm", 8, "--out", data / f"emb{i}"]) == 0
    for name in ("predictions.csv", "metrics.json"):
        assert (data / "eval1" / name).read_bytes() == (data / "eval2" / name).read_bytes()
    snaps = [json.loads((data / f"eval{i}" / "config.json").read_text()) for i in (1, 2)]
    assert [{k: v for k, v in c.items() if k != "out"} for c in snaps][0] == \
        {k: v for k, v in snaps[1].items() if k != "out"}
    for name in ["embeddings.csv"] + [os.path.join("prefix", f) for f in os.listdir(data / "emb1" / "prefix")]:
        assert (data / "emb1" / name).read_bytes() == (data / "emb2" / name).read_bytes()
    m = json.loads((data / "eval1" / "metrics.json").read_text())
    assert m["precision"] == m["recall"] == m["f1"] and m["n"] == 40
    assert run(["predict", *common, "--scorer", "baseline-distmult", "--out", data / "pred"]) == 0
    assert (data / "pred" / "predictions.csv").read_text().count("\n") == 41


def test_eval_refuses_overlapping_vocab(data, model, capsys):
    d = data / "data" / "source"
    code = run(["eval", "--train", d / "train.tsv", "--test", d / "test.tsv", "--model", model, "--dim", 16,
                "--out", data / "leak"])
    assert code == EXIT_LEAK
    assert "zero-shot" in capsys.readouterr().err


def test_eval_with_generation_service(data):
    d = data / "data" / "target"
    with StubService(generate=lambda body: {"text": "beta_0"}) as svc:
        code = run(["eval", "--train", d / "train.tsv", "--test", d / "test.tsv", "--scorer", "llm-generation",
                    "--endpoint", svc.url, "--out", data / "llm"])
    assert code == 0
    assert "prompt" in svc.requests[0][1]
    assert run(["eval", "--train", d / "train.tsv", "--test", d / "test.tsv", "--scorer", "llm-generation",
                "--endpoint", "http://127.0.0.1:9", "--out", data / "llm2"]) == EXIT_TRANSPORT


def test_config_file_and_overrides(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"k": 3, "seed": 5}))
    cfg = load_config(str(f), {"seed": 9, "dim": None})
    assert cfg.k == 3 and cfg.seed == 9 and cfg.dim == 64
    f.write_text(json.dumps({"hops": 3}))
    with pytest.raises(ConfigError):
        load_config(str(f), {})
    f.write_text("[1]")
    with pytest.raises(ConfigError):
        load_config(str(f), {})


@pytest.mark.parametrize("args", [
    ["stats", "--k", "0"],
    ["eval", "--mask", "1.5"],
    ["bench", "--kernel", "fortran"],
    ["stats"],
    ["nonsense"],
    ["stats", "--k", "two"],
])
def test_usage_errors(args, tmp_path):
    assert main(args + ["--out", str(tmp_path)] if args[0] != "nonsense" else args) == EXIT_USAGE


def test_data_errors(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("a\tb\n")
    assert main(["ingest", "--train", str(bad), "--out", str(tmp_path / "o")]) == EXIT_DATA
    pairs = tmp_path / "pairs.tsv"
    pairs.write_text("x\ty\n")
    good = tmp_path / "good.tsv"
    good.write_text("a\tr\tb\n")
    assert main(["stats", "--train", str(good), "--pairs", str(pairs), "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_bench_small(tmp_path, capsys):
    out = tmp_path / "bench"
    assert main(["bench", "--sizes", "400,600", "--kernel", "python", "--out", str(out)]) == 0
    rows = (out / "bench.csv").read_text().splitlines()
    assert rows[0] == "backend,m,seconds,enumerated,truncated" and len(rows) == 3
    fit = json.loads((out / "bench.json").read_text())["fits"][0]
    assert fit["backend"] == "python" and "r2" in fit
    assert "R^2" in capsys.readouterr().out
