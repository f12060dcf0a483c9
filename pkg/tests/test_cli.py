import numpy as np
import pytest

from dhg_tbsa import toy_corpus_path
from dhg_tbsa.cli import main
from dhg_tbsa.numcore import load_container

TOY = str(toy_corpus_path())
QUICK = ["--epochs", "2", "--hidden", "8", "--embed-dim", "8", "--seed", "3"]


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "model.ckpt"
    assert main(["train", "--data", TOY, "--out", str(out)] + QUICK) == 0
    return out


def test_stats(capsys):
    assert main(["stats", "--data", TOY]) == 0
    header, values = capsys.readouterr().out.strip().splitlines()
    stats = dict(zip(header.split("\t"), map(int, values.split("\t"))))
    assert stats["sentences"] == 20
    assert stats["aspects"] == stats["POS"] + stats["NEG"] + stats["NEU"]


def test_train_writes_checkpoint_log_and_dev_split(trained):
    log = trained.with_suffix(".ckpt.metrics.tsv").read_text().splitlines()
    assert len(log) == 2 and all(len(line.split("\t")) == 6 for line in log)
    assert trained.with_suffix(".ckpt.dev.tsv").exists()
    _state, meta = load_container(trained)
    assert meta["train_config"]["epochs"] == 2


def test_eval_reproduces_recorded_dev_metrics(trained, tmp_path, capsys):
    report = tmp_path / "report.txt"
    dev = str(trained.with_suffix(".ckpt.dev.tsv"))
    assert main(["eval", "--model", str(trained), "--data", dev, "--report", str(report)]) == 0
    kv = dict(line.split("=") for line in report.read_text().splitlines())
    _state, meta = load_container(trained)
    for key, value in meta["dev_metrics"].items():
        if value is None:
            assert kv[key] == "nan"
        else:
            assert float(kv[key]) == value, key
    assert "F-all" in capsys.readouterr().out


def test_eval_subsets_and_threaded_workers(trained, capsys):
    assert main(["eval", "--model", str(trained), "--data", TOY, "--subset", "multi", "--workers", "2"]) == 0
    assert "subset: multi (9 sentences)" in capsys.readouterr().out
    assert main(["eval", "--model", str(trained), "--data", TOY, "--subset", "noop", "--dhg-times", "3"]) == 0


def test_predict_with_trace(trained, tmp_path):
    out, trace = tmp_path / "pred.tsv", tmp_path / "trace.txt"
    assert main(["predict", "--model", str(trained), "--data", TOY, "--out", str(out),
                 "--trace", "--trace-out", str(trace)]) == 0
    for line in out.read_text().splitlines():
        sid, start, end, surface, pol, conf = line.split("\t")
        assert int(start) <= int(end) and pol in ("POS", "NEG", "NEU") and 0 < float(conf) <= 1
    lines = trace.read_text().splitlines()
    assert sum(line.startswith("# ") for line in lines) == 40  # id line and link rendering per sentence
    assert all(line.startswith(("# ", "ITER ")) for line in lines)


def test_predict_is_deterministic(trained, tmp_path):
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    for path in (a, b):
        assert main(["predict", "--model", str(trained), "--data", TOY, "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "train.cfg"
    cfg.write_text("epochs = 1\nhidden = 6\nembed_dim = 6\nepsilon = 0.9  # stricter links\n")
    out = tmp_path / "m.ckpt"
    assert main(["train", "--data", TOY, "--config", str(cfg), "--out", str(out), "--hidden", "4"]) == 0
    _state, meta = load_container(out)
    assert meta["train_config"]["hidden_dim"] == 4
    assert meta["train_config"]["epochs"] == 1
    assert meta["train_config"]["dhg"]["epsilon"] == 0.9


def test_embedding_files(tmp_path):
    glove = tmp_path / "g.txt"
    glove.write_text("service 0.1 0.2 0.3\nfood -0.1 0.0 0.5\n")
    domain = tmp_path / "d.txt"
    domain.write_text("service 1.0\n")
    out = tmp_path / "m.ckpt"
    args = ["train", "--data", TOY, "--out", str(out), "--epochs", "1", "--hidden", "4",
            "--embeddings", str(glove), "--embedding-dim", "3", "--embeddings", str(domain), "--embedding-dim", "1"]
    assert main(args) == 0
    state, meta = load_container(out)
    vocab = meta["vocab"]
    assert state["embed"].shape == (len(vocab), 4)
    row = state["embed"][vocab.index("service")]
    assert np.all(np.isfinite(row))


def test_gradcheck_command(capsys):
    assert main(["gradcheck", "--hidden", "4", "--times", "1"]) == 0
    assert "max relative error" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["stats", "--data", "/nonexistent/file.tsv"],
    ["eval", "--model", "/nonexistent.ckpt", "--data", TOY],
    ["train", "--data", TOY, "--out", "/tmp/x.ckpt", "--epochs", "0"],
    ["train", "--data", TOY, "--out", "/tmp/x.ckpt", "--embeddings", "a.txt"],
])
def test_errors_exit_nonzero(argv, capsys):
    assert main(argv) == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_flag(capsys):
    assert main(["stats", "--nope"]) != 0
    assert main([]) != 0


def test_bad_data_file(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("1\tfood\t0\troot\tO\tPOS\n")
    assert main(["stats", "--data", str(bad)]) == 2
    assert "inconsistent" in capsys.readouterr().err
