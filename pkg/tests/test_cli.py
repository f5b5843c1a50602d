import json

import numpy as np
import pytest

from wsdfm.cli import main
from wsdfm.core import load_dataset
from wsdfm.coupling import load_pairs


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out.strip().splitlines()
    return code, (json.loads(out[-1]) if out else None)


@pytest.fixture
def data(tmp_path, capsys):
    p = tmp_path / "data.csv"
    code, _ = run(capsys, "gen-data", "--n", 2000, "--seed", 3, "--out", p)
    assert code == 0
    return p


def test_gen_data_default_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    code, summary = run(capsys, "gen-data", "--out", a)
    assert code == 0 and summary["n"] == 100_000
    d = load_dataset(a)
    assert len(d) == 100_000 and d.tokens.min() >= 0 and d.tokens.max() < 128
    run(capsys, "gen-data", "--out", b)
    assert a.read_bytes() == b.read_bytes()
    code, _ = run(capsys, "gen-data", "--n", 0, "--out", tmp_path / "c.csv")
    assert code == 2


def test_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_data": 50, "seed": 1}))
    out = tmp_path / "d.csv"
    code, s = run(capsys, "gen-data", "--config", cfg, "--out", out)
    assert code == 0 and s["n"] == 50 and s["seed"] == 1
    code, s = run(capsys, "gen-data", "--config", cfg, "--seed", 4, "--set", "n_data=60",
                  "--out", out)
    assert s["n"] == 60 and s["seed"] == 4
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(capsys, "gen-data", "--config", cfg, "--out", out)[0] == 2


def test_make_drafts(tmp_path, capsys, data):
    out = tmp_path / "drafts.csv"
    code, _ = run(capsys, "make-drafts", "--data", data, "--p-noise", 0, "--n", 300, "--out", out)
    rows = set(map(tuple, load_dataset(data).tokens))
    assert code == 0 and all(tuple(r) in rows for r in load_dataset(out).tokens)
    assert run(capsys, "make-drafts", "--data", data, "--p-noise", 2, "--out", out)[0] == 2


def test_build_pairs(tmp_path, capsys, data):
    drafts = tmp_path / "drafts.csv"
    run(capsys, "make-drafts", "--data", data, "--tier", "fair", "--n", 100, "--out", drafts)
    out = tmp_path / "pairs.csv"
    code, s = run(capsys, "build-pairs", "--drafts", drafts, "--data", data, "--k", 5,
                  "--k-inject", 5, "--out", out)
    assert code == 0 and len(load_pairs(out)) == 1000
    code, _ = run(capsys, "build-pairs", "--drafts", drafts, "--data", drafts, "--k", 101,
                  "--out", out)
    assert code == 2


def test_end_to_end_pipelines(tmp_path, capsys, data):
    drafts, pairs = tmp_path / "drafts.csv", tmp_path / "pairs.csv"
    run(capsys, "make-drafts", "--data", data, "--tier", "pretty_good", "--n", 200, "--out", drafts)
    run(capsys, "build-pairs", "--drafts", drafts, "--data", data, "--out", pairs)
    small = ["--set", "hidden_dim=32", "--set", "embed_dim=16", "--set", "checkpoint_every=20",
             "--iterations", 40, "--set", "n_drafts=100"]
    code, s = run(capsys, "train", "--data", data, *small, "--out-ckpt", tmp_path / "base.bin")
    assert code == 0 and s["mode"] == "vanilla"
    assert s["first_loss"] == pytest.approx(np.log(128), abs=1e-5)
    code, s = run(capsys, "sample", "--ckpt", tmp_path / "base.bin", "--t0", 0, "--h", 0.05,
                  "--n", 500, "--out", tmp_path / "s0.csv")
    assert code == 0 and s["nfe"] == 20
    side = json.loads((tmp_path / "s0.csv.json").read_text())
    assert set(side) == {"t0", "h", "nfe", "n", "wall_seconds", "seed", "checkpoint"}

    code, s = run(capsys, "train", "--pairs", pairs, *small, "--out-ckpt", tmp_path / "ws.bin")
    assert code == 0 and s["mode"] == "warm"
    assert (tmp_path / "ws.loss.csv").read_text().startswith("iteration,loss\n0,")
    code, s = run(capsys, "sample", "--ckpt", tmp_path / "ws.bin", "--drafts", drafts,
                  "--t0", 0.8, "--h", 0.05, "--out", tmp_path / "s1.csv")
    assert code == 0 and s["nfe"] == 4 and s["n"] == 200
    assert run(capsys, "sample", "--ckpt", tmp_path / "ws.bin", "--t0", 0.8,
               "--out", tmp_path / "x.csv")[0] == 2

    code, s = run(capsys, "eval", "--samples", data, "--data", data, "--out", tmp_path / "m.csv")
    assert code == 0 and s["skl"] == 0.0
    code, s = run(capsys, "eval", "--samples", tmp_path / "s1.csv", "--data", data,
                  "--out", tmp_path / "m1.csv")
    line = (tmp_path / "m1.csv").read_text().splitlines()
    assert line[0] == "run_id,t0,nfe,skl,wall_seconds,eps,n_eval,seed"
    assert line[1].split(",")[1:3] == ["0.8", "4"]


def test_sweep_rejects_empty_grid(tmp_path, capsys):
    code, _ = run(capsys, "sweep", "--draft-tiers", "fair", "--t0-grid", "",
                  "--out-report", tmp_path / "r.csv")
    assert code == 2
    code, _ = run(capsys, "sweep", "--draft-tiers", "great", "--t0-grid", "0.8",
                  "--out-report", tmp_path / "r.csv")
    assert code == 2


def test_plot(tmp_path, capsys, data):
    out = tmp_path / "p.svg"
    code, s = run(capsys, "plot", "--data", data, "--out", out)
    svg = out.read_text()
    assert code == 0 and svg.count("<circle") == 2000 and svg.rstrip().endswith("</svg>")
    big = tmp_path / "big.csv"
    run(capsys, "gen-data", "--n", 6000, "--out", big)
    code, s = run(capsys, "plot", "--data", data, big, "--out", out)
    assert s["panels"] == 2 and out.read_text().count("<circle") == 2000 + 5000
    first = out.read_text()
    run(capsys, "plot", "--data", data, big, "--out", out)
    assert out.read_text() == first
    bad = tmp_path / "bad.csv"
    bad.write_text("tok0,tok1\n1,2\nx,3\n")
    assert main(["plot", "--data", str(bad), "--out", str(out)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 2


def test_sweep_and_reproduce_small(tmp_path, capsys):
    small = ["--set", "hidden_dim=16", "--set", "embed_dim=8", "--set", "iterations=20",
             "--set", "checkpoint_every=10", "--set", "n_data=400", "--set", "n_eval=400",
             "--set", "probe_n=100", "--set", "n_drafts=40", "--set", "batch_size=32"]
    code, s = run(capsys, "sweep", "--draft-tiers", "pretty_good,poor", "--t0-grid", "0.8,0.9",
                  *small, "--out-report", tmp_path / "sweep.csv")
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert code == 0 and rows[0] == "tier,t0,skl,nfe,qualifies"
    assert rows[1].startswith("baseline,0.0,") and [r.split(",")[1] for r in rows[2:4]] == ["0.9", "0.8"]
    out = tmp_path / "rt"
    code, s = run(capsys, "reproduce-table1", "--out-dir", out, "--seeds", "0", *small)
    table = (out / "table1.csv").read_text().splitlines()
    assert code == 0 and len(table) == 1 + 9 and table[1].startswith("baseline,0.0,")
    assert [r.split(",")[3] for r in table[1:]] == ["20", "1", "2", "4", "4", "10", "4", "10", "13"]
