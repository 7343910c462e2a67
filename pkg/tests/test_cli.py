import json

import numpy as np
import pytest

from depsbm.cli import EXIT_DATA, EXIT_USAGE, main
from depsbm.io import read_labels, read_network, read_samples

FAST = ["--burn-in", "10", "--iterations", "20", "--thin", "2", "--chains", "2"]


def _sim(tmp_path, *extra):
    d = tmp_path / "sim"
    assert main(["simulate", "--n", "12", "--m", "2", "--seed", "3", "--out-dir", str(d), *extra]) == 0
    return d


def test_help_lists_every_flag(capsys):
    with pytest.raises(SystemExit):
        from depsbm.cli import build_parser

        build_parser().parse_args(["fit", "--help"])
    out = capsys.readouterr().out
    for flag in ("--network", "--covariates", "--seed", "--unsupervised", "--mode", "--chains", "--threads",
                 "--burn-in", "--iterations", "--thin", "--config", "--progress", "--a-eta"):
        assert flag in out
    assert "default: 0.002" in out
    assert main(["--help"]) == 0


def test_usage_errors(tmp_path, capsys):
    assert main(["fit"]) == EXIT_USAGE
    assert main(["fit", "--network", "x.csv"]) == EXIT_USAGE
    assert "--seed is required" in capsys.readouterr().err
    assert main(["frobnicate"]) == EXIT_USAGE
    d = _sim(tmp_path)
    assert main(["fit", "--network", str(d / "network.csv"), "--seed", "1", "--iterations", "25",
                 "--thin", "10"]) == EXIT_USAGE
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = red\n")
    assert main(["fit", "--config", str(cfg)]) == EXIT_USAGE


def test_data_errors(tmp_path, capsys):
    assert main(["fit", "--network", str(tmp_path / "missing.csv"), "--seed", "1"]) == EXIT_DATA
    assert "file not found" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("index,node,a,b\n1,a,1,9\n1,b,1,1\n")
    assert main(["fit", "--network", str(bad), "--seed", "1"]) == EXIT_DATA


def test_config_merges_under_flags(tmp_path):
    d = _sim(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"network = {d / 'network.csv'}\nseed = 5\nburn-in = 4\niterations = 30\nthin = 3\n"
                   "chains = 2\nunsupervised = true\n")
    out = tmp_path / "s.ndjson"
    assert main(["fit", "--config", str(cfg), "--iterations", "12", "--out", str(out)]) == 0
    s = read_samples(out)
    assert s.S == 4 and s.metadata["seed"] == 5 and s.metadata["supervised"] is False
    manifest = json.loads((tmp_path / "s.ndjson.manifest.json").read_text())
    assert manifest["options"]["iterations"] == 12 and manifest["options"]["burn_in"] == 4
    assert {"depsbm", "numpy", "scipy", "python", "backend"} <= set(manifest["versions"])
    assert len(manifest["chain_seeds"]) == 3


def test_pipeline_with_meet_and_eval(tmp_path, capsys):
    d = _sim(tmp_path)
    net = read_network(d / "network.csv")
    cov = tmp_path / "w.csv"
    cov.write_text("node,category\n" + "".join(f"{v},{k % 2}\n" for k, v in enumerate(net.names)))
    s = tmp_path / "s.ndjson"
    assert main(["fit", "--network", str(d / "network.csv"), "--covariates", str(cov), "--seed", "2",
                 "--out", str(s), *FAST]) == 0
    assert read_samples(s).metadata["supervised"] is True
    out = tmp_path / "sum"
    assert main(["summarize", "--samples", str(s), "--network", str(d / "network.csv"), "--out-dir", str(out),
                 "--meet", "1,2"]) == 0
    meet = (out / "meet.csv").read_text().splitlines()
    assert meet[0] == "node,meet_rows,meet_cols" and len(meet) == 13
    assert (out / "meet_indices.txt").read_text() == "1,2\n"
    capsys.readouterr()
    assert main(["eval", "--truth", str(d / "truth_rows.csv"), "--est", str(d / "truth_rows.csv")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "index,rand,ari,nmi"
    assert all(line.split(",")[1:] == ["1.0", "1.0", "1.0"] for line in lines[1:])
    assert main(["eval", "--truth", str(d / "truth_rows.csv"), "--est", str(out / "zhat_rows.csv"),
                 "--out", str(tmp_path / "m.csv")]) == 0
    assert len((tmp_path / "m.csv").read_text().splitlines()) == 3
    svg = tmp_path / "p.svg"
    assert main(["plot", "--network", str(d / "network.csv"), "--rows", str(out / "zhat_rows.csv"),
                 "--cols", str(out / "zhat_cols.csv"), "--index", "2", "--out", str(svg)]) == 0
    assert svg.read_text().startswith("<svg") and "index 2" in svg.read_text()


def test_undirected_unsupervised_fit(tmp_path):
    d = _sim(tmp_path, "--scenario", "2")
    assert not (d / "truth_cols.csv").exists()
    s = tmp_path / "s.ndjson"
    assert main(["fit", "--network", str(d / "network.csv"), "--mode", "undirected", "--unsupervised",
                 "--seed", "4", "--out", str(s), *FAST]) == 0
    samples = read_samples(s)
    assert not samples.directed and samples.z2 is None
    assert main(["summarize", "--samples", str(s), "--network", str(d / "network.csv"),
                 "--out-dir", str(tmp_path / "sum")]) == 0
    assert not (tmp_path / "sum" / "zhat_cols.csv").exists()
    z, _, _ = read_labels(tmp_path / "sum" / "zhat_rows.csv")
    assert z.shape == (2, 12)


def test_asymmetric_data_rejected_in_undirected_mode(tmp_path):
    d = _sim(tmp_path)
    assert main(["fit", "--network", str(d / "network.csv"), "--mode", "undirected", "--seed", "1"]) == EXIT_DATA


def test_ingest(tmp_path):
    counts = tmp_path / "c.csv"
    counts.write_text("index,source,target,count\n2001,a,b,0\n2001,b,a,7\n2002,a,b,150\n2002,b,b,30\n")
    out = tmp_path / "y.csv"
    assert main(["ingest", "--counts", str(counts), "--out", str(out)]) == 0
    net = read_network(out)
    assert net.labels == ["2001", "2002"]
    assert net.y[0].tolist() == [[1, 1], [2, 1]] and net.y[1].tolist() == [[1, 4], [1, 3]]
    assert main(["ingest", "--counts", str(counts), "--thresholds", "5", "--out", str(out)]) == 0
    assert read_network(out, categories=2).y[1].tolist() == [[1, 2], [1, 2]]
    assert main(["ingest", "--counts", str(tmp_path / "nope.csv")]) == EXIT_DATA
