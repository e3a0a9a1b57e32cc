import csv
import json

import pytest

from forbidlab.cli import lab_main, main


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_greens_modes(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["greens", "--mode", "oracle", "--h", "0.1", "--out", str(out)]) == 0
    r = rows(out)
    assert abs(float(r[6]["G"]) - 0.05875) < 1e-4  # d = 0.5
    assert main(["greens", "--mode", "solve", "--h", "0.1", "--out", str(out)]) == 0
    assert max(float(x["rel_error"]) for x in rows(out)) < 1e-4
    assert main(["greens", "--mode", "maxprinciple", "--h", "0.1", "--out", str(out)]) == 0
    assert all(x["holds"] == "1" for x in rows(out))


def test_pipeline_eigen_nodal_trace(tmp_path):
    pair = tmp_path / "pair.bin"
    assert main(["eigen", "--h", "0.1", "--n", "128", "--out", str(pair)]) == 0
    nod = tmp_path / "nodal.csv"
    assert main(["nodal", "--pair", str(pair), "--curve", "H", "--count", "--norms", "--green-check",
                 "--out", str(nod)]) == 0
    r = rows(nod)[0]
    assert float(r["norm_H"]) > 0 and r["count"] != ""
    tr = tmp_path / "trace.csv"
    assert main(["trace", "--pair", str(pair), "--curve", "H", "--out", str(tr)]) == 0
    t = rows(tr)[0]
    assert int(t["real_zeros"]) <= int(t["zeros"])
    assert main(["agmon", "--n", "128", "--out", str(tmp_path / "dE.bin")]) == 0


def test_revolution_command(tmp_path):
    out = tmp_path / "rev.csv"
    assert main(["revolution", "--m", "10,20", "--out", str(out)]) == 0
    assert [int(r["count"]) for r in rows(out)] == [20, 40]


def test_lab_commands(tmp_path):
    assert lab_main(["accept", "--suite", "5", "--json", str(tmp_path / "a.json")]) == 0
    assert json.loads((tmp_path / "a.json").read_text())[0]["passed"] is True
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"h": []}))
    assert lab_main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    cfg.write_text(json.dumps({"h": [-1]}))
    assert lab_main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert lab_main(["accept", "--suite", "99"]) == 2
    assert main(["no-such-command"]) == 2
