import json
import math

import numpy as np
import pytest

from forbidlab.eigensolve import EigenPair
from forbidlab.errors import ConfigError, InsufficientData
from forbidlab.fieldio import load_pair, load_scene, save_pair, save_scene
from forbidlab.fitting import fit_rate
from forbidlab.geometry import TWO_BUMP, TorusDomain
from forbidlab.harness import EXIT_CONFIG, EXIT_OK, ExperimentConfig, fit_records, run_experiment
from forbidlab.render import diverging_rgb, read_ppm, render_field

SMALL = {"scene": dict(TWO_BUMP, domain={"L": 2.0, "n": 128}), "h": [0.1, 0.09, 0.08], "n": 128}


def test_fit_rate_examples():
    h = np.array([0.1, 0.08, 0.06, 0.05, 0.04])
    f = fit_rate(h, q=np.exp(-0.7 / h))
    assert abs(f.beta - 0.7) < 1e-8 and abs(f.r2 - 1) < 1e-12
    hh = np.linspace(0.02, 0.05, 6)
    g = fit_rate(hh, q=hh * np.exp(-0.7 / hh))
    assert abs(g.beta - 0.7) <= 0.05 * 0.7
    assert abs(fit_rate(h, q=np.full(5, 3.0)).beta) < 1e-12
    # the prefactor-corrected fit recovers the rate exactly
    assert abs(fit_rate(hh, q=hh * np.exp(-0.7 / hh), prefactor_power=-1).beta - 0.7) < 1e-10
    with pytest.raises(InsufficientData):
        fit_rate([0.1, 0.05], q=[1.0, 2.0])
    with pytest.raises(InsufficientData):
        fit_rate([0.1, 0.05, 0.04], q=[1.0, 0.0, 2.0])


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"h": [0.1, 0.1]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    _, stages, code = run_experiment({"h": "x"}, tmp_path / "o")
    assert code == EXIT_CONFIG and stages[0].name == "config"
    p = tmp_path / "cfg.json"
    p.write_text("{not json")
    assert run_experiment(p, tmp_path / "o")[2] == EXIT_CONFIG


def test_empty_sweep(tmp_path):
    recs, _, code = run_experiment({"h": []}, tmp_path)
    assert code == EXIT_OK and recs == []
    assert (tmp_path / "sweep.csv").read_text().count("\n") == 1


def test_small_sweep_is_deterministic(tmp_path):
    a, sa, ca = run_experiment(SMALL, tmp_path / "a")
    b, _, cb = run_experiment(SMALL, tmp_path / "b")
    assert ca == cb == EXIT_OK, [s for s in sa if not s.ok]
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()
    assert [r.h for r in a] == [0.1, 0.09, 0.08]
    assert all(r.norm_H > 0 and r.dn_norm_H >= 0 and r.norm_MH >= 0 for r in a)
    assert (tmp_path / "a" / "field_h0p1000.ppm").exists()
    assert (tmp_path / "a" / "field_h0p1000.svg").read_text().startswith("<svg")
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    assert rep["failed"] == []
    fit = fit_records(a)
    assert math.isfinite(fit.beta)


def test_revolution_experiment(tmp_path):
    recs, stages, code = run_experiment({"kind": "revolution", "revolution": {"m": [10, 20, 40]}}, tmp_path)
    assert code == EXIT_OK
    assert [r.count for r in recs] == [20, 40, 80]
    lines = (tmp_path / "revolution.csv").read_text().splitlines()
    assert lines[0].startswith("m,h,E_h,r0,count")
    assert len(lines) == 4


def test_render_examples(tmp_path):
    d = TorusDomain(2.0, 64)
    assert np.all(diverging_rgb(np.zeros((64, 64))) == 255)
    X, _ = d.mesh()
    rgb = render_field(np.sin(np.pi * X), tmp_path / "s.ppm")
    pos = np.sin(np.pi * X) > 0.5
    neg = np.sin(np.pi * X) < -0.5
    assert np.all(rgb[pos, 0] == 255) and np.all(rgb[pos, 2] < 255)
    assert np.all(rgb[neg, 2] == 255) and np.all(rgb[neg, 0] < 255)
    small = np.abs(np.sin(np.pi * X)) <= 0.02
    assert np.all(rgb[small] == 255)
    # columns of constant x share one colour: vertical bands
    assert np.all(rgb == rgb[:, :1])
    assert np.array_equal(read_ppm(tmp_path / "s.ppm"), rgb)
    render_field(np.sin(np.pi * X), tmp_path / "t.ppm")
    assert (tmp_path / "s.ppm").read_bytes() == (tmp_path / "t.ppm").read_bytes()


def test_pair_and_scene_files(tmp_path):
    d = TorusDomain(2.0, 32)
    rng = np.random.default_rng(0)
    p = EigenPair(0.07, 0.98, rng.standard_normal((32, 32)), 1e-12, d, 1.0)
    save_pair(tmp_path / "p.bin", p)
    q = load_pair(tmp_path / "p.bin")
    assert q.h == p.h and q.E_h == p.E_h and q.domain.n == 32 and np.array_equal(q.phi, p.phi)
    raw = (tmp_path / "p.bin").read_bytes()
    assert raw[:8] == b"FLABPAIR" and len(raw) == 8 + 4 + 24 + 8 * 32 * 32
    (tmp_path / "bad.bin").write_bytes(b"nope")
    with pytest.raises(ConfigError):
        load_pair(tmp_path / "bad.bin")
    sc = load_scene()
    save_scene(tmp_path / "s.json", sc)
    assert load_scene(tmp_path / "s.json").curve("H").length() == pytest.approx(2 * math.pi * 0.15, rel=1e-12)
