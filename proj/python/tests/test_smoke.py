import json
import pathlib

import numpy as np
import pytest

import amlopt

ROOT = pathlib.Path(__file__).resolve().parents[2]
DECK = ROOT / "decks" / "five_spot_25.json"


def test_projection_clips_to_bounds():
    lower = np.zeros(2)
    upper = np.ones(2)
    u = np.array([-0.5, 0.2, 1.4, 0.7])
    np.testing.assert_allclose(amlopt.project(u, lower, upper, 2), [0.0, 0.2, 1.0, 0.7])


def test_unit_scaling_round_trip():
    lower = np.array([0.0, 0.0, 0.0])
    upper = np.array([1000.0, 2.5, 500.0])
    u = np.array([700.0, 0.5, 150.0, 300.0, 1.0, 450.0])
    x = amlopt.scale_to_unit(u, lower, upper, 2)
    assert np.all((x >= 0) & (x <= 1))
    np.testing.assert_allclose(amlopt.unscale_from_unit(x, lower, upper, 2), u)


def test_initial_covariance_is_ar1():
    c = amlopt.initial_covariance(np.array([0.001]), 0.9, 3)
    var = 0.001**2 / (1 - 0.81)
    np.testing.assert_allclose(np.diag(c), var)
    np.testing.assert_allclose(c[0, 2], var * 0.81)
    assert np.all(np.linalg.eigvalsh(c) > 0)


def test_adaptation_keeps_trace():
    c = amlopt.initial_covariance(np.array([0.01, 0.02]), 0.9, 3)
    w = np.linspace(0.1, 0.6, 6)
    c2 = amlopt.adapt_covariance(c, w, 0.1)
    assert np.trace(c2) == pytest.approx(np.trace(c))


def test_search_direction_max_norm():
    d = amlopt.search_direction(np.array([0.5, -2.0, 1.0]))
    np.testing.assert_allclose(d, [0.25, -1.0, 0.5])


def test_enopt_climbs_python_quadratic():
    center = np.array([0.3, 0.6, 0.4, 0.7])

    def f(u):
        return -float(np.sum((u - center) ** 2))

    r = amlopt.enopt(f, np.full(4, 0.1), np.zeros(2), np.ones(2), 2,
                     sample_size=30, max_iterations=60, sigma=0.01, seed=1)
    values = r["values"]
    assert all(b > a for a, b in zip(values[:-1], values[1:-1]))
    assert r["value"] > f(np.full(4, 0.1))
    assert np.linalg.norm(r["control"] - center) < 0.1


def test_bad_config_raises():
    with pytest.raises(ValueError):
        amlopt.parse_config(json.dumps({"objective": {"analytic": "quadratic"}, "bogus": 1}))


def test_deck_is_conservative():
    rep = amlopt.check_deck(str(DECK))
    assert rep["conservative"]
    assert rep["controls"] > 0
    sim = amlopt.simulate(str(DECK), amlopt.constant_controls(str(DECK), 700.0, 0.5, 150.0))
    assert sim["npv"] == pytest.approx(rep["npv"])
    assert np.all(np.diff(sim["times_days"]) > 0)


def test_run_and_summarize(tmp_path):
    cfg = json.loads((ROOT / "configs" / "quadratic_fom.json").read_text())
    cfg["enopt"]["max_iterations"] = 5
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "run"
    r = amlopt.run(str(path), str(out))
    assert (out / "STATUS").read_text().startswith("complete")
    s = amlopt.summarize(str(out))
    assert s["complete"] and s["fom_evaluations"] == r["fom_evaluations"]
    c = amlopt.compare(str(out), str(out))
    assert c["evaluation_ratio"] == pytest.approx(1.0)
