import json
import os
from pathlib import Path

import numpy as np
import pytest

import qndsqueeze as q

ROOT = Path(os.environ.get("QND_SOURCE_DIR", Path(__file__).resolve().parents[2]))
DEFAULT = ROOT / "configs" / "reference.json"
SMALL = ROOT / "tests" / "data" / "golden_config.json"


def test_model_numbers():
    m = q.model(DEFAULT)
    assert m["eta0"] == pytest.approx(0.203, abs=0.007)
    assert m["domega_dn"] == pytest.approx(4.5e-5, abs=0.2e-5)
    assert m["p_scatter"] / m["p_raman"] == pytest.approx(3.0, abs=0.4)
    assert m["noise_budget"]["b_minus2"]["value"] == 6e13


def test_resolved_config_and_errors(tmp_path):
    cfg = q.resolved_config(DEFAULT)
    assert cfg["run"]["n_trials"] == 10000
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"run": {"n_trials": -1}}))
    with pytest.raises(q.ConfigError, match="run.n_trials"):
        q.resolved_config(bad)


def test_simulate_arrays():
    out = q.simulate(SMALL, photons=6.4e5, trials=400, seed=3)
    assert out["m1"].shape == (400,)
    assert np.all(np.isfinite(out["m1"]))
    v = out["variances"]
    assert v["var_meas"]["value"] == pytest.approx(np.var(out["m1"] - out["m2"], ddof=1) / 2, rel=1e-9)
    again = q.simulate(SMALL, photons=6.4e5, trials=400, seed=3, threads=2)
    assert np.array_equal(out["m1"], again["m1"])


def test_scenario_matches_golden(tmp_path):
    files, manifest = q.run_scenario("limits", SMALL, out=tmp_path)
    assert manifest["scenario"] == "limits"
    for name, text in files.items():
        assert (ROOT / "tests" / "golden" / "limits" / name).read_text() == text
        assert (tmp_path / name).exists()
    with pytest.raises(ValueError):
        q.run_scenario("nope", SMALL)


def test_formulas():
    assert q.conditional_variance(9405, 1206) == pytest.approx(1069, abs=1)
    s = q.squeezing_parameters(9405, 1206, 16573, 0.54, 0.71, 0.0)
    assert s["zeta_e"] <= s["zeta_m"]
    lim = q.limits(3100, 5.628e-8, 3 * 5.628e-8, 1.8e-4, 1.3844e-7, 8.606e-8)
    assert lim["sigma2_min_db"] == pytest.approx(-18.3, abs=0.2)
    p, s2 = q.integrate_sigma2(3100, 5.628e-8, 3 * 5.628e-8, 4e6, 100)
    assert s2[-1] == pytest.approx(10 ** (lim["sigma2_min_db"] / 10), rel=1e-3)
    assert q.from_db(q.to_db(0.3)) == pytest.approx(0.3)
