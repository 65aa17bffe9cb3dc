import json
from pathlib import Path

import numpy as np
import pytest

from cgoslab.fields import exterior_derivative
from cgoslab.pairing import ground_truth
from cgoslab.scenario import (ScenarioError, build_pairs, default_scenario, load_scenario, provenance,
                              scenario_hash)

SCEN = Path(__file__).resolve().parents[1] / "scenarios"


@pytest.mark.parametrize("name,truth", [("gauge_pair", "equal (dA, q)"), ("q_bump", "q differs"),
                                        ("curl_pair", "dA differs"), ("same_plane_gauge_q", "q differs")])
def test_shipped_scenarios_build(name, truth):
    sc = load_scenario(SCEN / f"{name}.json", grid_scale=0.5)
    p1, p2 = build_pairs(sc)
    assert p1.grid == p2.grid
    assert ground_truth(p1, p2)["verdict"] == truth
    assert np.all(sc.xi_grid() > 0)


def test_gauge_scenario_preserves_field():
    sc = load_scenario(SCEN / "gauge_pair.json", grid_scale=0.5)
    p1, p2 = build_pairs(sc)
    assert np.abs(p1.A.data - p2.A.data).max() > 1e-3
    np.testing.assert_allclose(exterior_derivative(p1.A), exterior_derivative(p2.A), atol=1e-10)


def test_schema_errors():
    with pytest.raises(ScenarioError, match="schema violation"):
        load_scenario(SCEN / "malformed.json")
    base = json.loads((SCEN / "q_bump.json").read_text())
    bad = dict(base, numerics={"h_list": [0.1, 0.2]})
    with pytest.raises(ScenarioError, match="decreasing"):
        load_scenario(data=bad)
    bad = dict(base, mode="t3")
    with pytest.raises(ScenarioError):
        load_scenario(data=bad)
    bad = dict(base, potentials={"p1": {"file": "missing.json"}, "p2": {"from": "p1"}})
    with pytest.raises(ScenarioError):
        load_scenario(data=bad)


def test_hash_is_canonical():
    a = {"x": 1, "y": [1, 2]}
    b = {"y": [1, 2], "x": 1}
    assert scenario_hash(a) == scenario_hash(b) != scenario_hash({"x": 2, "y": [1, 2]})
    sc = default_scenario()
    prov = provenance(sc)
    assert prov["scenario_hash"] == scenario_hash(sc.data)


def test_grid_scale_refines():
    coarse = load_scenario(SCEN / "q_bump.json", grid_scale=0.5).grid()
    fine = load_scenario(SCEN / "q_bump.json", grid_scale=1.0).grid()
    assert np.isclose(coarse.spacing[0], 2 * fine.spacing[0])
