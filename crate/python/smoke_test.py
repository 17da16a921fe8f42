"""Smoke test for the dtsim extension module.

Build and install first:
    maturin build --release -o dist && pip install dist/dtsim-*.whl
then run `python python/smoke_test.py`.
"""

import json
import math
from pathlib import Path

import dtsim

ROOT = Path(__file__).resolve().parent.parent


def close(a, b, rel):
    return math.isclose(a, b, rel_tol=rel)


def main():
    sc = dtsim.Scenario.parse((ROOT / "scenarios" / "table1_row1.scn").read_text())
    m = sc.simulate()
    assert close(m.c_local, 1.3e24, 0.05), m
    assert m.cost == 1_613_760.0, m.cost
    assert 0 < m.eta <= 1 and 0 < m.chi <= 1
    assert math.isclose(m.eta, m.eta_h * m.eta_comp * m.eta_rep * m.eta_act, rel_tol=1e-12)
    assert json.loads(m.to_json())["n_params"] == m.n_params

    # Same scenario through the JSON form.
    again = dtsim.Scenario.from_json(json.dumps({"hardware.node": "16xH100", "hardware.n_nodes": 2,
                                                 "training.model_params": "91B", "training.duration_days": 740}))
    assert close(again.simulate().c_local, m.c_local, 1e-12)

    assert close(dtsim.max_training_time(0.06, 0.50, 0.03), 740.4, 1e-3)
    assert 410 <= dtsim.expected_hardware_failures(16_384, 54) <= 440
    assert dtsim.sync_penalty(1e10, 1, "expected") == 1.0
    assert dtsim.activation_penalty(1) == 1.0
    assert dtsim.cluster_cost("16xH100", 2) == m.cost
    assert "16xH100" in dtsim.node_names()
    assert "scher" in dtsim.regimes()
    assert dtsim.node_registrable("16xH100", "scher") is False

    rows = json.loads(dtsim.table("table1", "json"))
    assert len(rows) == 7, len(rows)

    bad = dtsim.Scenario.parse("hardware.n_nodes = 0\n")
    try:
        bad.simulate()
    except dtsim.InfeasibleError as e:
        assert "n_nodes" in str(e)
    else:
        raise AssertionError("zero nodes accepted")

    try:
        dtsim.Scenario.parse("diloco.hh = 3\n")
    except ValueError as e:
        assert "diloco.h" in str(e)
    else:
        raise AssertionError("unknown key accepted")

    print("smoke test ok:", m)


if __name__ == "__main__":
    main()
