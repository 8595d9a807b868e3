import json
import math
import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pclab.config import RunConfig, load_schema
from pclab.errors import ConfigError
from pclab.pde.force import IntegrabilityWarning, q0, q1

BASE = {
    "name": "disk",
    "mode": "optimize",
    "p": 2.0,
    "q": "inf",
    "lambda": 0.05,
    "domain": {"kind": "disk", "center": [0.0, 0.0], "radius": 1.0},
    "force": {"kind": "constant", "value": 1.0},
    "mesh_h": 0.1,
    "schedule": {"T0": 0.001, "epochs": 2},
    "pool": {"weights": {"prune_leaf": 1.0, "remove_loop_arc": 2.0}},
    "diagnostics": ["compliance_identity", "omega_decay"],
    "sigma0": {"preset": "loop_on_segment"},
    "seed": 4,
}


def test_round_trip_is_identity():
    cfg = RunConfig.from_dict(BASE)
    again = RunConfig.from_json(cfg.to_json())
    assert again.to_dict() == cfg.to_dict()
    assert again.schedule.seed == 4
    assert again.sigma0.n_edges == 4


@given(
    st.floats(1.05, 6.0),
    st.floats(0.0, 10.0),
    st.floats(0.01, 0.5),
    st.integers(0, 2**63 - 1),
    st.sampled_from(["solve", "optimize", "diagnose", "lambda_scan"]),
)
def test_round_trip_property(p, lam, h, seed, mode):
    d = {**BASE, "p": p, "lambda": lam, "mesh_h": h, "seed": seed, "mode": mode}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrabilityWarning)
        cfg = RunConfig.from_dict(d)
        again = RunConfig.from_json(cfg.to_json())
    assert again.to_dict() == cfg.to_dict()


def test_malformed_json_reports_the_line():
    with pytest.raises(ConfigError, match="line 2"):
        RunConfig.from_json('{"p": 2,\n "q": }')


def test_schema_violation_names_the_field():
    with pytest.raises(ConfigError, match="mesh_h"):
        RunConfig.from_dict({**BASE, "mesh_h": -1})
    with pytest.raises(ConfigError, match="bogus"):
        RunConfig.from_dict({**BASE, "bogus": 1})


def test_q_below_q0_is_an_error():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({**BASE, "p": 1.5, "q": 0.99 * q0(1.5)})


def test_q_at_q1_warns_and_disables_decay():
    with pytest.warns(IntegrabilityWarning):
        cfg = RunConfig.from_dict({**BASE, "p": 1.5, "q": q1(1.5)})
    assert not cfg.decay_enabled
    assert "omega_decay" not in cfg.active_diagnostics
    assert "compliance_identity" in cfg.active_diagnostics


def test_invalid_values_rejected_without_schema():
    with pytest.raises(ConfigError):
        RunConfig(p=1.0)
    with pytest.raises(ConfigError):
        RunConfig(lam=-0.1)
    with pytest.raises(ConfigError):
        RunConfig(mode="dance")


def test_sigma_h_defaults_to_mesh_h_and_force_gets_q():
    cfg = RunConfig.from_dict({**BASE, "q": 5})
    assert cfg.sigma_h == cfg.mesh_h
    assert cfg.force.q == 5


def test_schema_file_is_valid_json_schema():
    import jsonschema

    jsonschema.Draft202012Validator.check_schema(load_schema())


def test_explicit_glue_graph():
    cfg = RunConfig.from_dict({**BASE, "sigma0": {"vertices": [[0, 0], [0.5, 0]], "edges": [[0, 1]]}})
    assert cfg.sigma0.total_length() == pytest.approx(0.5)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "nope.json")
