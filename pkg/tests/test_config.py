import json

import pytest

from qubitnoise.config import PipelineConfig
from qubitnoise.errors import SchemaError


def test_defaults_round_trip():
    cfg = PipelineConfig()
    assert PipelineConfig.from_dict(cfg.to_dict()) == cfg


def test_unknown_keys_rejected_at_every_level():
    with pytest.raises(SchemaError, match="sede"):
        PipelineConfig.from_dict({"sede": 1})
    with pytest.raises(SchemaError, match=r"synthesis\.psd\.alfa"):
        PipelineConfig.from_dict({"synthesis": {"psd": {"alfa": 0.8}}})


@pytest.mark.parametrize("data", [
    {"seed": "1"},
    {"seed": 1.5},
    {"seed": True},
    {"synthesis": {"t1_s": "fast"}},
    {"fit": {"fit_tau0": 1}},
    {"synthesis": {"n_pulses": 14}},
    {"loss": []},
])
def test_types_checked(data):
    with pytest.raises(SchemaError):
        PipelineConfig.from_dict(data)


def test_ints_accepted_for_floats():
    cfg = PipelineConfig.from_dict({"synthesis": {"t1_s": 1}})
    assert cfg.synthesis.t1_s == 1.0 and isinstance(cfg.synthesis.t1_s, float)


def test_hash_ignores_operational_keys():
    a = PipelineConfig.from_dict({"out": "x", "jobs": 4})
    b = PipelineConfig.from_dict({"out": "y", "jobs": 1})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != PipelineConfig(seed=1).config_hash()
    assert a.config_hash() != PipelineConfig.from_dict({"synthesis": {"noise_rms": 0.0}}).config_hash()


def test_from_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"seed": 3, "filter": {"n_pulses": 2}}))
    cfg = PipelineConfig.from_file(p)
    assert cfg.seed == 3 and cfg.filter.n_pulses == 2
    p.write_text("[1, 2")
    with pytest.raises(SchemaError, match=r"c\.json"):
        PipelineConfig.from_file(p)
