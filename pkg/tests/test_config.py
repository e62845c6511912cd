import math
from pathlib import Path

import pytest

from risassoc.config import ConfigError, RunConfig, from_dict, full_scale, load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
MINIMAL = {"system": {"J": 2, "K": 3, "M": 2, "N": 4,
                      "bs_positions": [[0.0, 65.0], [60.0, 0.0]],
                      "p_max_dbm": 10.0, "noise_dbm": -80.0}}


def _with(section, **fields):
    data = {k: dict(v) for k, v in MINIMAL.items()}
    data.setdefault(section, {}).update(fields)
    return data


def test_minimal_config_parses():
    run = from_dict(MINIMAL)
    assert (run.system.J, run.system.K, run.system.N) == (2, 3, 4)
    assert run.solver.smoothing.delta == RunConfig().solver.smoothing.delta


def test_shipped_desk_config_matches_defaults():
    assert load_config(CONFIGS / "desk.toml").digest() == RunConfig().digest()


def test_full_scale_config_parses():
    run = load_config(CONFIGS / "full_scale.toml")
    assert (run.system.J, run.system.K, run.system.M, run.system.N) == (4, 15, 32, 64)
    assert run.system.bs_positions == full_scale(RunConfig()).system.bs_positions


def test_infinity_strings_accepted():
    run = from_dict(_with("channel", rician_factors=[0.0, "inf", 1.0]))
    assert math.isinf(run.system.rician_factors[1])


@pytest.mark.parametrize("missing", ["J", "bs_positions", "noise_dbm"])
def test_missing_field_is_named(missing):
    data = _with("system")
    del data["system"][missing]
    with pytest.raises(ConfigError, match=missing):
        from_dict(data)


def test_unknown_fields_and_sections_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        from_dict(_with("solver", bogus=1))
    with pytest.raises(ConfigError, match="plotting"):
        from_dict(dict(MINIMAL, plotting={}))


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        from_dict(_with("smoothing", delta=-1.0))
    with pytest.raises(ConfigError):
        from_dict(_with("system", J=3))  # two positions for three BSs


def test_unreadable_and_malformed(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[system\nJ = 2\n")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(bad)


def test_digest_tracks_every_setting():
    base = RunConfig()
    assert base.digest() == RunConfig().digest()
    assert base.with_system(p_max_dbm=5.0).digest() != base.digest()
