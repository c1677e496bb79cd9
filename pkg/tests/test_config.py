import pytest

from chemns.config import (CANONICAL_SCENARIOS, ConfigError, ScenarioConfig,
                           canonical_config, parse_config)

MINIMAL = """
grid.lengths = 1.0, 1.0
grid.cells = 8, 8
init.n1 = 1
init.n2 = 1
init.c = 1
"""


def test_parse_minimal_with_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg["transport.dt_max"] == 0.02
    assert cfg["output.cadence"] == 0.5
    assert cfg["params.kappa"] == 1
    assert cfg.grid.dim == 2


def test_unknown_key_reports_line():
    text = MINIMAL + "grid.shape = 8\n"
    with pytest.raises(ConfigError, match="line 7"):
        parse_config(text)


def test_duplicate_key_rejected():
    text = MINIMAL + "init.c = 2\n"
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(text)


def test_bad_value_reports_line_and_key():
    text = MINIMAL.replace("grid.cells = 8, 8", "grid.cells = eight, 8")
    with pytest.raises(ConfigError, match="grid.cells"):
        parse_config(text)


def test_missing_required_key():
    with pytest.raises(ConfigError, match="init.c"):
        parse_config(MINIMAL.replace("init.c = 1\n", ""))


def test_malformed_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("# fine\nnot a pair\n")


def test_comments_and_blanks_ignored():
    cfg = parse_config(MINIMAL + "\n# comment\nrun.t_end = 2.0  # inline\n")
    assert cfg["run.t_end"] == 2.0


def test_serialize_round_trip():
    cfg = parse_config(MINIMAL + "params.chi1 = 0.5\nrun.t_end = 3.5\n")
    again = parse_config(cfg.serialize())
    assert again == cfg
    assert again.config_hash() == cfg.config_hash()


def test_hash_sensitive_to_values():
    a = parse_config(MINIMAL)
    b = parse_config(MINIMAL + "run.t_end = 9.0\n")
    assert a.config_hash() != b.config_hash()


def test_with_overrides():
    cfg = parse_config(MINIMAL)
    out = cfg.with_overrides({"params.eps": 1e-3, "run.t_end": "4.0"})
    assert out["params.eps"] == 1e-3
    assert out["run.t_end"] == 4.0
    assert cfg["params.eps"] == 0.0  # original untouched
    with pytest.raises(ConfigError):
        cfg.with_overrides({"nope": 1})


def test_canonical_scenarios_load():
    for name in CANONICAL_SCENARIOS:
        cfg = canonical_config(name)
        assert isinstance(cfg, ScenarioConfig)
    with pytest.raises(ConfigError):
        canonical_config("missing_case")


def test_invalid_structured_values_rejected():
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "params.kappa = 3\n")
