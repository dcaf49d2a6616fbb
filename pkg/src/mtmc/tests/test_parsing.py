import pytest

from ..parsing import (ScenarioError, build_config, dump_scenario, flat_dict_to_nested, load_scenario_file,
                       parse_overrides, parse_scenario_text, update_nested_dict_from_flat)
from ..scenario import Discrete, DiscreteTable, Scenario, load_scenario, scenario_from_text

TWO_STATE = """\
# comment
name = small
space = discrete
space.n = 2
[target]
_config_name = discretetable
masses = [0.75, 0.25]
[proposal]
_config_name = independent
masses = [0.5, 0.5]
"""


def test_parse_scenario_text():
    parsed = parse_scenario_text(TWO_STATE)
    assert parsed.values["space"] == "discrete"
    assert parsed.values["target.masses"] == "[0.75, 0.25]"
    assert parsed.lines["target.masses"] == 7
    assert parsed.line_of("target.masses.extra") == 7
    assert parsed.line_of("sampler.seed") is None

    parsed.update({"target.masses": "[0.5, 0.5]"})
    assert parsed.line_of("target.masses") is None


def test_empty_header_ends_section():
    parsed = parse_scenario_text("[target]\nmasses = [1, 2]\n[]\nname = after\n")
    assert parsed.values == {"target.masses": "[1, 2]", "name": "after"}
    assert parsed.lines["name"] == 4


def test_parse_errors():
    with pytest.raises(ScenarioError, match=r"target.masses \(line 3\): assigned twice") as excinfo:
        parse_scenario_text("[target]\nmasses = [1]\nmasses = [2]\n")
    assert excinfo.value.line == 3
    assert excinfo.value.field == "target.masses"
    with pytest.raises(ScenarioError, match="expected 'key = value'"):
        parse_scenario_text("name\n")


def test_parse_overrides():
    assert parse_overrides(["--sampler.seed", "3", "--name", "x"]) == {"sampler.seed": "3", "name": "x"}
    assert parse_overrides([]) == {}
    with pytest.raises(ScenarioError, match="pairs"):
        parse_overrides(["--sampler.seed"])
    with pytest.raises(ScenarioError, match="expected an option"):
        parse_overrides(["sampler.seed", "3"])


def test_flat_dict_to_nested():
    """A category name assigned to a key becomes the _config_name of its section."""
    nested = flat_dict_to_nested({"space.n": "3", "space": "discrete", "name": "x"})
    assert nested == {"name": "x", "space": {"_config_name": "discrete", "n": "3"}}

    target = {}
    update_nested_dict_from_flat(target, "a.b.c", 1)
    assert target == {"a": {"b": {"c": 1}}}


def test_build_config():
    scenario = build_config(Scenario, flat_dict_to_nested(parse_scenario_text(TWO_STATE).values))
    assert isinstance(scenario.space, Discrete)
    assert isinstance(scenario.target, DiscreteTable)
    assert scenario.target.masses == [0.75, 0.25]
    assert scenario.sampler.n_samples == 10000
    assert scenario.spectral is None


def test_defaults_are_not_shared():
    first = scenario_from_text(TWO_STATE)
    second = scenario_from_text(TWO_STATE)
    first.diagnostics.checkpoints.append(5)
    assert second.diagnostics.checkpoints == [100, 1000, 10000]


def test_invalid_value_names_field_and_line():
    text = TWO_STATE.replace("masses = [0.75, 0.25]", "masses = [0.75, -0.25]")
    with pytest.raises(ScenarioError, match=r"target.masses \(line 7\)") as excinfo:
        scenario_from_text(text)
    assert excinfo.value.field == "target.masses"


def test_unknown_fields_and_categories():
    with pytest.raises(ScenarioError, match=r"target.mass \(line 8\): not a field of DiscreteTable"):
        scenario_from_text(TWO_STATE.replace("masses = [0.75, 0.25]", "masses = [0.75, 0.25]\nmass = 1"))
    with pytest.raises(ScenarioError, match=r"space \(line 3\): Unknown SpaceConfig 'hexagonal'"):
        scenario_from_text(TWO_STATE.replace("space = discrete", "space = hexagonal"))
    with pytest.raises(ScenarioError, match=r"sampler \(line 12\): this section is required"):
        scenario_from_text(TWO_STATE + "[]\nsampler = null\n")


def test_optional_sections():
    scenario = scenario_from_text(TWO_STATE + "[spectral]\nhorizon = 10\n")
    assert scenario.spectral.horizon == 10
    assert scenario.spectral.approx is None
    assert scenario_from_text(TWO_STATE + "[]\nspectral = null\n").spectral is None


def test_overrides_win_over_file():
    scenario = scenario_from_text(TWO_STATE, {"sampler.seed": "7", "target.masses": "[0.5, 0.5]"})
    assert scenario.sampler.seed == 7
    assert scenario.target.masses == [0.5, 0.5]


def test_dump_round_trip():
    """Dumping and reloading gives an equal scenario and the same text."""
    for name in ("two-state", "bimodal", "gaussian"):
        scenario = load_scenario(name)
        text = dump_scenario(scenario)
        reloaded = scenario_from_text(text)
        assert reloaded == scenario
        assert dump_scenario(reloaded) == text


def test_load_scenario_file(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(TWO_STATE)
    scenario, text = load_scenario_file(path, Scenario, {"name": "renamed"})
    assert scenario.name == "renamed"
    assert text.line_of("target.masses") == 7
    with pytest.raises(ScenarioError, match="cannot read scenario file"):
        load_scenario_file(tmp_path / "missing.cfg", Scenario)
