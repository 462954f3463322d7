"""Unit tests for scenario parsing and validation."""

import pytest

from lie_entropy.errors import ValidationError
from lie_entropy.scenario import ScenarioError, bundled_scenarios, load_scenario, parse_scenario, resolve_scenario_path


def test_parse_valid_scenario(scenario_text):
    scenario = parse_scenario(scenario_text, source="small.yaml")
    assert scenario.name == "small_scalar"
    assert scenario.preset == "euclid_ab"
    assert scenario.eps_list == [0.2, 0.1]
    assert scenario.n_values == [2, 3, 4, 5, 6]
    assert scenario.seed == 7
    assert scenario.log_base == "2"
    system = scenario.build_system()
    assert system.control.size == 16
    pair = scenario.build_pair(system)
    assert pair.epsilon == 0.1
    assert pair.size == 65
    assert scenario.build_pair(system, 0.2).epsilon == 0.2
    assert pair.serving == "point"
    cell = parse_scenario(scenario_text.replace("  Q_upper: [1.0]", "  Q_upper: [1.0]\n  serving: cell"))
    assert cell.build_pair(system).serving == "cell"


def test_load_scenario_from_file(scenario_file):
    scenario = load_scenario(scenario_file)
    assert scenario.name == "small_scalar"
    assert scenario.source.endswith(".yaml")


@pytest.mark.parametrize(
    "old, new, field_name, line",
    [
        ("eps_list: [0.2, 0.1]", "eps_list: [0.1, 0.2]", "eps_list", 10),
        ("eps_list: [0.2, 0.1]", "eps_list: [0.2, -0.1]", "eps_list", 10),
        ("rho: 0.015625", "rho: 0.05", "pair.rho", 7),
        ("rho: 0.015625", "rho: 0", "pair.rho", 7),
        ("preset: euclid_ab", "preset: pendulum", "preset", 2),
        ("n_range: [2, 6]", "n_range: [6, 2]", "n_range", 11),
        ("n_range: [2, 6]", "n_range: [2.5, 6]", "n_range", 11),
        ("mode: greedy", "mode: random", "mode", 12),
        ('log_base: "2"', "log_base: 10", "log_base", 13),
        ("seed: 7", "seed: seven", "seed", 14),
        ("  Q_upper: [1.0]", "  Q_upper: [1.0]\n  colour: red", "pair.colour", 10),
        ("  Q_upper: [1.0]", "  Q_upper: [1.0]\n  serving: area", "pair.serving", 10),
    ],
)
def test_invalid_fields_report_line(scenario_text, old, new, field_name, line):
    text = scenario_text.replace(old, new)
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario(text, source="small.yaml")
    assert excinfo.value.field_name == field_name
    assert excinfo.value.line == line
    assert excinfo.value.message.startswith(f"small.yaml:{line}: {field_name}:")
    assert excinfo.value.to_dict()["line"] == line


def test_k_outside_q_rejected_when_pair_is_built(scenario_text):
    scenario = parse_scenario(scenario_text.replace("  K_upper: [0.5]", "  K_upper: [1.5]"))
    with pytest.raises(ValidationError, match="outside Q"):
        scenario.build_pair(scenario.build_system())


def test_unknown_top_level_field(scenario_text):
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario(scenario_text + "colour: red\n")
    assert excinfo.value.field_name == "colour"
    assert excinfo.value.line == 15
    assert excinfo.value.stage == "scenario"


def test_missing_required_fields(scenario_text):
    without_eps = "\n".join(line for line in scenario_text.splitlines() if not line.startswith("eps_list"))
    with pytest.raises(ScenarioError, match="eps_list is required"):
        parse_scenario(without_eps)
    without_pair = scenario_text.split("pair:")[0] + "eps_list: [0.2]\nn_range: [1, 2]\n"
    with pytest.raises(ScenarioError, match="pair block"):
        parse_scenario(without_pair)


def test_invalid_yaml_reports_line():
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario("preset: euclid_ab\npair: [unclosed\n")
    assert excinfo.value.line is not None
    with pytest.raises(ScenarioError, match="mapping"):
        parse_scenario("- just\n- a list\n")


def test_inline_matrices():
    text = """name: inline_saddle
A: [[2.0, 0.0], [0.0, 0.5]]
B: [[1.0], [0.0]]
control_lower: [-1.0]
control_upper: [1.0]
delta: 0.5
pair:
  K_lower: [-0.1, -0.1]
  K_upper: [0.1, 0.1]
  rho: 0.05
  Q_center: [0.0, 0.0]
  Q_radius: 1.0
eps_list: [0.2]
n_range: [1, 4]
"""
    scenario = parse_scenario(text)
    system = scenario.build_system()
    assert system.name == "inline_saddle"
    assert system.group.dimension == 2
    assert system.control.size == 5
    assert scenario.build_pair(system).size == 25


def test_inline_matrices_conflict_with_preset(scenario_text):
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario(scenario_text + "A: [[1.0]]\n")
    assert excinfo.value.field_name == "A"
    with pytest.raises(ScenarioError, match="A and B"):
        parse_scenario(scenario_text.replace("preset: euclid_ab\n", ""))


def test_singular_inline_matrix_rejected(scenario_text):
    text = scenario_text.replace("preset: euclid_ab\n", "A: [[0.0]]\nB: [[1.0]]\n")
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario(text)
    assert excinfo.value.field_name == "A"


def test_control_box_must_contain_zero(scenario_text):
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario(scenario_text + "control_lower: [0.2]\n")
    assert excinfo.value.field_name == "control_lower"
    assert "contain 0" in str(excinfo.value)


def test_optional_fields(scenario_text):
    text = scenario_text + "budget: 1000\nfit_window: [3, 6]\nseparated_n_range: [1, 4]\nseparated_epsilon: 0.1\nadmissibility_horizon: 8\n"
    scenario = parse_scenario(text)
    assert scenario.budget == 1000
    assert scenario.fit_window == (3, 6)
    assert scenario.separated_n_values == [1, 2, 3, 4]
    assert scenario.separated_epsilon == 0.1
    assert scenario.admissibility_horizon == 8
    assert scenario.to_dict()["fit_window"] == [3, 6]


@pytest.mark.parametrize(
    "extra, field_name",
    [
        ("budget: 0\n", "budget"),
        ("separated_n_range: [1, 4]\n", "separated_epsilon"),
        ("separated_n_range: [0, 4]\nseparated_epsilon: 0.1\n", "separated_n_range"),
        ("admissibility_horizon: 3\n", "admissibility_horizon"),
        ("witness_epsilon: -0.5\n", "witness_epsilon"),
    ],
)
def test_invalid_optional_fields(scenario_text, extra, field_name):
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario(scenario_text + extra)
    assert excinfo.value.field_name == field_name


def test_with_overrides(scenario_text):
    scenario = parse_scenario(scenario_text)
    changed = scenario.with_overrides(mode="exact", log_base="e", seed=3, budget=500)
    assert (changed.mode, changed.log_base, changed.seed, changed.budget) == ("exact", "e", 3, 500)
    assert (scenario.mode, scenario.log_base, scenario.seed, scenario.budget) == ("greedy", "2", 7, None)
    assert scenario.with_overrides() == scenario
    for kwargs in ({"mode": "fast"}, {"log_base": "10"}, {"budget": 0}):
        with pytest.raises(ScenarioError):
            scenario.with_overrides(**kwargs)


def test_fingerprint(scenario_text):
    scenario = parse_scenario(scenario_text)
    assert scenario.fingerprint() == parse_scenario(scenario_text, source="elsewhere.yaml").fingerprint()
    assert scenario.fingerprint() != scenario.with_overrides(seed=8).fingerprint()
    assert scenario.fingerprint({"mode": "greedy"}) != scenario.fingerprint()
    assert len(scenario.fingerprint()) == 64


def test_bundled_scenarios_load():
    names = bundled_scenarios()
    assert names == ["aff_example", "euclid_ab", "heisenberg_example", "torus_cat"]
    for name in names:
        scenario = load_scenario(name)
        system = scenario.build_system()
        pair = scenario.build_pair(system)
        assert pair.size > 0
        assert scenario.budget == 50_000_000 or name == "torus_cat"


def test_torus_scenario_checks():
    scenario = load_scenario("torus_cat")
    assert scenario.witness_epsilon == 0.05
    assert scenario.separated_n_values == list(range(2, 11))


def test_unknown_scenario_name():
    with pytest.raises(ScenarioError, match="bundled"):
        resolve_scenario_path("no_such_scenario")
