"""Unit tests for the runner module."""

import csv
import os

import pytest
import yaml

from lie_entropy.config import Configuration
from lie_entropy.runner import ENTROPY_COLUMNS, FIT_COLUMNS, SEPARATED_COLUMNS, RunReport, _num, _plain, emit, run, run_async
from lie_entropy.scenario import parse_scenario
from lie_entropy.setcover import BudgetExceeded

TORUS_SCENARIO = """name: small_torus
preset: torus_cat
control_lower: [0.0]
control_upper: [0.0]
delta: 1.0
pair:
  K_lower: [0.1, 0.3]
  K_upper: [0.15, 0.3]
  rho: 0.0005
  Q_lower: [0.0, 0.0]
  Q_upper: [1.0, 1.0]
eps_list: [0.05]
n_range: [1, 4]
separated_n_range: [2, 5]
separated_epsilon: 0.05
witness_epsilon: 0.2
witness_t_max: 1000.0
"""


@pytest.fixture
def small_scenario(scenario_text):
    return parse_scenario(scenario_text, source="small.yaml")


@pytest.fixture
def small_report(small_scenario):
    return run(small_scenario, Configuration())


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_num_formatting():
    assert _num(None) == ""
    assert _num(True) == "true"
    assert _num(3) == "3"
    assert _num(0.1) == "0.1"
    assert _num(1.0 / 3.0) == "0.333333333333"


def test_plain_converts_numpy():
    import numpy as np

    data = _plain({"a": np.float64(0.5), "b": np.arange(3), "c": (np.int64(2), np.bool_(True))})
    assert data == {"a": 0.5, "b": [0, 1, 2], "c": [2, True]}
    assert type(data["c"][0]) is int


def test_run_small_scenario(small_report):
    report = small_report
    assert report.log_base == "2"
    assert [cell.epsilon for cell in report.sweep.cells] == [0.2, 0.1]
    assert report.certificate.horizon == 6
    assert report.quotient_status.startswith("identity chart")
    assert report.lower.slope == pytest.approx(1.0)
    assert report.spectral.bowen == pytest.approx(1.0)
    assert report.verdict.upper_status == "PASS"
    assert report.passed
    assert report.separated is None
    assert report.topological_status is None
    assert set(report.timings) == {"system", "spectral", "pair", "quotient", "admissibility", "entropy", "theorem"}
    assert len(report.entropy_rows()) == 10
    assert set(report.checks) == {"group_axioms", "solution_formula", "exp_conjugation"}
    assert all(check["passed"] for check in report.checks.values())


def test_exact_cell_run_compares_lower_bound(scenario_text):
    text = scenario_text.replace("  Q_upper: [1.0]\n", "  Q_upper: [1.0]\n  serving: cell\n").replace("mode: greedy", "mode: exact")
    report = run(parse_scenario(text, source="cell.yaml"), Configuration())
    assert report.checks["lower_vs_exact"] == {"passed": True, "serving": "cell", "violations": []}
    assert report.certificate.to_dict()["points"] == 65


@pytest.mark.asyncio
async def test_run_async_leaves_config_untouched(small_scenario):
    config = Configuration()
    report = await run_async(small_scenario.with_overrides(budget=2_000_000), config)
    assert config.budget.max_evaluations == 10_000_000
    assert report.provenance["seed"] == 7
    assert len(report.provenance["fingerprint"]) == 64


def test_budget_error_tagged_with_stage(small_scenario):
    with pytest.raises(BudgetExceeded) as excinfo:
        run(small_scenario.with_overrides(budget=1000), Configuration())
    assert excinfo.value.stage == "entropy"


def test_emit_files(small_report, tmp_path):
    written = emit(small_report, str(tmp_path))
    names = sorted(os.path.basename(p) for p in written)
    assert names == sorted(["entropy_table.csv", "fits.csv", "separated_table.csv", "growth_eps_0.2.dat", "growth_eps_0.1.dat", "summary.yaml"])

    entropy = read_csv(tmp_path / "entropy_table.csv")
    assert entropy[0] == ENTROPY_COLUMNS
    assert len(entropy) == 11
    assert entropy[1][0] == "small_scalar"
    assert entropy[1][ENTROPY_COLUMNS.index("method")] == "greedy"

    fits = read_csv(tmp_path / "fits.csv")
    assert fits[0] == FIT_COLUMNS
    assert [row[0] for row in fits[1:]] == ["0.2", "0.1"]

    assert read_csv(tmp_path / "separated_table.csv") == [SEPARATED_COLUMNS]

    with open(tmp_path / "growth_eps_0.1.dat") as f:
        lines = f.read().splitlines()
    assert lines[0] == "# n log_r_inv (base 2)"
    assert [line.split()[0] for line in lines[1:]] == ["2", "3", "4", "5", "6"]

    with open(tmp_path / "summary.yaml") as f:
        summary = yaml.safe_load(f)
    assert summary["verdict"] == "PASS"
    assert summary["theorem"]["upper"]["status"] == "PASS"
    assert "timings" not in summary


def test_emit_with_timings(small_report, tmp_path):
    emit(small_report, str(tmp_path), include_timings=True)
    with open(tmp_path / "summary.yaml") as f:
        assert "entropy" in yaml.safe_load(f)["timings"]


def test_emit_is_deterministic(small_scenario, tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    emit(run(small_scenario, Configuration()), str(first))
    emit(run(small_scenario, Configuration()), str(second))
    for name in os.listdir(first):
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_emit_empty_report(small_scenario, tmp_path):
    report = RunReport(scenario=small_scenario, system=small_scenario.build_system(), log_base="2")
    assert not report.passed
    written = emit(report, str(tmp_path))
    assert read_csv(tmp_path / "entropy_table.csv") == [ENTROPY_COLUMNS]
    assert read_csv(tmp_path / "fits.csv") == [FIT_COLUMNS]
    assert len(written) == 4


def test_torus_run_with_separated_sets_and_witness(tmp_path):
    report = run(parse_scenario(TORUS_SCENARIO), Configuration())
    assert report.quotient_status.startswith("StableSubgroupNotClosed")
    assert report.lower is None
    assert report.verdict.lower_status == "UNAVAILABLE"
    assert [cell.r_inv(n) for cell in report.sweep.cells for n in (1, 2, 3, 4)] == [1, 1, 1, 1]
    assert [r.n for r in report.separated.results] == [2, 3, 4, 5]
    assert all(r.spanning_verified and r.separation_verified for r in report.separated.results)
    assert report.topological_status in ("PASS", "FAIL")
    assert report.witness_status == "found"
    summary = report.summary()
    assert summary["density_witness"]["status"] == "found"
    assert summary["density_witness"]["targets"] == 25
    emit(report, str(tmp_path))
    assert len(read_csv(tmp_path / "separated_table.csv")) == 5
