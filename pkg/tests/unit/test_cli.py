"""Unit tests for the command-line interface."""

import os
from unittest.mock import MagicMock, patch

import pytest
import yaml

from lie_entropy.cli import EXIT_FAIL, EXIT_INVALID, EXIT_PASS, build_parser, debug_requested, describe_preset, main
from lie_entropy.errors import LieEntropyError
from lie_entropy.setcover import BudgetExceeded


def test_parser_run_options():
    """Test parsing of the run subcommand."""
    args = build_parser().parse_args(["--debug", "run", "euclid_ab", "--out", "res", "--mode", "both", "--log-base", "e", "--seed", "4", "--budget", "99", "--timings"])
    assert args.debug
    assert (args.command, args.scenario, args.out, args.mode, args.log_base, args.seed, args.budget, args.timings) == (
        "run",
        "euclid_ab",
        "res",
        "both",
        "e",
        4,
        99,
        True,
    )


def test_parser_rejects_bad_mode():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "euclid_ab", "--mode", "fast"])


def test_debug_requested():
    """Test detection of debug mode from argv and the environment."""
    assert debug_requested(["lie-entropy", "--debug"])
    with patch.dict(os.environ, {"LIE_ENTROPY_DEBUG": "yes"}):
        assert debug_requested([])
    with patch.dict(os.environ, {"LIE_ENTROPY_DEBUG": "0"}):
        assert not debug_requested([])


def test_describe_preset():
    info = describe_preset("euclid_ab")
    assert info["group"] == "euclidean:1"
    assert info["differential"] == [[2.0]]
    assert info["control"]["letters"] == 16
    assert info["scenario"]["preset"] == "euclid_ab"


def test_presets_list(capsys):
    assert main(["presets", "list"]) == EXIT_PASS
    assert capsys.readouterr().out.split() == ["aff_example", "euclid_ab", "heisenberg_example", "torus_cat"]


def test_presets_show(capsys):
    assert main(["presets", "show", "heisenberg_example"]) == EXIT_PASS
    data = yaml.safe_load(capsys.readouterr().out)
    assert data["group"] == "heisenberg3"
    assert data["dimension"] == 3


def test_presets_show_unknown(capsys):
    assert main(["presets", "show", "pendulum"]) == EXIT_INVALID
    assert "Error" in capsys.readouterr().err


def test_run_writes_results(scenario_file, tmp_path, capsys):
    """Test a full run of the small scenario."""
    out = tmp_path / "results"
    assert main(["run", scenario_file, "--out", str(out)]) == EXIT_PASS
    printed = capsys.readouterr().out
    assert printed.startswith("small_scalar: PASS")
    assert "Bowen bound 1.0000" in printed
    assert (out / "entropy_table.csv").exists()
    assert (out / "summary.yaml").exists()


def test_run_invalid_scenario(tmp_path, capsys):
    """Scenario validation errors exit with code 2."""
    path = tmp_path / "bad.yaml"
    path.write_text("preset: euclid_ab\npair: {}\n")
    assert main(["run", str(path), "--out", str(tmp_path)]) == EXIT_INVALID
    assert "Error" in capsys.readouterr().err


def test_run_budget_exceeded(scenario_file, tmp_path):
    assert main(["run", scenario_file, "--budget", "1000", "--out", str(tmp_path)]) == EXIT_INVALID


@patch("lie_entropy.cli.emit")
@patch("lie_entropy.cli.run")
def test_run_failing_verdict(mock_run, mock_emit, scenario_file, capsys):
    """A failed comparison exits with code 1."""
    report = MagicMock()
    report.passed = False
    report.verdict = None
    report.topological_status = "FAIL"
    mock_run.return_value = report

    assert main(["run", scenario_file, "--out", "unused", "--timings"]) == EXIT_FAIL
    mock_emit.assert_called_once_with(report, "unused", True)
    printed = capsys.readouterr().out
    assert "small_scalar: FAIL" in printed
    assert "separated-set check: FAIL" in printed


@patch("lie_entropy.cli.run")
def test_run_domain_error(mock_run, scenario_file):
    mock_run.side_effect = LieEntropyError("stuck", stage="entropy")
    assert main(["run", scenario_file]) == EXIT_FAIL
    mock_run.side_effect = BudgetExceeded("too many words")
    assert main(["run", scenario_file]) == EXIT_INVALID


@patch("lie_entropy.cli.enable_debug")
def test_debug_flag(mock_enable_debug):
    assert main(["--debug", "presets", "list"]) == EXIT_PASS
    mock_enable_debug.assert_called_once()


def test_serve_starts_server():
    """Test that serve hands over to the MCP server."""
    with patch("lie_entropy.server.main") as mock_server_main, patch("lie_entropy.cli.asyncio.run") as mock_asyncio_run:
        assert main(["serve"]) == EXIT_PASS
    mock_server_main.assert_called_once()
    mock_asyncio_run.assert_called_once()
