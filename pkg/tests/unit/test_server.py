"""Unit tests for the MCP server implementation."""

import os
from unittest.mock import AsyncMock, MagicMock, patch

import pytest
import yaml

from lie_entropy.server import handle_call_tool, handle_list_tools, main


@pytest.mark.asyncio
async def test_handle_list_tools():
    """Test listing available tools."""
    tools = await handle_list_tools()
    assert isinstance(tools, list)
    assert [tool.name for tool in tools] == ["list-presets", "show-preset", "run-scenario"]

    # Verify each tool has proper schema
    for tool in tools:
        assert tool.description
        assert tool.inputSchema["type"] == "object"
        assert "properties" in tool.inputSchema


@pytest.mark.asyncio
async def test_list_presets_tool():
    """Test the preset listing tool."""
    result = await handle_call_tool("list-presets", None)
    data = yaml.safe_load(result[0].text)
    assert data["presets"] == ["aff_example", "euclid_ab", "heisenberg_example", "torus_cat"]
    assert "torus_cat" in data["scenarios"]


@pytest.mark.asyncio
async def test_show_preset_tool():
    """Test showing a preset."""
    result = await handle_call_tool("show-preset", {"name": "aff_example"})
    data = yaml.safe_load(result[0].text)
    assert data["group"] == "aff_plus"
    assert data["scenario"]["name"] == "aff_example"


@pytest.mark.asyncio
async def test_show_preset_errors_are_text():
    """Missing or unknown presets come back as text, not exceptions."""
    missing = await handle_call_tool("show-preset", {})
    assert missing[0].text == "Error executing show-preset: Missing preset name"
    unknown = await handle_call_tool("show-preset", {"name": "pendulum"})
    assert unknown[0].text.startswith("Error executing show-preset:")


@pytest.mark.asyncio
async def test_unknown_tool():
    """Test calling an unknown tool."""
    result = await handle_call_tool("unknown-tool", {})
    assert result[0].text == "Error executing unknown-tool: Unknown tool: unknown-tool"


@pytest.mark.asyncio
async def test_run_scenario_tool(scenario_file, tmp_path):
    """Test running a scenario file through the tool interface."""
    output_dir = str(tmp_path / "out")
    result = await handle_call_tool("run-scenario", {"scenario": scenario_file, "mode": "greedy", "seed": 3, "output_dir": output_dir})
    summary = yaml.safe_load(result[0].text)
    assert summary["scenario"] == "small_scalar"
    assert summary["verdict"] == "PASS"
    assert summary["provenance"]["seed"] == 3
    assert os.path.exists(os.path.join(output_dir, "summary.yaml"))


@patch("lie_entropy.server.emit")
@patch("lie_entropy.server.run_async", new_callable=AsyncMock)
@pytest.mark.asyncio
async def test_run_scenario_tool_without_output(mock_run_async, mock_emit):
    """Without an output directory nothing is written."""
    mock_report = MagicMock()
    mock_report.summary.return_value = {"scenario": "euclid_ab", "verdict": "FAIL"}
    mock_run_async.return_value = mock_report

    result = await handle_call_tool("run-scenario", {"scenario": "euclid_ab", "budget": 1000})

    assert yaml.safe_load(result[0].text) == {"scenario": "euclid_ab", "verdict": "FAIL"}
    scenario = mock_run_async.call_args[0][0]
    assert scenario.budget == 1000
    mock_emit.assert_not_called()


@pytest.mark.asyncio
async def test_run_scenario_tool_invalid_override():
    """Invalid overrides are reported as text."""
    result = await handle_call_tool("run-scenario", {"scenario": "euclid_ab", "mode": "fast"})
    assert "mode must be greedy, exact or both" in result[0].text
    missing = await handle_call_tool("run-scenario", {})
    assert missing[0].text == "Error executing run-scenario: Missing scenario"


@pytest.mark.asyncio
async def test_main():
    """Test the main function."""
    # Create mock async context manager
    mock_context = AsyncMock()
    mock_read_stream = AsyncMock()
    mock_write_stream = AsyncMock()
    mock_context.__aenter__.return_value = (mock_read_stream, mock_write_stream)

    with patch("mcp.server.stdio.stdio_server", return_value=mock_context), patch("lie_entropy.server.server.run") as mock_run:
        await main()

    mock_run.assert_called_once()
    options = mock_run.call_args[0][2]
    assert options.server_name == "lie-entropy"


@pytest.mark.asyncio
async def test_main_reraises_errors():
    """Errors from the transport are logged and re-raised."""
    with patch("mcp.server.stdio.stdio_server", side_effect=RuntimeError("no stdio")):
        with pytest.raises(RuntimeError, match="no stdio"):
            await main()
