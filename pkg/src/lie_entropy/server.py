"""MCP stdio server exposing the batch operations of the command-line interface.

Tools: ``list-presets``, ``show-preset`` and ``run-scenario``. Results are returned as
YAML text; errors are reported as text content instead of being raised through the
transport.
"""

import asyncio
import logging
from typing import Any, Dict

import mcp.server.stdio
import mcp.types as types
import yaml
from mcp.server import NotificationOptions, Server
from mcp.server.models import InitializationOptions

from . import __version__
from .cli import debug_requested, describe_preset
from .config import load_config
from .presets import list_presets
from .runner import emit, run_async
from .scenario import bundled_scenarios, load_scenario

# Set up logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger("lie-entropy")

# Initialize the configuration
config = load_config()

# Create the MCP server
server = Server("lie-entropy")


@server.list_tools()
async def handle_list_tools() -> list[types.Tool]:
    """List available tools that can be called by clients."""
    logger.info("Listing tools")
    return [
        types.Tool(
            name="list-presets",
            description="List the built-in linear systems and the bundled scenarios",
            inputSchema={"type": "object", "properties": {}},
        ),
        types.Tool(
            name="show-preset",
            description="Show formulas, group, analytic differential and bundled scenario of a preset",
            inputSchema={
                "type": "object",
                "properties": {"name": {"type": "string", "description": "Preset name"}},
                "required": ["name"],
            },
        ),
        types.Tool(
            name="run-scenario",
            description="Run a scenario (file path or bundled name) and return its YAML summary",
            inputSchema={
                "type": "object",
                "properties": {
                    "scenario": {"type": "string", "description": "Scenario YAML path or bundled scenario name"},
                    "mode": {"type": "string", "enum": ["greedy", "exact", "both"], "description": "Set-cover mode"},
                    "log_base": {"type": "string", "enum": ["2", "e"], "description": "Logarithm base"},
                    "seed": {"type": "integer", "description": "Random seed"},
                    "budget": {"type": "integer", "description": "Trajectory evaluation budget per r_inv call"},
                    "output_dir": {"type": "string", "description": "Optional directory for the emitted result files"},
                },
                "required": ["scenario"],
            },
        ),
    ]


async def _run_scenario(arguments: Dict[str, Any]) -> str:
    path = arguments.get("scenario")
    if not path:
        raise ValueError("Missing scenario")
    scenario = load_scenario(path).with_overrides(arguments.get("mode"), arguments.get("log_base"), arguments.get("seed"), arguments.get("budget"))
    report = await run_async(scenario, config)
    output_dir = arguments.get("output_dir")
    if output_dir:
        written = await asyncio.to_thread(emit, report, output_dir, config.runner.include_timings)
        logger.info(f"Scenario {scenario.name}: wrote {len(written)} files")
    return yaml.safe_dump(report.summary(config.runner.include_timings), sort_keys=False, default_flow_style=None)


@server.call_tool()
async def handle_call_tool(name: str, arguments: dict | None) -> list[types.TextContent | types.ImageContent | types.EmbeddedResource]:
    """Handle tool execution requests."""
    logger.info(f"Calling tool: {name} with arguments: {arguments}")
    arguments = arguments or {}

    try:
        if name == "list-presets":
            text = yaml.safe_dump({"presets": list_presets(), "scenarios": bundled_scenarios()}, sort_keys=False)
            return [types.TextContent(type="text", text=text)]

        elif name == "show-preset":
            preset = arguments.get("name")
            if not preset:
                raise ValueError("Missing preset name")
            text = yaml.safe_dump(describe_preset(preset), sort_keys=False, default_flow_style=None)
            return [types.TextContent(type="text", text=text)]

        elif name == "run-scenario":
            text = await _run_scenario(arguments)
            return [types.TextContent(type="text", text=text)]

        else:
            raise ValueError(f"Unknown tool: {name}")
    except Exception as e:
        logger.error(f"Error executing tool {name}: {str(e)}")
        import traceback

        logger.error(traceback.format_exc())

        # Return a properly formatted error response
        error_message = f"Error executing {name}: {str(e)}"
        return [types.TextContent(type="text", text=error_message)]


async def main() -> None:
    """Start the MCP server."""
    if debug_requested():
        logging.basicConfig(level=logging.DEBUG)
        logger.setLevel(logging.DEBUG)
        logger.debug("Debug mode enabled")

    logger.info("Starting MCP server using stdio transport")
    try:
        async with mcp.server.stdio.stdio_server() as (read_stream, write_stream):
            logger.info("stdio server initialized, running MCP server")
            await server.run(
                read_stream,
                write_stream,
                InitializationOptions(
                    server_name="lie-entropy",
                    server_version=__version__,
                    capabilities=server.get_capabilities(
                        notification_options=NotificationOptions(),
                        experimental_capabilities={},
                    ),
                ),
            )
    except Exception as e:
        logger.error(f"Error running MCP server: {e}")
        import traceback

        logger.error(traceback.format_exc())
        raise


# If this module is run directly, start the server
if __name__ == "__main__":
    asyncio.run(main())
