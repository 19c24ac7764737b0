"""
Main entry point for the federated learning workbench MCP server.
"""

import sys
import signal
import time

from dotenv import load_dotenv
from mcp.server.fastmcp import FastMCP

from utils import configure_logging

# Load environment variables from .env file
load_dotenv()
configure_logging()

# Signal handler for graceful shutdown
def signal_handler(sig, frame):
    print(f"Received signal {sig}, shutting down gracefully", file=sys.stderr)
    sys.exit(0)

# Register signal handlers
signal.signal(signal.SIGINT, signal_handler)
signal.signal(signal.SIGTERM, signal_handler)

print(f"Starting fedbench MCP server initialization at {time.time()}", file=sys.stderr)
mcp = FastMCP("fedbench")
print(f"FastMCP server initialized successfully at {time.time()}", file=sys.stderr)

from tools.generate_dataset import generate_dataset
mcp.tool()(generate_dataset)

from tools.classify_parts import classify_parts
mcp.tool()(classify_parts)

from tools.run_experiment import run_experiment_tool
mcp.tool()(run_experiment_tool)

from tools.resources import get_status

# Register resource endpoints
mcp.resource("fedbench://status")(get_status)

# Start the server function - only used when running as a script
def main():
    mcp.run()

if __name__ == "__main__":
    main()
