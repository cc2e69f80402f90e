import json
import logging
import os
import sys

from flask import Flask, current_app, jsonify, make_response, request

from pv_resiliency import __version__
from pv_resiliency.config import load_config
from pv_resiliency.errors import ConfigurationError
from pv_resiliency.processor.simulation_processor import SimulationProcessor
from pv_resiliency.stdio_server import run_stdio_server

app = Flask(__name__)
logger = logging.getLogger(__name__)


# Initialize configuration and processor at app startup
with app.app_context():
    config = load_config(os.environ.get("PV_RESILIENCY_CONFIG"))
    app.config["SERVER_CONFIG"] = config.get("server", {})
    app.config["simulation_processor"] = SimulationProcessor(config)

# Server info
SERVER_INFO = {"name": "pv-resiliency-mcp-server", "version": __version__}

# Server capabilities
SERVER_CAPABILITIES = {"tools": {}}

# Protocol version
PROTOCOL_VERSION = "2025-06-18"

_CONTROLLER = {"type": "string", "enum": ["mpc", "baseline", "rule_based"], "description": "Controller to simulate"}
_WORKERS = {"type": "integer", "description": "Worker processes for independent sweep cells (default 1)", "default": 1}

SCENARIO_PROPERTIES = {
    "size": {"type": "string", "enum": ["A", "B", "C", "D", "E", "F"], "description": "System size preset (PV panels and battery units)"},
    "start": {"type": "string", "description": "Simulation start, ISO 8601 (e.g. '2017-09-10T00:00')"},
    "duration_days": {"type": "number", "description": "Simulated days (default 7)"},
    "house_model": {"type": "string", "enum": ["trace", "rc", "state_space"], "description": "House temperature model of the plant"},
    "forecast_mode": {"type": "string", "enum": ["perfect", "persistence", "noisy"], "description": "Irradiance forecast given to controllers"},
    "e_bat_initial": {"type": "number", "description": "Initial battery energy in Wh (default: full)"},
    "t_fr_initial": {"type": "number", "description": "Initial fridge temperature in degC (default 2)"},
    "weather_file": {"type": "string", "description": "Path of a weather CSV on the server; omitted means the bundled storm week"},
    "horizon_hours": {"type": "number", "description": "Planning horizon in hours for MPC and Rule-Based"},
    "fast_charge_budget_hours": {"type": "number", "description": "Rule-Based fast-charge hours per day"},
}

# Available tools
TOOLS_LIST = [
    {
        "name": "self_test",
        "description": "Solve a tiny MILP with the embedded solver and simulate one hour to verify the installation.",
        "inputSchema": {"type": "object", "properties": {}, "required": []},
    },
    {
        "name": "run_scenario",
        "description": "Run one closed-loop outage simulation and return the resiliency report (PRM, SRM, solver statistics).",
        "inputSchema": {
            "type": "object",
            "properties": {
                "controller": _CONTROLLER,
                **SCENARIO_PROPERTIES,
                "include_trace": {"type": "boolean", "description": "Also return the per-step trace", "default": False},
            },
            "required": [],
        },
    },
    {
        "name": "sweep_sizes",
        "description": "Run every controller over the system size presets A-F and report where Baseline reaches MPC's PRM at size A.",
        "inputSchema": {
            "type": "object",
            "properties": {
                "presets": {"type": "array", "items": {"type": "string"}, "description": "Preset labels (default A-F)"},
                "controllers": {"type": "array", "items": {"type": "string"}, "description": "Controllers (default all three)"},
                "workers": _WORKERS,
                **SCENARIO_PROPERTIES,
            },
            "required": [],
        },
    },
    {
        "name": "sweep_horizon",
        "description": "Compare MPC and Rule-Based over planning horizons (default 1, 3, 6, 12 and 24 hours).",
        "inputSchema": {
            "type": "object",
            "properties": {
                "horizons_hours": {"type": "array", "items": {"type": "number"}, "description": "Horizons in hours"},
                "controllers": {"type": "array", "items": {"type": "string"}, "description": "Controllers (default mpc, rule_based)"},
                "workers": _WORKERS,
                **SCENARIO_PROPERTIES,
            },
            "required": [],
        },
    },
    {
        "name": "sweep_fast_charge",
        "description": "Run the Rule-Based controller for each daily fast-charge budget (default 0-6 hours).",
        "inputSchema": {
            "type": "object",
            "properties": {
                "budgets": {"type": "array", "items": {"type": "number"}, "description": "Budgets in hours per day"},
                "workers": _WORKERS,
                **SCENARIO_PROPERTIES,
            },
            "required": [],
        },
    },
    {
        "name": "compare_house_models",
        "description": "Run MPC against the trace-driven and the first-order RC house models.",
        "inputSchema": {
            "type": "object",
            "properties": {
                "models": {"type": "array", "items": {"type": "string"}, "description": "House models (default trace, rc)"},
                "workers": _WORKERS,
                **SCENARIO_PROPERTIES,
            },
            "required": [],
        },
    },
    {
        "name": "validate_solver",
        "description": "Check the embedded MILP solver against brute-force enumeration and LP duality on random instances.",
        "inputSchema": {
            "type": "object",
            "properties": {
                "n_milp": {"type": "integer", "description": "Random MILP instances (default 500)"},
                "n_lp": {"type": "integer", "description": "Random LP instances (default 200)"},
                "seed": {"type": "integer", "description": "Random seed (default 0)"},
                "max_binary": {"type": "integer", "description": "Largest number of binaries per instance (default 10)"},
            },
            "required": [],
        },
    },
    {
        "name": "gen_profile",
        "description": "Write the secondary load profile and the historical temperature profiles used by a scenario.",
        "inputSchema": {
            "type": "object",
            "properties": {
                "output_dir": {"type": "string", "description": "Directory on the server (default from configuration)"},
                "n_days": {"type": "number", "description": "Days of secondary profile (default: scenario duration)"},
                **SCENARIO_PROPERTIES,
            },
            "required": [],
        },
    },
    {
        "name": "solve_milp",
        "description": "Solve a small user supplied MILP (minimisation) with the embedded branch and bound solver.",
        "inputSchema": {
            "type": "object",
            "properties": {
                "problem": {
                    "type": "object",
                    "description": (
                        "{'variables': [{'name', 'lo', 'hi', 'cost', 'binary'}], "
                        "'constraints': [{'coefs': {variable name: coefficient}, 'sense': '<=' | '>=' | '=', 'rhs'}]}"
                    ),
                },
                "node_limit": {"type": "integer", "description": "Branch and bound node cap"},
                "time_limit": {"type": "number", "description": "Wall clock cap in seconds"},
            },
            "required": ["problem"],
        },
    },
]


def self_test():
    """Verify the solver and the simulator"""
    try:
        processor = current_app.config["simulation_processor"]
        result = processor.self_test()
        if result:
            return {"status": "success", "message": "Solver and simulator are working", "data": processor.describe()}
        else:
            return {"status": "failed", "message": "Self test failed"}
    except Exception as e:
        return {"status": "error", "message": f"Self test failed: {e!s}"}


def run_resiliency_scenario(include_trace=False, **arguments):
    """Run one closed-loop simulation"""
    try:
        processor = current_app.config["simulation_processor"]
        result = processor.run_scenario(include_trace=include_trace, **arguments)
        report = result["report"]
        return {
            "status": "success",
            "message": f"{report['controller']} finished {result['steps']} steps: PRM {report['prm']:.2f} h/day, SRM {report['srm']:.2f}%",
            "data": result,
        }
    except ConfigurationError as e:
        return {"status": "failed", "message": f"Invalid scenario: {e!s}"}
    except Exception as e:
        return {"status": "error", "message": f"Failed to run scenario: {e!s}"}


def _sweep_response(name, result):
    failed = [row for row in result["rows"] if row.get("status") != "ok"]
    if failed and len(failed) == len(result["rows"]):
        return {"status": "failed", "message": f"All {len(failed)} {name} cells failed", "data": result}
    return {"status": "success", "message": f"Completed {len(result['rows'])} {name} cells ({len(failed)} failed)", "data": result}


def run_sweep_sizes(**arguments):
    """Sweep system sizes A-F"""
    try:
        processor = current_app.config["simulation_processor"]
        return _sweep_response("size sweep", processor.sweep_sizes(**arguments))
    except Exception as e:
        return {"status": "error", "message": f"Failed to sweep sizes: {e!s}"}


def run_sweep_horizon(**arguments):
    """Sweep planning horizons"""
    try:
        processor = current_app.config["simulation_processor"]
        return _sweep_response("horizon sweep", processor.sweep_horizon(**arguments))
    except Exception as e:
        return {"status": "error", "message": f"Failed to sweep horizons: {e!s}"}


def run_sweep_fast_charge(**arguments):
    """Sweep Rule-Based fast-charge budgets"""
    try:
        processor = current_app.config["simulation_processor"]
        return _sweep_response("fast-charge sweep", processor.sweep_fast_charge(**arguments))
    except Exception as e:
        return {"status": "error", "message": f"Failed to sweep fast-charge budgets: {e!s}"}


def run_compare_house_models(**arguments):
    """Compare plant house models"""
    try:
        processor = current_app.config["simulation_processor"]
        return _sweep_response("house model", processor.compare_house_models(**arguments))
    except Exception as e:
        return {"status": "error", "message": f"Failed to compare house models: {e!s}"}


def run_validate_solver(**arguments):
    """Validate the embedded solver"""
    try:
        processor = current_app.config["simulation_processor"]
        result = processor.validate_solver(**arguments)
        failures = result["summary"]["failures"]
        if failures:
            return {"status": "failed", "message": f"Solver validation found {failures} mismatches", "data": result}
        return {"status": "success", "message": "Solver agrees with the reference on every instance", "data": result}
    except Exception as e:
        return {"status": "error", "message": f"Failed to validate solver: {e!s}"}


def run_gen_profile(**arguments):
    """Write demand and historical temperature profiles"""
    try:
        processor = current_app.config["simulation_processor"]
        result = processor.gen_profile(**arguments)
        return {"status": "success", "message": f"Wrote profiles for {result['steps']} steps", "data": result}
    except Exception as e:
        return {"status": "error", "message": f"Failed to generate profiles: {e!s}"}


def run_solve_milp(problem, node_limit=None, time_limit=None):
    """Solve a user supplied MILP"""
    try:
        processor = current_app.config["simulation_processor"]
        result = processor.solve_milp(problem, node_limit=node_limit, time_limit=time_limit)
        if result["x"] is None:
            return {"status": "failed", "message": f"No solution: {result['status']}", "data": result}
        return {"status": "success", "message": f"Solver finished with status {result['status']}", "data": result}
    except Exception as e:
        return {"status": "error", "message": f"Failed to solve MILP: {e!s}"}


# Function mapping
FUNCTION_MAPPING = {
    "self_test": self_test,
    "run_scenario": run_resiliency_scenario,
    "sweep_sizes": run_sweep_sizes,
    "sweep_horizon": run_sweep_horizon,
    "sweep_fast_charge": run_sweep_fast_charge,
    "compare_house_models": run_compare_house_models,
    "validate_solver": run_validate_solver,
    "gen_profile": run_gen_profile,
    "solve_milp": run_solve_milp,
}


def handle_jsonrpc_request(data):
    request_id = data.get("id")
    method = data.get("method")
    params = data.get("params", {})

    # Handle JSON-RPC notifications (no id field or method starts with 'notifications/')
    if method and method.startswith("notifications/"):
        logger.info(f"Received notification: {method}")
        return {"jsonrpc": "2.0", "result": {}, "id": request_id}

    # Handle initialization (stateless: just validate and return capabilities)
    if method == "initialize":
        client_protocol_version = params.get("protocolVersion")
        # Accept any protocol version that starts with '2025-'
        if not (isinstance(client_protocol_version, str) and client_protocol_version.startswith("2025-")):
            return {
                "jsonrpc": "2.0",
                "error": {"code": -32602, "message": f"Unsupported protocol version: {client_protocol_version}. Server supports: {PROTOCOL_VERSION}"},
                "id": request_id,
            }
        return {
            "jsonrpc": "2.0",
            "result": {"protocolVersion": PROTOCOL_VERSION, "capabilities": SERVER_CAPABILITIES, "serverInfo": SERVER_INFO},
            "id": request_id,
        }

    if method == "tools/list":
        return {"jsonrpc": "2.0", "result": {"tools": TOOLS_LIST}, "id": request_id}

    if method == "tools/call":
        tool_name = params.get("name")
        arguments = params.get("arguments", {})
        if not tool_name:
            return {"jsonrpc": "2.0", "error": {"code": -32602, "message": "Invalid params: 'name' is required for tool execution"}, "id": request_id}
        if tool_name not in FUNCTION_MAPPING:
            return {"jsonrpc": "2.0", "error": {"code": -32601, "message": f"Tool not found: {tool_name}"}, "id": request_id}
        try:
            func = FUNCTION_MAPPING[tool_name]
            result = func(**arguments)
            if result.get("status") == "error":
                logger.error(f"Tool {tool_name} failed: {result.get('message')}")
            return {"jsonrpc": "2.0", "result": {"content": [{"type": "text", "text": json.dumps(result, indent=2)}]}, "id": request_id}
        except Exception as e:
            logger.error(f"Tool {tool_name} raised: {e}")
            return {"jsonrpc": "2.0", "error": {"code": -32000, "message": f"Error executing tool: {e!s}"}, "id": request_id}

    # Unknown method
    return {"jsonrpc": "2.0", "error": {"code": -32601, "message": f"Method not found: {method}"}, "id": request_id}


@app.route("/mcp", methods=["POST", "GET"])
def mcp_endpoint():
    if request.method == "GET":
        return make_response(jsonify({"message": "This endpoint expects JSON-RPC POST requests. Use POST with application/json."}), 405)

    data = request.get_json(silent=True)
    logger.info(f"Received request: {data}")

    if not data:
        return jsonify({"jsonrpc": "2.0", "error": {"code": -32700, "message": "Parse error"}, "id": None}), 400

    response = handle_jsonrpc_request(data)
    status_code = 200
    if "error" in response:
        # Map error codes to HTTP status codes
        code = response["error"].get("code", -32000)
        if code in (-32700, -32600, -32602):
            status_code = 400
        elif code == -32601:
            status_code = 404
        else:
            status_code = 500
    return jsonify(response), status_code


@app.route("/health", methods=["GET"])
def health_check():
    return jsonify({"status": "ok"})


def main():
    logging.basicConfig(level=os.environ.get("PV_RESILIENCY_LOG_LEVEL", "INFO"), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    transport = os.environ.get("MCP_TRANSPORT", "http")
    if ("-t" in sys.argv and "stdio" in sys.argv) or ("--transport" in sys.argv and "stdio" in sys.argv) or (transport == "stdio"):

        def stdio_handler(data):
            with app.app_context():
                return handle_jsonrpc_request(data)

        run_stdio_server(stdio_handler)
    else:
        port = app.config["SERVER_CONFIG"].get("port", 8000)
        debug = app.config["SERVER_CONFIG"].get("debug", False)
        app.run(host="0.0.0.0", port=port, debug=debug)  # noqa: S104


if __name__ == "__main__":
    main()
