import json
import logging
import sys

logger = logging.getLogger(__name__)


def _write(stream, payload):
    stream.write(json.dumps(payload) + "\n")
    stream.flush()


def run_stdio_server(handler, stdin=None, stdout=None):
    """
    Reads JSON-RPC requests from stdin, calls the handler, and writes responses to stdout.
    One JSON document per line in both directions; returns when stdin is closed.
    """
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as e:
            logger.error(f"Unparseable request line: {e}")
            _write(stdout, {"jsonrpc": "2.0", "error": {"code": -32700, "message": f"Parse error: {e}"}, "id": None})
            continue
        try:
            response = handler(data)
            _write(stdout, response)
        except Exception as e:
            logger.error(f"Handler failed: {e}")
            request_id = data.get("id") if isinstance(data, dict) else None
            _write(stdout, {"jsonrpc": "2.0", "error": {"code": -32000, "message": str(e)}, "id": request_id})
    logger.info("stdin closed, stopping stdio server")
