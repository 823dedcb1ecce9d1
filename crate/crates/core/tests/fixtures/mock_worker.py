"""Minimal JSON-lines guest worker used by the process executor tests.

No sandboxing: it only serves trusted fixture code.
"""
import json
import sys
import time
import traceback

namespace = {}


def reply(req_id, ok, value=None, kind=None, message=None, tb=None):
    out = {"id": req_id, "ok": ok}
    if value is not None:
        out["value"] = value
    if kind is not None:
        out["error_kind"] = kind
        out["error_message"] = message
    if tb:
        out["traceback"] = tb
    sys.stdout.write(json.dumps(out) + "\n")
    sys.stdout.flush()


def call(req, name, *args):
    fn = namespace.get(name)
    if fn is None:
        return reply(req["id"], False, kind="missing-function", message=name + " is not loaded")
    saved = namespace.get("RNG_SEED")
    if req.get("rng_seed") is not None:
        namespace["RNG_SEED"] = req["rng_seed"]
    try:
        value = fn(*args)
    except Exception as exc:  # guest errors are reported, not raised
        return reply(req["id"], False, kind="guest-exception", message=repr(exc), tb=traceback.format_exc())
    finally:
        namespace["RNG_SEED"] = saved
    reply(req["id"], True, value=value)


for line in sys.stdin:
    req = json.loads(line)
    op = req["op"]
    if op == "ping":
        reply(req["id"], True)
    elif op == "load":
        code = req["code"]
        if "# mock: exit" in code:
            sys.exit(3)
        namespace = {"__name__": "guest"}
        try:
            exec(compile(code, "<guest>", "exec"), namespace)
        except SyntaxError as exc:
            reply(req["id"], False, kind="compile-error", message=str(exc))
            continue
        missing = [f for f in ("propose_action", "is_legal_action") if not callable(namespace.get(f))]
        if missing:
            reply(req["id"], False, kind="missing-function", message=", ".join(missing))
            continue
        if req.get("rng_seed") is not None:
            namespace["RNG_SEED"] = req["rng_seed"]
        reply(req["id"], True)
    elif op == "propose_action":
        if "sleep" in namespace:
            time.sleep(namespace["sleep"])
        call(req, "propose_action", req["board"])
    elif op == "is_legal_action":
        call(req, "is_legal_action", req["board"], req["action"])
    else:
        reply(req["id"], False, kind="protocol-error", message="unknown op " + op)
