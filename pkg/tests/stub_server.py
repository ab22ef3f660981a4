"""Minimal wire-protocol stand-in used by the client tests.

Usage: python stub_server.py MODE
Modes: ok, error, bad-probs, wrong-id, hang, exit-early
"""

import json
import math
import sys


def probs_for(flat):
    total = sum(flat)
    logits = [total, total / 2.0, 0.0]
    peak = max(logits)
    exps = [math.exp(v - peak) for v in logits]
    norm = sum(exps)
    return [v / norm for v in exps]


def main():
    mode = sys.argv[1] if len(sys.argv) > 1 else "ok"
    print(json.dumps({"protocol": 1, "classes": 3, "input_shape": [4]}), flush=True)
    if mode == "exit-early":
        return
    for line in sys.stdin:
        request = json.loads(line)
        if mode == "hang":
            import time
            time.sleep(3600)
        if mode == "error":
            print(json.dumps({"id": request["id"], "error": "boom"}), flush=True)
            continue
        if mode == "wrong-id":
            print(json.dumps({"id": request["id"] + 1000, "probs": [[1, 0, 0]] * len(request["inputs"])}), flush=True)
            continue
        if mode == "bad-probs":
            print(json.dumps({"id": request["id"], "probs": [[0.5, 0.4, 0.2]] * len(request["inputs"])}), flush=True)
            continue
        probs = [probs_for(flat) for flat in request["inputs"]]
        print(json.dumps({"id": request["id"], "probs": probs}), flush=True)


if __name__ == "__main__":
    main()
