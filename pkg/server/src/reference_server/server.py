"""The serving loop: handshake, then answer each request line in order.

Protocol (line-delimited JSON, UTF-8):
    handshake -> {"protocol": 1, "classes": C, "input_shape": [dims]}
    request   <- {"id": n, "inputs": [[flat floats], ...], "shape": [dims]}
    response  -> {"id": n, "probs": [[p1..pC], ...]}
    error     -> {"id": n, "error": "message"}

Malformed requests get an error response carrying whatever id could be
recovered (null otherwise) and the loop keeps serving. One request is handled
at a time, so responses always arrive in request order.
"""

from __future__ import annotations

import argparse
import importlib
import json
import sys
from dataclasses import dataclass

import numpy as np

from .toy import make_toy_model

PROTOCOL_VERSION = 1


@dataclass
class ServerConfig:
    class_count: int
    input_shape: tuple[int, ...]
    model: object = None            # batch predictor (n, *input_shape) -> probs
    model_spec: str = "toy"

    def predictor(self):
        if self.model is None:
            raise ValueError("server config carries no model")
        return self.model


def _load_import_path(spec: str):
    module_name, _, attr = spec.partition(":")
    if not attr:
        raise ValueError(f"model import path must look like pkg.module:callable, got {spec!r}")
    module = importlib.import_module(module_name)
    return getattr(module, attr)


def serve(config: ServerConfig, stdin=None, stdout=None) -> None:
    """Emit the handshake, then answer requests until the input stream closes."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    predict = config.predictor()

    def send(payload: dict) -> None:
        stdout.write(json.dumps(payload) + "\n")
        stdout.flush()

    send({
        "protocol": PROTOCOL_VERSION,
        "classes": config.class_count,
        "input_shape": list(config.input_shape),
    })

    for line in stdin:
        if not line.strip():
            continue
        request_id = None
        try:
            request = json.loads(line)
            request_id = request.get("id") if isinstance(request, dict) else None
            inputs = np.asarray(request["inputs"], dtype=float)
            shape = tuple(int(d) for d in request.get("shape", config.input_shape))
            if shape != tuple(config.input_shape):
                raise ValueError(f"request shape {shape} != served shape {tuple(config.input_shape)}")
            batch = inputs.reshape((len(inputs), *shape))
            probs = np.asarray(predict(batch), dtype=float)
            if probs.shape != (len(batch), config.class_count):
                raise ValueError(f"model produced shape {probs.shape}")
            if np.abs(probs.sum(axis=1) - 1.0).max() > 1e-6:
                raise ValueError("model probabilities do not sum to 1")
            send({"id": request_id, "probs": probs.tolist()})
        except Exception as exc:  # malformed request or model failure: keep serving
            send({"id": request_id, "error": f"{type(exc).__name__}: {exc}"})


def build_config(args) -> ServerConfig:
    input_shape = (args.height, args.width, args.channels)
    if args.model == "toy":
        model = make_toy_model(args.height, args.width, args.channels, args.side, args.classes)
    else:
        model = _load_import_path(args.model)
    return ServerConfig(
        class_count=args.classes,
        input_shape=input_shape,
        model=model,
        model_spec=args.model,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="revel-reference-server",
        description="Serve a classifier over the stdio inference protocol",
    )
    parser.add_argument("--classes", type=int, required=True)
    parser.add_argument("--height", type=int, required=True)
    parser.add_argument("--width", type=int, required=True)
    parser.add_argument("--channels", type=int, default=3)
    parser.add_argument("--side", type=int, default=4,
                        help="patch grid side for the built-in toy model")
    parser.add_argument("--model", default="toy",
                        help='"toy" or an import path pkg.module:callable taking (n, h, w, c) batches')
    args = parser.parse_args(argv)
    serve(build_config(args))
    return 0


if __name__ == "__main__":
    sys.exit(main())
