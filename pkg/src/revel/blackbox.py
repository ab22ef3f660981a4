"""Black-box classifier access: synthetic in-process models, an external-process
protocol client, mask-keyed result caching, and evaluation-budget accounting.

The engine only ever consumes probability vectors from a model. Regression
targets in logit space are reconstructed downstream from pseudo-logits, so
arbitrary external classifiers can attach without exposing internals.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass

import numpy as np

from .core import softmax
from .errors import BudgetExhaustedError, ProtocolError

PROB_SUM_TOL = 1e-6
PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 60.0


@dataclass
class EvalBudget:
    """Counts individual black-box input evaluations against a hard cap."""

    max_evaluations: int
    consumed: int = 0

    def charge(self, count: int) -> None:
        if self.consumed + count > self.max_evaluations:
            raise BudgetExhaustedError(
                f"budget exhausted: {self.consumed} consumed + {count} requested "
                f"> {self.max_evaluations} allowed"
            )
        self.consumed += count


class SyntheticLinearModel:
    """softmax(x @ weights + bias): exactly representable by a local linear explanation."""

    kind = "synthetic-linear"

    def __init__(self, weights, bias):
        self.weights = np.asarray(weights, dtype=float)
        self.bias = np.asarray(bias, dtype=float)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[1],):
            raise ValueError("weights must be (features, classes) and bias (classes,)")

    @property
    def class_count(self) -> int:
        return self.weights.shape[1]

    @property
    def input_shape(self) -> tuple[int, ...]:
        return (self.weights.shape[0],)

    def logits(self, inputs) -> np.ndarray:
        return np.asarray(inputs, dtype=float) @ self.weights + self.bias

    def predict_batch(self, inputs) -> np.ndarray:
        return softmax(self.logits(inputs))


class SyntheticInteractionModel(SyntheticLinearModel):
    """Linear model plus pairwise interaction terms on a fixed sparse set of pairs.

    With interaction strength 0 the outputs coincide with the plain linear model.
    """

    kind = "synthetic-patch-nonlinear"

    def __init__(self, weights, bias, pairs, pair_weights, strength=1.0):
        super().__init__(weights, bias)
        self.pairs = tuple((int(i), int(j)) for i, j in pairs)
        self.pair_weights = np.asarray(pair_weights, dtype=float)
        self.strength = float(strength)
        if self.pair_weights.shape != (len(self.pairs), self.class_count):
            raise ValueError("pair_weights must be (pairs, classes)")

    def logits(self, inputs) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=float)
        out = super().logits(inputs)
        for (i, j), w in zip(self.pairs, self.pair_weights):
            out = out + self.strength * np.outer(inputs[..., i] * inputs[..., j], w)
        return out


class CallableModel:
    """Wraps any batch predictor fn(inputs) -> probabilities as a black box."""

    kind = "callable"

    def __init__(self, fn, class_count: int, input_shape=None):
        self._fn = fn
        self.class_count = class_count
        self.input_shape = tuple(input_shape) if input_shape is not None else None

    def predict_batch(self, inputs) -> np.ndarray:
        return np.asarray(self._fn(inputs), dtype=float)


class BlackBoxHandle:
    """Shared entry point to a model: atomic eval counting, caching, budget checks.

    The cache is keyed by caller-provided keys (feature-mask bytes in practice);
    enabling it changes the evaluation count but never a returned probability.
    """

    def __init__(self, model, budget: EvalBudget | None = None, use_cache: bool = True):
        self.model = model
        self.budget = budget
        self._cache: dict[bytes, np.ndarray] | None = {} if use_cache else None
        self._lock = threading.Lock()
        self.eval_counter = 0

    @property
    def class_count(self) -> int:
        return self.model.class_count

    @property
    def kind(self) -> str:
        return getattr(self.model, "kind", "unknown")

    def scoped(self, budget: EvalBudget | None = None, use_cache: bool = True) -> "BlackBoxHandle":
        """Fresh counter/cache/budget over the same underlying model."""
        return BlackBoxHandle(self.model, budget=budget, use_cache=use_cache)

    def evaluate_batch(self, inputs, keys=None) -> np.ndarray:
        """Evaluate a batch of model inputs, order-preserving.

        `keys` enables caching: duplicate keys inside one batch are evaluated once,
        and keys seen in earlier batches are free. The budget is checked against the
        number of fresh evaluations before the model runs.
        """
        inputs = np.asarray(inputs, dtype=float)
        if inputs.ndim < 2:
            raise ValueError("evaluate_batch expects a batch: shape (n, ...)")
        n = inputs.shape[0]
        if keys is not None and len(keys) != n:
            raise ValueError("one cache key per input required")

        with self._lock:
            if self._cache is None or keys is None:
                fresh_idx = list(range(n))
            else:
                fresh_idx = []
                seen: set = set()
                for i, key in enumerate(keys):
                    if key in self._cache or key in seen:
                        continue
                    seen.add(key)
                    fresh_idx.append(i)

            if self.budget is not None:
                self.budget.charge(len(fresh_idx))

            if fresh_idx:
                fresh = self._validated(self.model.predict_batch(inputs[fresh_idx]), len(fresh_idx))
                self.eval_counter += len(fresh_idx)
            else:
                fresh = np.empty((0, self.class_count))

            if self._cache is None or keys is None:
                return fresh

            for pos, i in enumerate(fresh_idx):
                self._cache[keys[i]] = fresh[pos]
            return np.stack([self._cache[key] for key in keys])

    def _validated(self, probs, expected_rows: int) -> np.ndarray:
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (expected_rows, self.class_count):
            raise ProtocolError(f"model returned shape {probs.shape}, expected ({expected_rows}, {self.class_count})")
        if not np.all(np.isfinite(probs)):
            raise ProtocolError("model returned non-finite probabilities")
        if probs.min() < -PROB_SUM_TOL or probs.max() > 1.0 + PROB_SUM_TOL:
            raise ProtocolError("model returned probabilities outside [0, 1]")
        sums = probs.sum(axis=1)
        if np.abs(sums - 1.0).max() > PROB_SUM_TOL:
            raise ProtocolError(f"model probabilities sum to {sums[np.abs(sums - 1.0).argmax()]}, not 1")
        return probs


class ExternalProcessModel:
    """Client for the line-delimited JSON protocol over a child process's stdio.

    Handshake (first line from the server):
        {"protocol": 1, "classes": C, "input_shape": [dims]}
    Request / response (ids must echo, answered in order):
        {"id": n, "inputs": [[flat floats], ...], "shape": [dims]}
        {"id": n, "probs": [[p1..pC], ...]}  or  {"id": n, "error": "message"}

    One request batch in flight at a time; responses that are late, mismatched,
    or malformed raise ProtocolError.
    """

    kind = "external"

    def __init__(self, command, timeout: float = DEFAULT_TIMEOUT):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        self.timeout = float(timeout)
        self._lock = threading.Lock()
        self._next_id = 0
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ProtocolError(f"could not start model server {self.command!r}: {exc}") from exc
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

        handshake = self._read_json()
        if handshake.get("protocol") != PROTOCOL_VERSION:
            self.close()
            raise ProtocolError(f"unsupported protocol handshake: {handshake!r}")
        self.class_count = int(handshake["classes"])
        self.input_shape = tuple(int(d) for d in handshake["input_shape"])

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF sentinel

    def _read_json(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ProtocolError(f"model server timed out after {self.timeout}s") from None
        if line is None:
            code = self._proc.poll()
            raise ProtocolError(f"model server closed its output (exit code {code})")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"model server sent invalid JSON: {line!r}") from exc

    def predict_batch(self, inputs) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=float)
        with self._lock:
            if self._proc.poll() is not None:
                raise ProtocolError(f"model server exited with code {self._proc.returncode}")
            request_id = self._next_id
            self._next_id += 1
            request = {
                "id": request_id,
                "inputs": [row.ravel().tolist() for row in inputs],
                "shape": list(inputs.shape[1:]),
            }
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.write(json.dumps(request) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise ProtocolError(f"model server pipe broke: {exc}") from exc

            response = self._read_json()
        if response.get("id") != request_id:
            raise ProtocolError(f"response id {response.get('id')!r} does not echo request id {request_id}")
        if "error" in response:
            raise ProtocolError(f"model server error: {response['error']}")
        probs = np.asarray(response.get("probs"), dtype=float)
        if probs.shape != (inputs.shape[0], self.class_count):
            raise ProtocolError(f"response probs shape {probs.shape} != ({inputs.shape[0]}, {self.class_count})")
        return probs

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "ExternalProcessModel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def make_synthetic_suite(seed: int, feature_count: int, class_count: int,
                         interaction_strength: float = 1.0) -> list[BlackBoxHandle]:
    """Deterministic desk-scale model family: one softmax-linear member and one
    member with sparse pairwise patch interactions, sharing weights and bias.

    Weights and bias are class-centered (rows sum to zero across classes), the
    representative that a logit-space regression can identify under the softmax
    shift invariance.
    """
    if feature_count < 2 or class_count < 2:
        raise ValueError("need feature_count >= 2 and class_count >= 2")
    rng = np.random.default_rng(seed)
    weights = rng.normal(0.0, 1.5 / np.sqrt(feature_count), (feature_count, class_count))
    weights -= weights.mean(axis=1, keepdims=True)
    bias = rng.normal(0.0, 0.5, class_count)
    bias -= bias.mean()

    pair_count = max(1, feature_count // 8)
    flat = rng.choice(feature_count * (feature_count - 1) // 2, size=pair_count, replace=False)
    pairs = [_pair_from_index(int(k), feature_count) for k in flat]
    # same per-feature effect scale as the linear part, so the relative weight of
    # the nonlinearity in a typical neighborhood shrinks as features multiply
    pair_weights = rng.normal(0.0, 1.2 / np.sqrt(feature_count), (pair_count, class_count))
    pair_weights -= pair_weights.mean(axis=1, keepdims=True)

    linear = SyntheticLinearModel(weights, bias)
    nonlinear = SyntheticInteractionModel(weights, bias, pairs, pair_weights, interaction_strength)
    return [BlackBoxHandle(linear), BlackBoxHandle(nonlinear)]


def _pair_from_index(k: int, n: int) -> tuple[int, int]:
    # k-th pair (i < j) in lexicographic order over the n*(n-1)/2 pairs
    i = 0
    remaining = k
    row = n - 1
    while remaining >= row:
        remaining -= row
        i += 1
        row -= 1
    return i, i + 1 + remaining
