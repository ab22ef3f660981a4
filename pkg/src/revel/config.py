"""Run configuration: dataclasses mirroring the YAML config schema.

Top-level keys: seed, norm, alpha, explanations_per_instance, fidelity,
workers, blackbox, featurizer, methods, budgets, instances. See the README for
the documented schema; unknown keys are rejected rather than ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import yaml

from .core import NORM_ORDS
from .errors import ConfigError
from .sampling import MAX_ENUMERATION_FEATURES, MethodSpec

FIDELITY_MODES = ("held-out", "reuse")
BLACKBOX_KINDS = ("synthetic-linear", "synthetic-nonlinear", "external")
FEATURIZER_KINDS = ("vector", "grid")
INSTANCE_KINDS = ("synthetic", "files")


@dataclass
class BlackBoxConfig:
    kind: str
    seed: int = 0
    features: int | None = None
    classes: int | None = None
    interaction_strength: float = 1.0
    command: list[str] | None = None
    timeout: float = 60.0


@dataclass
class FeaturizerConfig:
    kind: str
    features: int | None = None        # vector featurizer
    baseline: object = None            # scalar or per-feature/per-channel list
    side: int | None = None            # grid featurizer
    height: int | None = None
    width: int | None = None
    channels: int = 3

    @property
    def feature_count(self) -> int:
        if self.kind == "vector":
            return int(self.features)
        return int(self.side) ** 2


@dataclass
class InstanceConfig:
    kind: str = "synthetic"
    count: int = 50
    paths: list[str] = field(default_factory=list)


@dataclass
class RunConfig:
    blackbox: BlackBoxConfig
    featurizer: FeaturizerConfig
    methods: list[MethodSpec]
    budgets: list[int]
    instances: InstanceConfig = field(default_factory=InstanceConfig)
    explanations_per_instance: int = 5
    norm: str = "two"
    alpha: float | None = None
    seed: int = 0
    fidelity_mode: str = "held-out"
    workers: int = 1

    def validate(self) -> "RunConfig":
        bb, fz = self.blackbox, self.featurizer
        if bb.kind not in BLACKBOX_KINDS:
            raise ConfigError(f"unknown blackbox kind {bb.kind!r}")
        if fz.kind not in FEATURIZER_KINDS:
            raise ConfigError(f"unknown featurizer kind {fz.kind!r}")
        if self.instances.kind not in INSTANCE_KINDS:
            raise ConfigError(f"unknown instance source {self.instances.kind!r}")
        if self.norm not in NORM_ORDS:
            raise ConfigError(f"unknown norm {self.norm!r}")
        if self.fidelity_mode not in FIDELITY_MODES:
            raise ConfigError(f"fidelity mode must be one of {FIDELITY_MODES}")
        if not self.methods:
            raise ConfigError("at least one method required")
        if not self.budgets:
            raise ConfigError("at least one evaluation budget required")
        if self.explanations_per_instance < 1:
            raise ConfigError("explanations_per_instance must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

        if fz.kind == "vector":
            if not fz.features or fz.features < 2:
                raise ConfigError("vector featurizer needs features >= 2")
        else:
            for name in ("side", "height", "width"):
                if getattr(fz, name) is None:
                    raise ConfigError(f"grid featurizer needs {name}")
            if fz.side < 2:
                raise ConfigError("grid featurizer needs side >= 2")
            if fz.height % fz.side or fz.width % fz.side:
                raise ConfigError(f"grid side {fz.side} does not divide {fz.height}x{fz.width}")

        feature_count = fz.feature_count
        if bb.kind.startswith("synthetic"):
            if bb.features is None:
                bb.features = feature_count
            if bb.features != feature_count:
                raise ConfigError(
                    f"synthetic blackbox features {bb.features} != featurizer features {feature_count}"
                )
            if bb.classes is None or bb.classes < 2:
                raise ConfigError("synthetic blackbox needs classes >= 2")
        else:
            if not bb.command:
                raise ConfigError("external blackbox needs a command")

        for budget in self.budgets:
            if budget < feature_count + 1:
                raise ConfigError(f"budget {budget} < features + 1 = {feature_count + 1}")
        if any(m.kind == "shap-exact" for m in self.methods) and feature_count > MAX_ENUMERATION_FEATURES:
            raise ConfigError(f"shap-exact cannot enumerate {feature_count} features")

        if self.instances.kind == "synthetic" and self.instances.count < 1:
            raise ConfigError("need at least one synthetic instance")
        if self.instances.kind == "files" and not self.instances.paths:
            raise ConfigError("instance source 'files' needs paths")
        return self

    def to_dict(self) -> dict:
        data = asdict(self)
        data["methods"] = [
            {"name": m.kind, "sigma": m.sigma, "alpha": m.alpha} for m in self.methods
        ]
        data["fidelity"] = data.pop("fidelity_mode")
        return data


def _take(section: dict, context: str, cls, **renames):
    allowed = {f for f in cls.__dataclass_fields__}
    kwargs = {}
    for key, value in section.items():
        key = renames.get(key, key)
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {context}")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad {context} section: {exc}") from exc


def _parse_method(entry, default_alpha) -> MethodSpec:
    if isinstance(entry, str):
        entry = {"name": entry}
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"method entries need a name, got {entry!r}")
    unknown = set(entry) - {"name", "sigma", "alpha"}
    if unknown:
        raise ConfigError(f"unknown method keys {sorted(unknown)}")
    name = entry["name"]
    alpha = entry.get("alpha")
    if alpha is None and name not in ("shap-exact", "exact"):
        alpha = default_alpha  # global alpha never silently shrinks the exact path
    try:
        return MethodSpec(kind=name, sigma=entry.get("sigma"), alpha=alpha)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    known = {
        "blackbox", "featurizer", "methods", "budgets", "instances", "seed",
        "norm", "alpha", "explanations_per_instance", "fidelity", "workers",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    for required in ("blackbox", "featurizer", "methods", "budgets"):
        if required not in data:
            raise ConfigError(f"config is missing the {required!r} section")

    default_alpha = data.get("alpha")
    methods = [_parse_method(m, default_alpha) for m in data["methods"]]
    instances = _take(data.get("instances", {}), "instances", InstanceConfig)
    cfg = RunConfig(
        blackbox=_take(data["blackbox"], "blackbox", BlackBoxConfig),
        featurizer=_take(data["featurizer"], "featurizer", FeaturizerConfig),
        methods=methods,
        budgets=[int(n) for n in data["budgets"]],
        instances=instances,
        explanations_per_instance=int(data.get("explanations_per_instance", 5)),
        norm=data.get("norm", "two"),
        alpha=default_alpha,
        seed=int(data.get("seed", 0)),
        fidelity_mode=data.get("fidelity", "held-out"),
        workers=int(data.get("workers", 1)),
    )
    return cfg.validate()


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return config_from_dict(data)
