"""Declarative experiment configs (YAML)."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from ..domain import ServiceClass
from ..engine import SimConfig
from ..policies import POLICIES
from ..workload import DistributionDescriptor, OnOffArrivals

BUNDLED = ("exp1", "exp2", "exp3")
_SIM_KEYS = {f.name for f in dataclasses.fields(SimConfig)} - {"classes", "N", "horizon", "bucket_width",
                                                                  "initial_allocation"}
_CLASS_FIELDS = {"charge", "penalty", "obligation", "jobs_per_session", "job_rate", "session_rate", "weight"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PolicySpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Sweep:
    var: str
    values: tuple

    def apply(self, cfg: "ExperimentConfig", value: float) -> tuple[list[ServiceClass], int, float]:
        classes, N, horizon = list(cfg.classes), cfg.N, cfg.horizon
        parts = self.var.split(".")
        if parts[0] == "classes" and len(parts) == 3:
            idx = _class_index(classes, parts[1])
            if parts[2] not in _CLASS_FIELDS:
                raise ConfigError(f"cannot sweep class field {parts[2]!r}")
            v = int(value) if parts[2] == "jobs_per_session" else float(value)
            classes[idx] = dataclasses.replace(classes[idx], **{parts[2]: v})
        elif self.var == "N":
            N = int(value)
        elif self.var == "horizon":
            horizon = float(value)
        else:
            raise ConfigError(f"unsupported sweep variable {self.var!r}")
        return classes, N, horizon


def _class_index(classes, label) -> int:
    for i, c in enumerate(classes):
        if str(c.id) == str(label):
            return i
    raise ConfigError(f"no class with id {label}")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    N: int
    classes: tuple
    policies: tuple
    sweep: Sweep
    horizon: float = 7200.0
    bucket_width: float = 600.0
    replications: int = 5
    base_seed: int = 2008
    ci_mode: str = "across"
    output_dir: str = "results"
    sim: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.classes)

    def cells(self):
        """(sweep index, sweep value) pairs."""
        return list(enumerate(self.sweep.values))

    def sim_config(self, value: float) -> SimConfig:
        classes, N, horizon = self.sweep.apply(self, value)
        return SimConfig(classes=classes, N=N, horizon=horizon, bucket_width=self.bucket_width, **self.sim)

    def offered_load(self, value: float) -> float:
        """Total offered job load as a fraction of cluster capacity."""
        classes, N, _ = self.sweep.apply(self, value)
        return sum(c.offered_job_rate * c.mean_service for c in classes) / N

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        out = dataclasses.replace(self, **kw)
        validate(out)
        return out


def _parse_class(block: dict, pos: int) -> ServiceClass:
    if not isinstance(block, dict):
        raise ConfigError(f"class block {pos} must be a mapping")
    b = dict(block)
    try:
        service = DistributionDescriptor.from_dict(b.pop("service", {"kind": "exponential", "mean": 1.0}))
        bursts = b.pop("bursts", None)
        if bursts is not None:
            bursts = OnOffArrivals(**bursts)
        return ServiceClass(id=b.pop("id", pos + 1), service=service, bursts=bursts, **b)
    except (TypeError, KeyError, ValueError) as e:
        raise ConfigError(f"class block {pos + 1}: {e}") from None


def _parse_values(spec) -> tuple:
    if isinstance(spec, dict):
        try:
            start, stop, num = float(spec["start"]), float(spec["stop"]), int(spec["num"])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"sweep values need start/stop/num: {e}") from None
        if num < 1:
            raise ConfigError("sweep num must be >= 1")
        step = (stop - start) / (num - 1) if num > 1 else 0.0
        return tuple(round(start + j * step, 12) for j in range(num))
    if isinstance(spec, (list, tuple)):
        return tuple(float(v) for v in spec)
    raise ConfigError("sweep values must be a list or a start/stop/num mapping")


def from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a mapping")
    d = dict(d)
    known = {"name", "N", "m", "classes", "policies", "policy", "sweep", "horizon", "bucket_width", "replications",
             "base_seed", "ci_mode", "output", "simulation"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    for key in ("N", "classes", "sweep"):
        if key not in d:
            raise ConfigError(f"missing required key {key!r}")
    raw_classes = d["classes"]
    if not isinstance(raw_classes, list) or not raw_classes:
        raise ConfigError("classes must be a nonempty list")
    classes = tuple(_parse_class(b, j) for j, b in enumerate(raw_classes))
    if "m" in d and int(d["m"]) != len(classes):
        raise ConfigError(f"m={d['m']} but {len(classes)} class blocks given")
    raw_pol = d.get("policies", [d["policy"]] if "policy" in d else None)
    if not raw_pol:
        raise ConfigError("at least one policy is required")
    policies = []
    for p in raw_pol:
        if isinstance(p, str):
            p = {"name": p}
        policies.append(PolicySpec(p["name"], dict(p.get("params") or {})))
    sw = d["sweep"]
    if not isinstance(sw, dict) or "var" not in sw or "values" not in sw:
        raise ConfigError("sweep needs 'var' and 'values'")
    sim = dict(d.get("simulation") or {})
    bad = set(sim) - _SIM_KEYS
    if bad:
        raise ConfigError(f"unknown simulation keys: {sorted(bad)}")
    cfg = ExperimentConfig(
        name=str(d.get("name", "experiment")),
        N=int(d["N"]),
        classes=classes,
        policies=tuple(policies),
        sweep=Sweep(str(sw["var"]), _parse_values(sw["values"])),
        horizon=float(d.get("horizon", 7200.0)),
        bucket_width=float(d.get("bucket_width", 600.0)),
        replications=int(d.get("replications", 5)),
        base_seed=int(d.get("base_seed", 2008)),
        ci_mode=str(d.get("ci_mode", "across")),
        output_dir=str((d.get("output") or {}).get("dir", "results")),
        sim=sim,
    )
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Raise ConfigError describing the first problem found."""
    if cfg.N < 1:
        raise ConfigError("N must be >= 1")
    if not cfg.horizon > cfg.bucket_width > 0:
        raise ConfigError("need horizon > bucket_width > 0")
    if cfg.replications < 1:
        raise ConfigError("replications must be >= 1")
    if cfg.ci_mode not in ("across", "within"):
        raise ConfigError("ci_mode must be 'across' or 'within'")
    ids = [c.id for c in cfg.classes]
    if len(set(ids)) != len(ids):
        raise ConfigError("class ids must be unique")
    for p in cfg.policies:
        if p.name not in POLICIES:
            raise ConfigError(f"unknown policy {p.name!r}; choose from {sorted(POLICIES)}")
        try:
            POLICIES[p.name](**p.params)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"policy {p.name}: {e}") from None
    if not cfg.sweep.values:
        raise ConfigError("sweep needs at least one value")
    if not all(math.isfinite(v) for v in cfg.sweep.values):
        raise ConfigError("sweep values must be finite")
    for v in cfg.sweep.values:
        try:
            cfg.sim_config(v).validate()
        except (TypeError, ValueError) as e:
            raise ConfigError(f"sweep value {v}: {e}") from None


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("slaprov.harness").joinpath("configs", f"{name}.yaml")))


def resolve(path_or_name: str) -> Path:
    p = Path(path_or_name)
    if p.exists():
        return p
    if path_or_name in BUNDLED:
        return bundled_path(path_or_name)
    raise ConfigError(f"no such config file: {path_or_name}")


def load(path_or_name: str) -> ExperimentConfig:
    path = resolve(path_or_name)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from None
    return from_dict(data)
