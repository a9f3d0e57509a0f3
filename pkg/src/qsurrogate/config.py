"""Run configuration for the command-line pipeline (JSON on disk)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .aqce import AqceConfig, AqceError


class ConfigError(ValueError):
    pass


@dataclass
class DatasetSpec:
    path: str | None = None  # load a dataset directory instead of generating
    n_qubits: int = 6
    labels: int = 4
    per_label: int = 50
    anchor_depth: int = 20
    noise_depth: int = 4
    noise_scale: float = 0.1
    seed: int = 0


@dataclass
class SplitSpec:
    train_fraction: float = 0.5
    seed: int = 0


@dataclass
class SvmSpec:
    C: float = 1.0
    tol: float = 1e-3


@dataclass
class SpectralSpec:
    gs_tol: float = 1e-8
    K: int = 4
    K_sweep: list[int] = field(default_factory=lambda: [1, 2, 4, 8, 16])


@dataclass
class GradientSpec:
    seed: int = 0
    n_random: int = 10
    adam_steps: int = 0
    adam_lr: float = 0.009
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 1000


@dataclass
class RunConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    split: SplitSpec = field(default_factory=SplitSpec)
    svm: SvmSpec = field(default_factory=SvmSpec)
    spectral: SpectralSpec = field(default_factory=SpectralSpec)
    aqce: AqceConfig = field(default_factory=AqceConfig)
    gradients: GradientSpec = field(default_factory=GradientSpec)
    threads: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.split.train_fraction < 1:
            raise ConfigError("split.train_fraction must lie in (0, 1)")
        if self.svm.C <= 0 or self.svm.tol <= 0:
            raise ConfigError("svm.C and svm.tol must be positive")
        if self.spectral.gs_tol <= 0:
            raise ConfigError("spectral.gs_tol must be positive")
        if self.spectral.K < 1 or any(k < 1 for k in self.spectral.K_sweep):
            raise ConfigError("spectral ranks must be >= 1")
        if self.gradients.n_random < 1 or self.gradients.adam_steps < 0:
            raise ConfigError("gradients.n_random must be >= 1 and adam_steps >= 0")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        d = self.dataset
        if d.path is None and (d.n_qubits < 2 or d.labels < 1 or d.per_label < 1 or d.noise_scale < 0):
            raise ConfigError("invalid dataset generator settings")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["aqce"] = self.aqce.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        sections = {
            "dataset": DatasetSpec,
            "split": SplitSpec,
            "svm": SvmSpec,
            "spectral": SpectralSpec,
            "gradients": GradientSpec,
        }
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        try:
            for name, typ in sections.items():
                if name in data:
                    kwargs[name] = typ(**data[name])
            if "aqce" in data:
                kwargs["aqce"] = AqceConfig.from_dict(data["aqce"])
        except (TypeError, AqceError) as exc:
            raise ConfigError(str(exc)) from exc
        if "threads" in data:
            kwargs["threads"] = int(data["threads"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"{p}: config file not found")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        return cls.from_dict(data)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def seeds(self) -> dict:
        return {
            "dataset": self.dataset.seed,
            "split": self.split.seed,
            "aqce": self.aqce.seed,
            "gradients": self.gradients.seed,
        }
