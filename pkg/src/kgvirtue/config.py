"""Pipeline configuration: one YAML file, defaults baked in."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ._io import atomic_write_text
from .cluster import KMeansConfig
from .evolve import GaConfig

CLUSTER_MODES = ("kmeans", "threshold_clique")
NPMI_MODES = ("above_average_positive", "absolute_threshold")


class ConfigError(ValueError):
    pass


@dataclass
class Paths:
    statements: str | None = None
    task: str | None = None
    oracle: str | None = None
    pruning: str | None = None
    topics: str | None = None
    # upstream artifacts; default to the stage directories under ``out``
    universe: str | None = None
    lexicon: str | None = None
    labeling: str | None = None
    snapshots: str | None = None
    out: str = "run"


@dataclass
class IngestSettings:
    npmi_mode: str = "above_average_positive"
    threshold: float = 0.0
    weighted: bool = True


@dataclass
class ClusterSettings:
    mode: str = "kmeans"
    tau: float = 1.5
    kmeans: dict = field(default_factory=dict)


@dataclass
class PipelineConfig:
    seed: int | None = None
    workers: int = 1
    paths: Paths = field(default_factory=Paths)
    ingest: IngestSettings = field(default_factory=IngestSettings)
    cluster: ClusterSettings = field(default_factory=ClusterSettings)
    ga: dict = field(default_factory=dict)
    base_dir: Path = field(default=Path("."), repr=False)

    def validate(self) -> None:
        if self.seed is None:
            raise ConfigError("a seed is required (config 'seed' or --seed)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.ingest.npmi_mode not in NPMI_MODES:
            raise ConfigError(f"ingest.npmi_mode must be one of {NPMI_MODES}")
        if self.cluster.mode not in CLUSTER_MODES:
            raise ConfigError(f"cluster.mode must be one of {CLUSTER_MODES}")
        try:
            self.ga_config()
            self.kmeans_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def ga_config(self) -> GaConfig:
        return GaConfig(**{**self.ga, "rng_seed": int(self.seed)})

    def kmeans_config(self) -> KMeansConfig:
        return KMeansConfig(**{**self.cluster.kmeans, "rng_seed": int(self.seed)})

    def path(self, name: str) -> Path | None:
        value = getattr(self.paths, name)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def out(self) -> Path:
        return self.path("out")

    def resolved(self) -> dict:
        """Every setting with defaults filled in, as written next to outputs."""
        d = {
            "seed": self.seed,
            "workers": self.workers,
            "paths": asdict(self.paths),
            "ingest": asdict(self.ingest),
            "cluster": {"mode": self.cluster.mode, "tau": self.cluster.tau, "kmeans": asdict(self.kmeans_config())},
            "ga": asdict(self.ga_config()),
        }
        return d

    def write_resolved(self, directory: Path) -> Path:
        path = Path(directory) / "config.resolved.yaml"
        atomic_write_text(path, yaml.safe_dump(self.resolved(), sort_keys=True, default_flow_style=False))
        return path


def _section(cls, raw, name):
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return cls(**raw)


def config_from_dict(raw: dict, base_dir: Path = Path(".")) -> PipelineConfig:
    raw = copy.deepcopy(raw or {})
    allowed = {"seed", "workers", "paths", "ingest", "cluster", "ga"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    cfg = PipelineConfig(
        seed=raw.get("seed"),
        workers=int(raw.get("workers", 1)),
        paths=_section(Paths, raw.get("paths"), "paths"),
        ingest=_section(IngestSettings, raw.get("ingest"), "ingest"),
        cluster=_section(ClusterSettings, raw.get("cluster"), "cluster"),
        ga=dict(raw.get("ga") or {}),
        base_dir=base_dir,
    )
    ga_known = {f.name for f in fields(GaConfig)}
    if set(cfg.ga) - ga_known:
        raise ConfigError(f"unknown keys in 'ga': {sorted(set(cfg.ga) - ga_known)}")
    km_known = {f.name for f in fields(KMeansConfig)}
    if set(cfg.cluster.kmeans) - km_known:
        raise ConfigError(f"unknown keys in 'cluster.kmeans': {sorted(set(cfg.cluster.kmeans) - km_known)}")
    return cfg


def load_config(path: str | Path | None) -> PipelineConfig:
    """Read a YAML config; relative paths resolve against its directory."""
    if path is None:
        return config_from_dict({})
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(raw or {}, base_dir=path.parent)
