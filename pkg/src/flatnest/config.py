"""Study configuration files (TOML).

Schema::

    master_seed = 2018            # required
    repetitions = 6
    split_fraction = 0.5
    k_outer = 5
    k_inner = 5
    workers = 1
    analysis = "primary"          # primary | avg_first | per_repetition
    threshold = "nested-gap"      # nested-gap | stddev
    baseline = "rf"               # optional fixed learner for the baseline rows
    min_size = 2000               # optional filter for the report view
    output_dir = "results"        # relative to the config file

    [[datasets]]
    path = "data/pima.csv"        # relative to the config file
    label_column = "class"        # header name or zero-based index
    header = true
    subsample_cap = 5000          # 0 disables subsampling
    name = "pima"                 # optional, defaults to the file stem

    [scenarios]
    top3 = ["rf", "gbstump", "knn"]

    [learners.knn]                # optional grid override, one list per axis
    k = [1, 3, 5]

Learners named in scenarios use their built-in grid unless overridden.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli
import tomli_w

from .errors import ConfigError
from .learners import LEARNER_IDS, LearnerSpec, get_spec
from .protocol import ANALYSES, THRESHOLDS, Scenario

DEFAULT_CAP = 5000


@dataclass(frozen=True)
class DatasetEntry:
    path: str
    label_column: str | int = -1
    header: bool = True
    subsample_cap: int = DEFAULT_CAP
    name: str | None = None

    @property
    def dataset_name(self) -> str:
        return self.name or Path(self.path).stem


@dataclass(frozen=True)
class StudyConfig:
    master_seed: int
    datasets: tuple[DatasetEntry, ...]
    scenarios: tuple[Scenario, ...]
    repetitions: int = 6
    split_fraction: float = 0.5
    k_outer: int = 5
    k_inner: int = 5
    workers: int = 1
    analysis: str = "primary"
    threshold: str = "nested-gap"
    baseline: str | None = None
    min_size: int | None = None
    output_dir: str = "results"
    learners: tuple[LearnerSpec, ...] = field(default=())
    base_dir: Path = field(default=Path("."), compare=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.datasets:
            raise ConfigError("config lists no datasets")
        if not self.scenarios:
            raise ConfigError("config defines no scenarios")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError(f"split_fraction must be in (0, 1), got {self.split_fraction}")
        if self.k_outer < 2 or self.k_inner < 2:
            raise ConfigError("k_outer and k_inner must be >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.analysis not in ANALYSES:
            raise ConfigError(f"analysis must be one of {ANALYSES}, got {self.analysis!r}")
        if self.threshold not in THRESHOLDS:
            raise ConfigError(f"threshold must be one of {THRESHOLDS}, got {self.threshold!r}")
        names = [d.dataset_name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ConfigError(f"dataset names must be unique: {names}")
        for s in self.scenarios:
            for a in s.learners:
                get_spec(a)  # raises UnknownLearner
        if self.baseline is not None:
            get_spec(self.baseline)
        for d in self.datasets:
            if d.subsample_cap and d.subsample_cap < 4:
                raise ConfigError(f"{d.path}: subsample_cap must be 0 or >= 4")

    def learner_ids(self) -> list[str]:
        ids: list[str] = []
        for s in self.scenarios:
            ids.extend(a for a in s.learners if a not in ids)
        if self.baseline is not None and self.baseline not in ids:
            ids.append(self.baseline)
        return ids

    def specs(self) -> dict[str, LearnerSpec]:
        overrides = {s.id: s for s in self.learners}
        return {a: overrides.get(a) or get_spec(a) for a in self.learner_ids()}

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "master_seed": self.master_seed,
            "repetitions": self.repetitions,
            "split_fraction": self.split_fraction,
            "k_outer": self.k_outer,
            "k_inner": self.k_inner,
            "workers": self.workers,
            "analysis": self.analysis,
            "threshold": self.threshold,
            "output_dir": self.output_dir,
        }
        if self.baseline is not None:
            out["baseline"] = self.baseline
        if self.min_size is not None:
            out["min_size"] = self.min_size
        datasets = []
        for d in self.datasets:
            entry = {"path": d.path, "label_column": d.label_column, "header": d.header, "subsample_cap": d.subsample_cap}
            if d.name is not None:
                entry["name"] = d.name
            datasets.append(entry)
        out["datasets"] = datasets
        out["scenarios"] = {s.name: list(s.learners) for s in self.scenarios}
        if self.learners:
            out["learners"] = {s.id: {name: list(values) for name, values in s.axes} for s in self.learners}
        return out

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())


_TOP_KEYS = {
    "master_seed", "repetitions", "split_fraction", "k_outer", "k_inner", "workers", "analysis",
    "threshold", "baseline", "min_size", "output_dir", "datasets", "scenarios", "learners",
}


def _expect(value, types, what):
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ConfigError(f"{what} has the wrong type")
    if not isinstance(value, types):
        raise ConfigError(f"{what} has the wrong type: {value!r}")
    return value


def from_dict(raw: dict[str, Any], base_dir: Path = Path(".")) -> StudyConfig:
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if "master_seed" not in raw:
        raise ConfigError("master_seed is required")
    datasets = []
    for i, d in enumerate(raw.get("datasets", [])):
        if not isinstance(d, dict) or "path" not in d:
            raise ConfigError(f"datasets[{i}] needs a path")
        extra = set(d) - {"path", "label_column", "header", "subsample_cap", "name"}
        if extra:
            raise ConfigError(f"datasets[{i}]: unknown keys {sorted(extra)}")
        datasets.append(DatasetEntry(
            _expect(d["path"], str, f"datasets[{i}].path"),
            _expect(d.get("label_column", -1), (str, int), f"datasets[{i}].label_column"),
            _expect(d.get("header", True), bool, f"datasets[{i}].header"),
            _expect(d.get("subsample_cap", DEFAULT_CAP), int, f"datasets[{i}].subsample_cap"),
            d.get("name"),
        ))
    scenarios = []
    for name, learners in raw.get("scenarios", {}).items():
        if not isinstance(learners, list) or not all(isinstance(a, str) for a in learners):
            raise ConfigError(f"scenario {name!r} must be a list of learner ids")
        scenarios.append(Scenario(name, tuple(learners)))
    specs = []
    for learner_id, axes in raw.get("learners", {}).items():
        if learner_id not in LEARNER_IDS:
            get_spec(learner_id)
        if not isinstance(axes, dict) or not all(isinstance(v, list) for v in axes.values()):
            raise ConfigError(f"learners.{learner_id}: each axis must be a list")
        specs.append(get_spec(learner_id, axes))
    return StudyConfig(
        master_seed=_expect(raw["master_seed"], int, "master_seed"),
        datasets=tuple(datasets),
        scenarios=tuple(scenarios),
        repetitions=_expect(raw.get("repetitions", 6), int, "repetitions"),
        split_fraction=float(_expect(raw.get("split_fraction", 0.5), (int, float), "split_fraction")),
        k_outer=_expect(raw.get("k_outer", 5), int, "k_outer"),
        k_inner=_expect(raw.get("k_inner", 5), int, "k_inner"),
        workers=_expect(raw.get("workers", 1), int, "workers"),
        analysis=_expect(raw.get("analysis", "primary"), str, "analysis"),
        threshold=_expect(raw.get("threshold", "nested-gap"), str, "threshold"),
        baseline=raw.get("baseline"),
        min_size=raw.get("min_size"),
        output_dir=_expect(raw.get("output_dir", "results"), str, "output_dir"),
        learners=tuple(specs),
        base_dir=base_dir,
    )


def loads(text: str, base_dir: Path = Path(".")) -> StudyConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    return from_dict(raw, base_dir)


def load_config(path: str | Path) -> StudyConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text, path.parent)
