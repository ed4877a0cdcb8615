"""Run configuration: one TOML file, strict keys, module-domain checks."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .engine import CorpusSpec, ProcessParams
from .errors import ConfigError, DomainError
from .ingest import TIME_UNIT_SECONDS
from .mixture import MixtureSpec


@dataclass
class ProcessSection:
    drift_a: float = 0.02
    noise_var_s2: float = 0.005
    noise_autocorr_rho: float = 0.0
    step_dt: float = 1.0
    initial_edits_n0: int = 1


@dataclass
class CorpusSection:
    horizon: float = 100.0
    rate_r0: float = 50.0
    rate_growth: float = 0.0
    editor_pool: int = 500


@dataclass
class IngestSection:
    burst_k: int = 10
    burst_window_seconds: float = 5.0
    bot_list: str = ""  # path; empty = no known-bot list


@dataclass
class FitSection:
    min_slice_size: int = 400
    min_expected: float = 8.0
    outlier_z: float = 3.0
    rollup_period: float = 0.0  # >0 adds per-period counts to rollups
    autocorr_max_lag: int = 0  # >0 adds autocorrelation estimates to the report


@dataclass
class MixtureSection:
    horizon: float = 500.0
    growth: float = 0.0
    age_floor: float = 1.0
    grid_lo: float = 1.0
    grid_hi: float = 1e6
    grid_points: int = 200
    tail_lo: float = 1e3
    tail_decades: int = 2


@dataclass
class CompareSection:
    exclude_bucket_zero: bool = True


@dataclass
class RunConfig:
    seed: int = 0
    process: ProcessSection = field(default_factory=ProcessSection)
    corpus: CorpusSection = field(default_factory=CorpusSection)
    ingest: IngestSection = field(default_factory=IngestSection)
    fit: FitSection = field(default_factory=FitSection)
    mixture: MixtureSection = field(default_factory=MixtureSection)
    compare: CompareSection = field(default_factory=CompareSection)

    def process_params(self) -> ProcessParams:
        try:
            return ProcessParams(**dataclasses.asdict(self.process))
        except DomainError as err:
            raise ConfigError(f"[process] {err}") from err

    def corpus_spec(self) -> CorpusSpec:
        try:
            return CorpusSpec(
                horizon=self.corpus.horizon,
                rate_r0=self.corpus.rate_r0,
                rate_growth=self.corpus.rate_growth,
                seed=self.seed,
            )
        except DomainError as err:
            raise ConfigError(f"[corpus] {err}") from err

    def mixture_spec(self) -> MixtureSpec:
        try:
            return MixtureSpec(
                drift_a=self.process.drift_a,
                noise_var_s2=self.process.noise_var_s2,
                horizon_T=self.mixture.horizon,
                growth_g=self.mixture.growth,
                initial_edits_n0=self.process.initial_edits_n0,
                age_floor=self.mixture.age_floor,
            )
        except DomainError as err:
            raise ConfigError(f"[mixture] {err}") from err

    @property
    def burst_window_units(self) -> float:
        return self.ingest.burst_window_seconds / TIME_UNIT_SECONDS


_SECTIONS = {
    "process": ProcessSection,
    "corpus": CorpusSection,
    "ingest": IngestSection,
    "fit": FitSection,
    "mixture": MixtureSection,
    "compare": CompareSection,
}


def _coerce(name: str, value, target_type):
    if target_type is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number, got {value!r}")
        return float(value)
    if target_type is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return value
    if target_type is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be a boolean, got {value!r}")
        return value
    if target_type is str:
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string, got {value!r}")
        return value
    raise ConfigError(f"{name}: unsupported config type")  # pragma: no cover


def _build_section(cls, mapping, where: str):
    fields = {f.name: f.type for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in mapping.items():
        if key not in fields:
            raise ConfigError(f"unknown key [{where}] {key}")
        target = {"float": float, "int": int, "bool": bool, "str": str}[fields[key]]
        kwargs[key] = _coerce(f"[{where}] {key}", value, target)
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    cfg = RunConfig()
    for key, value in data.items():
        if key == "seed":
            cfg.seed = _coerce("seed", value, int)
        elif key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"[{key}] must be a table")
            setattr(cfg, key, _build_section(_SECTIONS[key], value, key))
        else:
            raise ConfigError(f"unknown key {key}")
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as handle:
            data = tomllib.load(handle)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from err
    return config_from_dict(data)
