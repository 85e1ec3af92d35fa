from pathlib import Path
from typing import Any, Dict, List, Literal

import pandas as pd
import pydantic
from pydantic import BaseModel, ConfigDict, Field

from aggregation.utils import default_sweep_rules
from core.settings import DEFAULT_SEED, N_JOBS
from core.utils.error_handling_standerizer import ConfigError
from core.utils.utility_files import content_hash, read_json
from scores.models import ProtocolConfig

STAGE_ORDER = (
    "select", "aggregate", "calibrate", "metrics", "sweep", "ablation",
    "fragility", "selective", "bootstrap", "prevalence",
)


class StageFlags(BaseModel):
    """Which pipeline stages run; every stage is on by default."""
    model_config = ConfigDict(extra='forbid', frozen=True)

    select: bool = True
    aggregate: bool = True
    calibrate: bool = True
    metrics: bool = True
    sweep: bool = True
    ablation: bool = True
    fragility: bool = True
    selective: bool = True
    bootstrap: bool = True
    prevalence: bool = True

    def enabled(self) -> List[str]:
        return [name for name in STAGE_ORDER if getattr(self, name)]

    @classmethod
    def only(cls, *names: str) -> "StageFlags":
        return cls(**{name: name in names for name in STAGE_ORDER})


class RunConfig(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    protocol: ProtocolConfig = ProtocolConfig()
    stages: StageFlags = StageFlags()
    rules: List[str] = Field(default_factory=lambda: [r.rule_id for r in default_sweep_rules()])
    calibrators: List[Literal["temperature", "platt", "isotonic"]] = ["temperature", "platt", "isotonic"]
    signals: List[Literal["std_pu", "entropy_mean", "margin_single"]] = ["std_pu", "entropy_mean", "margin_single"]
    correction_stats: Literal["transductive", "train"] = "transductive"
    refit_prevalence_weights: bool = False
    n_jobs: int = Field(default=N_JOBS, ge=1)
    svg: bool = True
    formats: List[Literal["csv", "json", "md"]] = ["csv", "json"]
    random_seed: int = DEFAULT_SEED

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form"""
        return content_hash(self.model_dump(mode="json"))

    def with_seed(self, seed: int) -> "RunConfig":
        """Override both the bootstrap seed and the locked random prompt seed"""
        protocol = self.protocol.model_copy(update={"bootstrap_seed": seed})
        return self.model_copy(update={"protocol": protocol, "random_seed": seed})


def load_run_config(path) -> RunConfig:
    try:
        raw = read_json(Path(path))
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read config '{path}': {e}", path=str(path))
    try:
        return RunConfig.model_validate(raw)
    except pydantic.ValidationError as e:
        err = e.errors()[0]
        location = ".".join(str(part) for part in err.get("loc", ()))
        raise ConfigError(f"invalid config '{path}': {location}: {err.get('msg')}", path=str(path))


class ReportBundle(BaseModel):
    """
    Everything a run produced: reproducibility metadata, tables as row records,
    and gap markers for stages that could not be computed.
    """
    model_config = ConfigDict(frozen=True)

    metadata: Dict[str, Any]
    tables: Dict[str, List[Dict[str, Any]]]
    gaps: Dict[str, Dict[str, Any]] = {}

    def table(self, name: str) -> pd.DataFrame:
        return pd.DataFrame.from_records(self.tables[name])

    @property
    def table_names(self) -> List[str]:
        return sorted(self.tables)
