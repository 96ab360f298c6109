import os
from typing import List, Literal, Optional

import structlog
import tomlkit
from pydantic import BaseModel, Field

log = structlog.get_logger()

THREADS_ENV = "STAGEDCAUSAL_THREADS"
CONFIG_NAME = "stagedcausal.toml"


class FitSettings(BaseModel):
    alpha: float = Field(default=0.0, ge=0.0)


class LearningSettings(BaseModel):
    default_learner: Literal["bhc", "hclust"] = "hclust"
    prune_unobserved: bool = True


class EstimationSettings(BaseModel):
    """Defaults shared by the tree-based and the classical estimators."""

    positivity: Literal["exclude", "impute"] = "exclude"
    propensity_clip: float = Field(default=0.01, gt=0.0, lt=0.5)
    irls_max_iter: int = Field(default=50, ge=1)
    irls_tol: float = Field(default=1e-8, gt=0.0)
    irls_ridge: float = Field(default=1e-8, ge=0.0)


class BootstrapSettings(BaseModel):
    replicates: int = Field(default=200, ge=2)
    ci_level: float = Field(default=0.95, gt=0.0, lt=1.0)
    max_failure_rate: float = Field(default=0.2, ge=0.0, le=1.0)


class SimulationSettings(BaseModel):
    sample_sizes: List[int] = Field(default_factory=lambda: [100, 500, 1000, 10000])
    repetitions: int = Field(default=20, ge=1)
    dag_edge_prob: float = Field(default=0.3, ge=0.0, le=1.0)


class RuntimeSettings(BaseModel):
    threads: int = Field(default=1, ge=1)
    seed: int = 0


class Settings(BaseModel):
    fit: FitSettings = FitSettings()
    learning: LearningSettings = LearningSettings()
    estimation: EstimationSettings = EstimationSettings()
    bootstrap: BootstrapSettings = BootstrapSettings()
    simulation: SimulationSettings = SimulationSettings()
    runtime: RuntimeSettings = RuntimeSettings()


def default_paths() -> List[str]:
    paths: List[str] = []
    paths.append(os.path.join(os.getcwd(), CONFIG_NAME))
    xdg = os.environ.get("XDG_CONFIG_HOME") or os.path.expanduser("~/.config")
    paths.append(os.path.join(xdg, "stagedcausal", CONFIG_NAME))
    return paths


def locate_config(explicit: Optional[str] = None) -> Optional[str]:
    """Return the first existing config file, the explicit path taking precedence."""
    if explicit:
        return explicit if os.path.exists(explicit) else None
    for p in default_paths():
        if os.path.exists(p):
            return p
    return None


def load_settings(path: Optional[str] = None) -> Settings:
    """Load settings from TOML, falling back to defaults on any read error."""
    cfg_path = locate_config(path)
    if not cfg_path:
        return Settings()
    try:
        with open(cfg_path, "r") as f:
            data = tomlkit.parse(f.read()).unwrap()
        return Settings(
            fit=FitSettings(**data.get("fit", {})),
            learning=LearningSettings(**data.get("learning", {})),
            estimation=EstimationSettings(**data.get("estimation", {})),
            bootstrap=BootstrapSettings(**data.get("bootstrap", {})),
            simulation=SimulationSettings(**data.get("simulation", {})),
            runtime=RuntimeSettings(**data.get("runtime", {})),
        )
    except Exception as e:
        log.error("settings.load_error", path=cfg_path, error=str(e))
        return Settings()


def save_settings(path: Optional[str], s: Settings) -> str:
    cfg_path = path or default_paths()[0]
    parent = os.path.dirname(cfg_path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    doc = tomlkit.document()
    doc.add(tomlkit.comment("stagedcausal configuration"))
    for section, model in (
        ("fit", s.fit),
        ("learning", s.learning),
        ("estimation", s.estimation),
        ("bootstrap", s.bootstrap),
        ("simulation", s.simulation),
        ("runtime", s.runtime),
    ):
        table = tomlkit.table()
        for key, value in model.model_dump().items():
            table[key] = value
        doc.add(section, table)
    with open(cfg_path, "w") as f:
        f.write(tomlkit.dumps(doc))
    return cfg_path


def resolve_threads(configured: Optional[int] = None) -> int:
    """Worker cap: STAGEDCAUSAL_THREADS wins over the configured value."""
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("settings.bad_threads_env", value=raw)
    return max(1, configured or 1)
