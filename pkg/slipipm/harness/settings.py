"""Archivos de configuración de experimentos (`bench`).

Acepta JSON o líneas `clave = valor` con claves con puntos para anidar:

    problem = socp:50,10,7
    mode = stochastic
    seeds = [1, 2, 3]
    noise.kind = gaussian
    noise.sigma = 1.0
    schedule.t_alpha = -0.151
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from slipipm import config
from slipipm.core.model import NoiseModel

logger = logging.getLogger(__name__)


class ScheduleOverrides(BaseModel):
    model_config = ConfigDict(extra="forbid")

    theta0: Optional[float] = Field(default=None, gt=0)
    mu1: Optional[float] = Field(default=None, gt=0)
    t: Optional[float] = Field(default=None, lt=0)
    t_alpha: Optional[float] = Field(default=None, le=0)
    eta: Optional[float] = None
    eta_low: Optional[float] = None
    gamma_buff: Optional[float] = Field(default=None, ge=0)
    gamma_explore_cap: Optional[float] = Field(default=None, ge=1)
    explore: Optional[Literal["barrier", "constraints", "off"]] = None
    mu1_reset_cap: Optional[float] = Field(default=None, gt=0)
    resets_per_iteration: Optional[int] = Field(default=None, ge=0)
    lam_low: Optional[float] = Field(default=None, gt=0, le=1)
    lam_high: Optional[float] = Field(default=None, gt=0)

    def to_kwargs(self) -> dict[str, Any]:
        return self.model_dump(exclude_none=True)


class NoiseSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["none", "gaussian", "projected_bounded", "minibatch_like"] = "none"
    sigma: float = Field(default=0.0, ge=0)
    batch_frac: float = Field(default=1.0, gt=0, le=1)

    def to_model(self) -> NoiseModel:
        return NoiseModel(kind=self.kind, sigma=self.sigma, batch_frac=self.batch_frac)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # nombre de fixture, `socp:n,l,seed`, ruta a JSON o `batch` (lote del histograma)
    problem: str
    mode: Literal["deterministic", "stochastic"] = "deterministic"
    h_policy: Literal["identity", "barrier_hessian"] = "identity"
    schedule: ScheduleOverrides = Field(default_factory=ScheduleOverrides)
    noise: NoiseSpec = Field(default_factory=NoiseSpec)
    seeds: list[int] = Field(default_factory=lambda: [0])
    output_dir: str = Field(default_factory=lambda: config.OUTPUT_DIR)
    budget: int = Field(default_factory=lambda: config.DEFAULT_BUDGET, ge=1)
    estimate_samples: Optional[int] = Field(default=None, ge=0)
    estimate_seed: int = 0
    decrease_check: Optional[Literal["off", "soft", "strict"]] = None
    trace_every: int = Field(default=1, ge=0)
    workers: int = Field(default=1, ge=1)
    # en modo estocástico, añade la ejecución determinista de referencia a la tabla
    include_deterministic: bool = False
    start: Optional[list[float]] = None
    label: Optional[str] = None

    @model_validator(mode="after")
    def _check_seeds(self) -> "ExperimentConfig":
        if not self.seeds:
            raise ValueError("seeds no puede estar vacío")
        return self

    def config_hash(self) -> str:
        payload = json.dumps(self.model_dump(mode="json", exclude={"workers", "output_dir"}), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    @property
    def run_label(self) -> str:
        if self.label:
            return self.label
        safe = self.problem.replace(":", "_").replace(",", "_").replace("/", "_")
        return f"{Path(safe).stem}_{self.mode}"


def _parse_value(raw: str) -> Any:
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw.strip("\"'")


def parse_key_values(text: str) -> dict[str, Any]:
    data: dict[str, Any] = {}
    for num, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"Línea {num} sin '=': {line}")
        key, raw = (part.strip() for part in line.split("=", 1))
        node = data
        *parents, leaf = key.split(".")
        for part in parents:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValueError(f"Línea {num}: '{part}' ya tiene un valor escalar")
        node[leaf] = _parse_value(raw)
    return data


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    data = json.loads(text) if path.suffix == ".json" else parse_key_values(text)
    cfg = ExperimentConfig.model_validate(data)
    logger.info(f"Configuración {path.name} cargada: problema={cfg.problem}, modo={cfg.mode}, semillas={cfg.seeds}")
    return cfg
