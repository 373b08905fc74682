"""Ejecución de experimentos: Fase I si hace falta, constantes, un solve por semilla
y emisión de informes."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from slipipm.core.estimate import estimate_constants
from slipipm.core.model import NoiseModel
from slipipm.core.phase1 import Phase1Result, phase1_solve
from slipipm.core.slip import EQ_TOL, LipschitzEstimates, Schedule, SolveReport, default_schedule, solve
from slipipm.harness import reports
from slipipm.harness.problems import Fixture, fixture_batch, resolve_problem
from slipipm.harness.settings import ExperimentConfig

logger = logging.getLogger(__name__)

BATCH_SOURCE = "batch"


@dataclass
class PreparedRun:
    fixture: Fixture
    x1: np.ndarray
    schedule: Schedule
    estimates: LipschitzEstimates
    sampled: bool
    phase1: Optional[Phase1Result] = None


@dataclass
class ExperimentResult:
    label: str
    reports: list[SolveReport] = field(default_factory=list)
    phase1: list[Phase1Result] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)


def _usable_start(fx: Fixture, x: Optional[np.ndarray]) -> bool:
    p = fx.spec
    if x is None or np.shape(x) != (p.n,):
        return False
    tol = EQ_TOL * (1.0 + float(np.linalg.norm(p.b)))
    return p.residual_eq(x) <= tol and (p.m == 0 or float(np.max(p.eval_c(x))) < 0.0)


def find_start(fx: Fixture, start: Optional[list[float]] = None) -> tuple[np.ndarray, Optional[Phase1Result]]:
    """Punto de partida estrictamente factible; recurre a la Fase I si no se conoce uno.

    Un `start` explícito se usa tal cual y lo valida `solve`.
    """
    p = fx.spec
    if start is not None:
        return np.asarray(start, dtype=float), None
    x = fx.x_start
    if _usable_start(fx, x):
        return np.asarray(x, dtype=float), None
    x0 = np.zeros(p.n) if x is None else np.asarray(x, dtype=float)
    logger.info(f"{p.name}: sin punto interior conocido, se ejecuta la Fase I")
    result = phase1_solve(p, x0)
    result.raise_for_failure()
    return result.x, result


def prepare_run(fx: Fixture, cfg: ExperimentConfig, mode: Optional[str] = None) -> PreparedRun:
    mode = mode or cfg.mode
    x1, ph1 = find_start(fx, cfg.start)
    noise = cfg.noise.to_model()
    sigma = noise.bound if mode == "stochastic" else 0.0
    if fx.estimates is not None and fx.estimates.m == fx.spec.m:
        est, sampled = fx.estimates.with_sigma(sigma), False
    else:
        est = estimate_constants(fx.spec, x1, cfg.estimate_samples, seed=cfg.estimate_seed, sigma=sigma)
        sampled = True
    sched = default_schedule(fx.spec, x1, mode, cfg.h_policy, K=cfg.budget, **cfg.schedule.to_kwargs())
    return PreparedRun(fx, x1, sched, est, sampled, ph1)


def run_seed(run: PreparedRun, cfg: ExperimentConfig, seed: int) -> SolveReport:
    noise = cfg.noise.to_model() if run.schedule.stochastic else NoiseModel()
    return solve(
        run.fixture.spec,
        run.schedule,
        run.estimates,
        run.x1,
        h_policy=cfg.h_policy,
        noise=noise,
        rng=np.random.default_rng(seed),
        seed=seed,
        decrease_check=cfg.decrease_check or "off",
        trace_every=cfg.trace_every,
    )


def _run_seeds(run: PreparedRun, cfg: ExperimentConfig) -> list[SolveReport]:
    if cfg.workers > 1 and len(cfg.seeds) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(lambda sd: run_seed(run, cfg, sd), cfg.seeds))
    return [run_seed(run, cfg, sd) for sd in cfg.seeds]


def _fixtures(cfg: ExperimentConfig) -> list[Fixture]:
    if cfg.problem == BATCH_SOURCE:
        return fixture_batch()
    return [resolve_problem(cfg.problem)]


def run_experiment(cfg: ExperimentConfig, ledger: bool = True) -> ExperimentResult:
    """Ejecuta la configuración completa y escribe los informes en `cfg.output_dir`."""
    out_dir = Path(cfg.output_dir)
    label = cfg.run_label
    res = ExperimentResult(label=label)
    batch = cfg.problem == BATCH_SOURCE

    for fx in _fixtures(cfg):
        run = prepare_run(fx, cfg)
        if run.phase1 is not None:
            res.phase1.append(run.phase1)
            res.files.extend(reports.write_phase1(run.phase1, out_dir, f"{label}_{fx.name}").values())
        runs: list[SolveReport] = []
        if cfg.include_deterministic and cfg.mode == "stochastic":
            det = prepare_run(fx, cfg, mode="deterministic")
            runs.append(run_seed(det, cfg, cfg.seeds[0]))
        runs.extend(_run_seeds(run, cfg) if not batch else [run_seed(run, cfg, cfg.seeds[0])])
        for rep in runs:
            stem = f"{label}_{fx.name}" if batch else label
            if rep.mode != cfg.mode:
                stem = f"{stem}_det"
            res.files.extend(reports.write_run(rep, out_dir, stem).values())
        res.reports.extend(runs)

    # agregación con un único escritor, después de todas las ejecuciones
    res.summary = reports.summarize(res.reports)
    res.summary["config_hash"] = cfg.config_hash()
    res.files.append(reports.write_csv(reports.objective_table(res.reports), out_dir / f"{label}_objectives.csv"))
    res.files.append(reports.write_json(res.summary, out_dir / f"{label}_summary.json"))
    res.files.append(reports.write_json(cfg.model_dump(mode="json", exclude={"workers", "output_dir"}), out_dir / f"{label}_config.json"))
    if batch:
        res.files.append(reports.write_csv(reports.histogram_frame(res.reports), out_dir / f"{label}_histogram.csv"))

    if ledger:
        _record(res, cfg)
    logger.info(
        f"Experimento {label}: {len(res.reports)} ejecuciones, dispersión relativa de f(x_K) = "
        f"{res.summary['f_final_relative_spread']:.3e}"
    )
    return res


def _record(res: ExperimentResult, cfg: ExperimentConfig) -> None:
    from slipipm.harness.ledger import record_phase1, record_solve

    try:
        for ph in res.phase1:
            record_phase1(ph)
        for rep in res.reports:
            record_solve(rep, cfg.config_hash())
    except Exception as e:
        # el registro es secundario: los archivos ya están escritos
        logger.error(f"No se pudo escribir en el registro de ejecuciones: {e}", exc_info=True)
