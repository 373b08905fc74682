"""Registro opcional de ejecuciones en base de datos."""

from __future__ import annotations

import logging
from typing import Optional

import pandas as pd
from sqlalchemy import select
from sqlalchemy.exc import OperationalError
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from slipipm.core.phase1 import Phase1Result
from slipipm.core.slip import SolveReport
from slipipm.db.config import db_session, init_db
from slipipm.db.models import Phase1Run, SolveRun

logger = logging.getLogger(__name__)

_ready = False


def ensure_ledger() -> None:
    global _ready
    if not _ready:
        init_db()
        _ready = True


@retry(
    retry=retry_if_exception_type(OperationalError),
    wait=wait_exponential(multiplier=1, min=1, max=10),
    stop=stop_after_attempt(5),
    reraise=True,
)
def record_solve(report: SolveReport, config_hash: Optional[str] = None) -> int:
    ensure_ledger()
    with db_session() as s:
        row = SolveRun(
            problem=report.problem,
            config_hash=config_hash,
            mode=report.mode,
            seed=report.seed,
            noise_kind=str(report.noise.get("kind", "none")),
            iterations=report.iterations_run,
            f_initial=report.f_initial,
            f_final=report.f_final,
            relative_stationarity=report.relative_stationarity,
            mu_resets=report.mu_resets,
            kkt_stationarity=report.kkt.stationarity if report.kkt else None,
            kkt_complementarity=report.kkt.complementarity if report.kkt else None,
            report=report.to_dict(),
        )
        s.add(row)
        s.flush()
        return int(row.id)


@retry(
    retry=retry_if_exception_type(OperationalError),
    wait=wait_exponential(multiplier=1, min=1, max=10),
    stop=stop_after_attempt(5),
    reraise=True,
)
def record_phase1(result: Phase1Result) -> int:
    ensure_ledger()
    with db_session() as s:
        row = Phase1Run(
            problem=result.problem,
            success=result.success,
            iterations=result.iterations,
            failure=result.failure,
            final_violation=result.final_violation,
        )
        s.add(row)
        s.flush()
        return int(row.id)


def runs_frame(problem: Optional[str] = None) -> pd.DataFrame:
    ensure_ledger()
    stmt = select(
        SolveRun.id, SolveRun.problem, SolveRun.mode, SolveRun.seed, SolveRun.noise_kind,
        SolveRun.iterations, SolveRun.f_initial, SolveRun.f_final, SolveRun.relative_stationarity,
        SolveRun.mu_resets, SolveRun.created_at,
    ).order_by(SolveRun.id)
    if problem:
        stmt = stmt.where(SolveRun.problem == problem)
    with db_session() as s:
        rows = s.execute(stmt).all()
    return pd.DataFrame([r._asdict() for r in rows])
