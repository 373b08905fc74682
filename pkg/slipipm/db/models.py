from datetime import datetime
from typing import Optional

from sqlalchemy import (
    JSON,
    Boolean,
    DateTime,
    Enum,
    Float,
    Index,
    Integer,
    String,
)
from sqlalchemy.orm import Mapped, mapped_column

from .config import Base


ModeEnum = Enum("deterministic", "stochastic", name="mode_enum")


class SolveRun(Base):
    __tablename__ = "solve_runs"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    problem: Mapped[str] = mapped_column(String(255), nullable=False)
    config_hash: Mapped[Optional[str]] = mapped_column(String(64))
    mode: Mapped[str] = mapped_column(ModeEnum, nullable=False)
    seed: Mapped[Optional[int]] = mapped_column(Integer)
    noise_kind: Mapped[str] = mapped_column(String(32), nullable=False, default="none")
    iterations: Mapped[int] = mapped_column(Integer, nullable=False)
    f_initial: Mapped[Optional[float]] = mapped_column(Float)
    f_final: Mapped[Optional[float]] = mapped_column(Float)
    relative_stationarity: Mapped[Optional[float]] = mapped_column(Float)
    mu_resets: Mapped[int] = mapped_column(Integer, nullable=False, default=0)
    kkt_stationarity: Mapped[Optional[float]] = mapped_column(Float)
    kkt_complementarity: Mapped[Optional[float]] = mapped_column(Float)
    report: Mapped[Optional[dict]] = mapped_column(JSON)
    created_at: Mapped[datetime] = mapped_column(DateTime, default=datetime.utcnow, nullable=False)

    __table_args__ = (
        Index("ix_solve_runs_problem", "problem"),
    )


class Phase1Run(Base):
    __tablename__ = "phase1_runs"

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    problem: Mapped[str] = mapped_column(String(255), nullable=False)
    success: Mapped[bool] = mapped_column(Boolean, nullable=False)
    iterations: Mapped[int] = mapped_column(Integer, nullable=False)
    failure: Mapped[Optional[str]] = mapped_column(String(255))
    final_violation: Mapped[Optional[float]] = mapped_column(Float)
    created_at: Mapped[datetime] = mapped_column(DateTime, default=datetime.utcnow, nullable=False)
