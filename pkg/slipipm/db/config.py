import os
from contextlib import contextmanager
import logging

from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker, DeclarativeBase
from sqlalchemy.pool import StaticPool

# Importa la configuración general (carga .env y configura logging)
from slipipm import config as _config  # noqa: F401

logger = logging.getLogger(__name__)


class Base(DeclarativeBase):
    pass


DATABASE_URL = os.getenv("SLIP_DATABASE_URL", "sqlite:///slip_runs.db")

if DATABASE_URL in ("sqlite://", "sqlite:///:memory:"):
    # En memoria: una única conexión compartida entre hilos
    engine = create_engine(
        DATABASE_URL,
        poolclass=StaticPool,
        connect_args={"check_same_thread": False},
    )
else:
    # Timeout corto: varias semillas pueden escribir a la vez en el mismo SQLite
    _connect_args = {"timeout": 5} if DATABASE_URL.startswith("sqlite") else {"connect_timeout": 5}
    engine = create_engine(
        DATABASE_URL,
        pool_pre_ping=True,
        connect_args=_connect_args,
    )
SessionLocal = sessionmaker(bind=engine, autoflush=False, autocommit=False)


@contextmanager
def db_session():
    session = SessionLocal()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()


def init_db():
    """Inicializa el registro de ejecuciones, asegurando que las tablas existan."""
    from . import models  # noqa: F401

    Base.metadata.create_all(bind=engine, checkfirst=True)
    logger.info("Tablas del registro de ejecuciones verificadas/creadas.")
