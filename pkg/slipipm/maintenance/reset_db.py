"""Vacía el registro de ejecuciones.

Borra las tablas `solve_runs` y `phase1_runs` y las vuelve a crear.
"""

from __future__ import annotations

from slipipm.db import models  # noqa: F401
from slipipm.db.config import Base, engine, init_db


def reset_ledger() -> dict[str, int]:
    stats = {"dropped": 0, "created": 0}
    with engine.begin() as conn:
        stats["dropped"] = len(Base.metadata.sorted_tables)
        Base.metadata.drop_all(bind=conn)
    init_db()
    stats["created"] = len(Base.metadata.sorted_tables)
    return stats


def main() -> None:
    res = reset_ledger()
    print(f"Registro reseteado: {res}")


if __name__ == "__main__":
    main()
