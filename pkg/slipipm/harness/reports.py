"""Salida de resultados: informes JSON por ejecución, trazas CSV y tablas agregadas.

Los archivos no llevan marcas de tiempo, así que misma configuración y semillas
producen archivos idénticos byte a byte.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import pandas as pd

from slipipm.core.phase1 import Phase1Result
from slipipm.core.slip import SolveReport

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.6e"
TRACE_COLUMNS = [
    "k", "stationarity", "alpha", "gamma", "gamma_rule", "gamma_min", "gamma_max",
    "active_count", "mu", "theta", "L", "phi_shifted", "reset",
]
RELATIVE_TARGET = 0.1


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"Tipo no serializable: {type(obj).__name__}")


def dumps(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2, default=_json_default)


def write_json(data: Any, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data) + "\n", encoding="utf-8")
    return path


def write_csv(df: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def trace_frame(report: SolveReport) -> pd.DataFrame:
    df = pd.DataFrame(report.trace)
    if df.empty:
        return pd.DataFrame(columns=TRACE_COLUMNS)
    return df.reindex(columns=[c for c in TRACE_COLUMNS if c in df.columns])


def run_stem(label: str, report: SolveReport) -> str:
    seed = "none" if report.seed is None else str(report.seed)
    return f"{label}_seed{seed}"


def write_run(report: SolveReport, out_dir: str | Path, label: str) -> dict[str, Path]:
    """Un informe JSON y una traza CSV por ejecución."""
    out_dir = Path(out_dir)
    stem = run_stem(label, report)
    paths = {
        "report": write_json(report.to_dict(), out_dir / f"{stem}.json"),
        "trace": write_csv(trace_frame(report), out_dir / f"{stem}_trace.csv"),
    }
    logger.info(f"Informe de {report.problem} (semilla {report.seed}) escrito en {paths['report']}")
    return paths


def write_phase1(result: Phase1Result, out_dir: str | Path, label: str) -> dict[str, Path]:
    out_dir = Path(out_dir)
    return {
        "report": write_json(result.to_dict(), out_dir / f"{label}_phase1.json"),
        "history": write_csv(pd.DataFrame(result.history), out_dir / f"{label}_phase1_history.csv"),
    }


def objective_table(reports: Sequence[SolveReport]) -> pd.DataFrame:
    """Filas `run / f(x_K)`: la determinista (si la hay) primero y luego una por semilla."""
    rows = []
    for rep in reports:
        run = "det" if rep.mode == "deterministic" else str(rep.seed)
        rows.append({
            "run": run,
            "problem": rep.problem,
            "f_initial": rep.f_initial,
            "f_final": rep.f_final,
            "relative_stationarity": rep.relative_stationarity,
            "mu_resets": rep.mu_resets,
        })
    return pd.DataFrame(rows, columns=["run", "problem", "f_initial", "f_final", "relative_stationarity", "mu_resets"])


def relative_spread(values: Iterable[float]) -> float:
    v = np.asarray([x for x in values if x is not None and math.isfinite(x)], dtype=float)
    if v.size < 2:
        return 0.0
    return float((v.max() - v.min()) / max(1.0, float(np.abs(v).max())))


def summarize(reports: Sequence[SolveReport]) -> dict[str, Any]:
    finals = [r.f_final for r in reports if r.f_final is not None]
    rel = [r.relative_stationarity for r in reports if r.relative_stationarity is not None]
    decreased = [
        r.f_final < r.f_initial for r in reports if r.f_final is not None and r.f_initial is not None
    ]
    return {
        "runs": len(reports),
        "f_final_min": min(finals) if finals else None,
        "f_final_max": max(finals) if finals else None,
        "f_final_mean": float(np.mean(finals)) if finals else None,
        "f_final_relative_spread": relative_spread(finals),
        "relative_stationarity_median": float(np.median(rel)) if rel else None,
        "relative_stationarity_below_target": int(sum(v < RELATIVE_TARGET for v in rel)),
        "relative_stationarity_fraction_below_target": (
            float(sum(v < RELATIVE_TARGET for v in rel) / len(rel)) if rel else None
        ),
        "all_decreased": bool(all(decreased)) if decreased else None,
        "mu_resets_total": int(sum(r.mu_resets for r in reports)),
        "condition_violations_total": int(sum(r.condition_violation_count for r in reports)),
    }


def histogram_frame(reports: Sequence[SolveReport]) -> pd.DataFrame:
    """Columna de estacionariedad relativa, un valor por problema del lote."""
    return pd.DataFrame(
        {
            "problem": [r.problem for r in reports],
            "relative_stationarity": [
                math.nan if r.relative_stationarity is None else r.relative_stationarity for r in reports
            ],
            "f_initial": [r.f_initial for r in reports],
            "f_final": [r.f_final for r in reports],
        }
    )
