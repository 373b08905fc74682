import os
import logging

from dotenv import load_dotenv, find_dotenv

# Carga las variables de entorno desde el archivo .env
load_dotenv(find_dotenv())

LOG_LEVEL = os.getenv("SLIP_LOG_LEVEL", "INFO").upper()

logging.basicConfig(level=getattr(logging, LOG_LEVEL, logging.INFO))
logger = logging.getLogger(__name__)


def _env_int(name: str, default: int) -> int:
    try:
        return int(os.getenv(name, default))
    except (TypeError, ValueError):
        logger.warning(f"{name} no es un entero válido, usando {default}")
        return default


def _env_float(name: str, default: float) -> float:
    try:
        return float(os.getenv(name, default))
    except (TypeError, ValueError):
        logger.warning(f"{name} no es un número válido, usando {default}")
        return default


OUTPUT_DIR = os.getenv("SLIP_OUTPUT_DIR", "resultados")
DEFAULT_BUDGET = _env_int("SLIP_BUDGET", 20000)
ESTIMATE_SAMPLES_CAP = _env_int("SLIP_ESTIMATE_SAMPLES_CAP", 64)
# Desviación típica de la normal con la que se muestrean puntos alrededor de x1
ESTIMATE_SCALE = _env_float("SLIP_ESTIMATE_SCALE", 1.0)
PHASE1_MAX_ITER = _env_int("SLIP_PHASE1_MAX_ITER", 1000)
