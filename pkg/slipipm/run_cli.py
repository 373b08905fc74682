"""Línea de comandos.

    python -m slipipm phase1 <problema> [--margin --max-iter]
    python -m slipipm solve <problema> [--mode --seed --budget --theta0 --mu1 --t --t-alpha --h-policy --noise]
    python -m slipipm bench <config>
    python -m slipipm generate socp --n --l --seed -o <archivo>

Códigos de salida: 0 éxito, 2 punto inicial no factible, 3 fallo de la Fase I,
4 fallo numérico o de configuración.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import ValidationError

from slipipm import config
from slipipm.core.phase1 import FeasibilityMargins, phase1_solve
from slipipm.errors import InfeasibleStart, Phase1Failure, SlipError
from slipipm.harness import reports
from slipipm.harness.experiment import run_experiment
from slipipm.harness.problems import dump_problem, generate_socp, resolve_problem
from slipipm.harness.settings import ExperimentConfig, NoiseSpec, ScheduleOverrides, load_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INFEASIBLE_START = 2
EXIT_PHASE1 = 3
EXIT_NUMERICAL = 4


def _float_list(raw: Optional[str]) -> Optional[list[float]]:
    if raw is None:
        return None
    return [float(v) for v in raw.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slipipm", description="Método de punto interior de un solo lazo")
    sub = parser.add_subparsers(dest="command", required=True)

    ph = sub.add_parser("phase1", help="Busca un punto estrictamente factible")
    ph.add_argument("problem", help="fixture, socp:n,l,seed o archivo JSON")
    ph.add_argument("--margin", type=float, default=1e-4)
    ph.add_argument("--max-iter", type=int, default=None)
    ph.add_argument("--start", type=str, default=None, help="x0 separado por comas")
    ph.add_argument("--output-dir", default=None)
    ph.add_argument("--no-ledger", action="store_true")

    sv = sub.add_parser("solve", help="Ejecuta SLIP sobre un problema")
    sv.add_argument("problem", help="fixture, socp:n,l,seed, archivo JSON o batch")
    sv.add_argument("--mode", choices=["deterministic", "stochastic"], default="deterministic")
    sv.add_argument("--seed", type=int, nargs="+", default=[0])
    sv.add_argument("--budget", type=int, default=None)
    sv.add_argument("--theta0", type=float, default=None)
    sv.add_argument("--mu1", type=float, default=None)
    sv.add_argument("--t", type=float, default=None)
    sv.add_argument("--t-alpha", type=float, default=None)
    sv.add_argument("--h-policy", choices=["identity", "barrier_hessian"], default="identity")
    sv.add_argument("--noise", choices=["none", "gaussian", "projected_bounded", "minibatch_like"], default="none")
    sv.add_argument("--sigma", type=float, default=1.0)
    sv.add_argument("--batch-frac", type=float, default=1.0)
    sv.add_argument("--decrease-check", choices=["off", "soft", "strict"], default=None)
    sv.add_argument("--trace-every", type=int, default=1)
    sv.add_argument("--start", type=str, default=None, help="x1 separado por comas")
    sv.add_argument("--output-dir", default=None)
    sv.add_argument("--workers", type=int, default=1)
    sv.add_argument("--no-ledger", action="store_true")

    bn = sub.add_parser("bench", help="Ejecuta un archivo de configuración de experimento")
    bn.add_argument("config_file")
    bn.add_argument("--output-dir", default=None)
    bn.add_argument("--workers", type=int, default=None)
    bn.add_argument("--no-ledger", action="store_true")

    gen = sub.add_parser("generate", help="Genera instancias de prueba")
    gen_sub = gen.add_subparsers(dest="kind", required=True)
    so = gen_sub.add_parser("socp", help="SOCP aleatorio con punto interior conocido")
    so.add_argument("--n", type=int, required=True)
    so.add_argument("--l", type=int, required=True)
    so.add_argument("--seed", type=int, default=0)
    so.add_argument("-o", "--output", required=True)
    return parser


def _cmd_phase1(args: argparse.Namespace) -> int:
    fx = resolve_problem(args.problem)
    start = _float_list(args.start)
    x0 = np.asarray(start, dtype=float) if start is not None else fx.x_start
    if x0 is None:
        x0 = np.zeros(fx.spec.n)
    margins = FeasibilityMargins(one_sided_margin=args.margin, two_sided_factor=args.margin)
    result = phase1_solve(fx.spec, x0, margins=margins, max_iter=args.max_iter)
    out_dir = Path(args.output_dir or config.OUTPUT_DIR)
    paths = reports.write_phase1(result, out_dir, fx.name)
    if not args.no_ledger:
        from slipipm.harness.ledger import record_phase1

        record_phase1(result)
    parts = [
        f"Fase I {'OK' if result.success else 'fallida'} en {fx.name}",
        f"{result.iterations} iteraciones",
        f"violación final {result.final_violation:.3e}",
        f"informe {paths['report']}",
    ]
    print(" | ".join(parts))
    result.raise_for_failure()
    return EXIT_OK


def _cmd_solve(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig(
        problem=args.problem,
        mode=args.mode,
        h_policy=args.h_policy,
        schedule=ScheduleOverrides(theta0=args.theta0, mu1=args.mu1, t=args.t, t_alpha=args.t_alpha),
        noise=NoiseSpec(kind=args.noise, sigma=args.sigma if args.noise != "none" else 0.0, batch_frac=args.batch_frac),
        seeds=args.seed,
        output_dir=args.output_dir or config.OUTPUT_DIR,
        budget=config.DEFAULT_BUDGET if args.budget is None else args.budget,
        decrease_check=args.decrease_check,
        trace_every=args.trace_every,
        workers=args.workers,
        start=_float_list(args.start),
    )
    return _run(cfg, ledger=not args.no_ledger)


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = load_config(args.config_file)
    updates = {}
    if args.output_dir:
        updates["output_dir"] = args.output_dir
    if args.workers:
        updates["workers"] = args.workers
    if updates:
        cfg = cfg.model_copy(update=updates)
    return _run(cfg, ledger=not args.no_ledger)


def _run(cfg: ExperimentConfig, ledger: bool) -> int:
    res = run_experiment(cfg, ledger=ledger)
    s = res.summary
    parts = [f"{cfg.run_label}: {s['runs']} ejecuciones"]
    if s["f_final_min"] is not None:
        parts.append(f"f(x_K) ∈ [{s['f_final_min']:.6e}, {s['f_final_max']:.6e}]")
    if s["relative_stationarity_median"] is not None:
        parts.append(f"estacionariedad relativa mediana {s['relative_stationarity_median']:.3e}")
    parts.append(f"reinicios de μ1 {s['mu_resets_total']}")
    parts.append(f"salida en {cfg.output_dir}")
    print(" | ".join(parts))
    return EXIT_OK


def _cmd_generate(args: argparse.Namespace) -> int:
    fx = generate_socp(args.n, args.l, args.seed)
    path = dump_problem(fx, args.output)
    print(f"SOCP {fx.name} escrito en {path}")
    return EXIT_OK


COMMANDS = {
    "phase1": _cmd_phase1,
    "solve": _cmd_solve,
    "bench": _cmd_bench,
    "generate": _cmd_generate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InfeasibleStart as e:
        logger.error(f"Punto inicial no factible: {e}")
        return EXIT_INFEASIBLE_START
    except Phase1Failure as e:
        logger.error(f"Fase I fallida: {e}")
        return EXIT_PHASE1
    except ValidationError as e:
        logger.error(f"Configuración inválida: {e}")
        return EXIT_NUMERICAL
    except (SlipError, ValueError, KeyError, np.linalg.LinAlgError) as e:
        logger.error(f"Fallo en {args.command}: {e}", exc_info=True)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
