"""
CLI Module
Interface de linha de comando com subcomandos para resolver eps-geodesicas,
medir distancias, rodar a campanha de verificacao, checar a identidade do cone
e estudar convergencia sob refinamento.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

from src.core.config import (
    BOUNDARY_KINDS,
    CONTINUATIONS,
    LEVELS,
    LINEAR_SOLVERS,
    PROBLEMS,
    RHS_KINDS,
    RunConfig,
    limit_blas_threads,
    parse_config,
)
from src.core.errors import ConfigError, SasakiError
from src.core.logger import AppLogger, Verbosity

logger = logging.getLogger(__name__)

VERSION = "0.1.0"

EXIT_OK = 0
EXIT_SOLVER_FAILURE = 1
EXIT_CHECK_FAILURE = 2
EXIT_CONFIG_ERROR = 64

_BOUNDARY_FLAGS = {
    "boundary": "kind",
    "phi0": "phi0",
    "phi1": "phi1",
    "amplitude": "amplitude",
    "frequency": "frequency",
    "modes": "modes",
    "seed": "seed",
    "phi0_file": "phi0_file",
    "phi1_file": "phi1_file",
}
_RHS_FLAGS = {
    "rhs": "kind",
    "rhs_value": "value",
    "rhs_amplitude": "amplitude",
    "rhs_frequency": "frequency",
}


def _common_options() -> argparse.ArgumentParser:
    """Flags compartilhadas; espelham os campos de RunConfig."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="Arquivo JSON de configuracao")
    common.add_argument("--output-dir", dest="output_dir", type=Path, default=None)
    common.add_argument("--nt", type=int, default=None, help="Passos em t (padrao: 32)")
    common.add_argument("--n", type=int, default=None, help="Dimensao complexa transversa")
    common.add_argument("--grid", type=int, nargs="+", default=None, help="Nos por eixo real")

    solver = common.add_argument_group("solver")
    solver.add_argument("--eps-start", dest="eps_start", type=float, default=None)
    solver.add_argument("--eps-min", dest="eps_min", type=float, default=None)
    solver.add_argument("--eps-factor", dest="eps_factor", type=float, default=None)
    solver.add_argument("--newton-tol", dest="newton_tol", type=float, default=None)
    solver.add_argument("--max-newton", dest="max_newton", type=int, default=None)
    solver.add_argument("--backtrack", type=float, default=None)
    solver.add_argument("--min-step", dest="min_step", type=float, default=None)
    solver.add_argument("--m-init", dest="m_init", type=float, default=None)
    solver.add_argument(
        "--linear-solver", dest="linear_solver", choices=LINEAR_SOLVERS, default=None
    )
    solver.add_argument("--continuation", choices=CONTINUATIONS, default=None)
    solver.add_argument("--rhs-steps", dest="rhs_steps", type=int, default=None)

    data = common.add_argument_group("dados de fronteira e lado direito")
    data.add_argument("--boundary", choices=BOUNDARY_KINDS, default=None)
    data.add_argument("--phi0", type=float, default=None)
    data.add_argument("--phi1", type=float, default=None)
    data.add_argument("--amplitude", type=float, default=None)
    data.add_argument("--frequency", type=int, default=None)
    data.add_argument("--modes", type=int, default=None)
    data.add_argument("--seed", type=int, default=None)
    data.add_argument("--phi0-file", dest="phi0_file", type=str, default=None)
    data.add_argument("--phi1-file", dest="phi1_file", type=str, default=None)
    data.add_argument("--rhs", choices=RHS_KINDS, default=None)
    data.add_argument("--rhs-value", dest="rhs_value", type=float, default=None)
    data.add_argument("--rhs-amplitude", dest="rhs_amplitude", type=float, default=None)
    data.add_argument("--rhs-frequency", dest="rhs_frequency", type=int, default=None)
    return common


def _build_parser() -> argparse.ArgumentParser:
    """Constroi o parser principal com todos os subcomandos."""
    parser = argparse.ArgumentParser(
        prog="sasaki-geodesics",
        description="Solver de eps-geodesicas no espaco de metricas de Sasaki",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {VERSION}",
    )
    parser.add_argument(
        "-v", "--verbose",
        action="count",
        default=0,
        help="Aumenta verbosidade (-v verbose, -vv debug)",
    )

    subparsers = parser.add_subparsers(dest="command", help="Subcomandos disponiveis")
    common = _common_options()

    subparsers.add_parser("solve", parents=[common], help="Resolve a eps-geodesica")
    subparsers.add_parser("distance", parents=[common], help="Distancia entre phi0 e phi1")

    verify = subparsers.add_parser("verify", parents=[common], help="Campanha de verificacao")
    verify.add_argument("--level", choices=LEVELS, default=None)
    verify.add_argument("--parallel", action="store_true", default=None)
    verify.add_argument("--seeds", type=float, nargs="+", default=None)

    subparsers.add_parser(
        "identity-check", parents=[common], help="Identidade cone/tempo na solucao"
    )

    refine = subparsers.add_parser("refine", parents=[common], help="Estudo de refinamento")
    refine.add_argument("--problem", choices=PROBLEMS, default=None)
    refine.add_argument("--levels", type=int, nargs="+", default=None)

    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Namespace -> overrides de parse_config, com secoes boundary/rhs aninhadas."""
    flat = {k: v for k, v in vars(args).items() if v is not None}
    boundary = {_BOUNDARY_FLAGS[k]: flat.pop(k) for k in list(flat) if k in _BOUNDARY_FLAGS}
    rhs = {_RHS_FLAGS[k]: flat.pop(k) for k in list(flat) if k in _RHS_FLAGS}
    if boundary:
        flat["boundary"] = boundary
    if rhs:
        flat["rhs"] = rhs
    return flat


def _config_payload(config: RunConfig) -> dict[str, Any]:
    """Configuracao serializavel, copiada para cada relatorio."""
    payload = dataclasses.asdict(config)
    payload["output_dir"] = str(config.output_dir)
    return payload


class _Run:
    """Modelo, dados e exportador montados a partir do RunConfig."""

    def __init__(self, config: RunConfig) -> None:
        from src.core.generators import boundary_fields, build_model, rhs_field
        from src.exporters.report import ReportExporter

        self.config = config
        self.model = build_model(config.model)
        self.phi0, self.phi1 = boundary_fields(config.boundary, self.model)
        self.f = rhs_field(config.rhs, self.model)
        self.exporter = ReportExporter(config.output_dir)

    def solve(self) -> Any:
        from src.core.solver import solve_geodesic

        return solve_geodesic(
            self.phi0, self.phi1, self.config.solver, self.model, self.config.nt, self.f
        )


def _run_solve(config: RunConfig) -> int:
    """Executa subcomando solve: dump, relatorio JSON e diagnosticos CSV."""
    from src.core.errors import ConvergenceError
    from src.core.functionals import path_diagnostics
    from src.exporters.dump import write_solution_dump

    run = _Run(config)
    try:
        path, report = run.solve()
    except ConvergenceError as exc:
        if exc.report is not None:
            run.exporter.write_json(
                "report.json", {"config": _config_payload(config), **exc.report.to_dict()}
            )
        raise

    write_solution_dump(path, config.output_dir / "solution.dump")
    run.exporter.write_json("report.json", {"config": _config_payload(config), **report.to_dict()})
    run.exporter.write_diagnostics_csv("diagnostics.csv", path_diagnostics(path, run.model))
    print(f"Salvo em: {config.output_dir}")
    print(f"Estagios: {len(report.stages)}, iteracoes: {report.total_iterations}")
    print(f"max|R| final: {report.final.residual:.3e}")
    return EXIT_OK


def _run_distance(config: RunConfig) -> int:
    """Executa subcomando distance."""
    from src.core.functionals import geodesic_length

    run = _Run(config)
    path, report = run.solve()
    value = geodesic_length(path, run.model)
    run.exporter.write_json("distance.json", {
        "config": _config_payload(config),
        "distance": value,
        "eps_min": config.solver.eps_min,
        "iterations": report.total_iterations,
    })
    print(f"Distancia: {value:.9f}")
    return EXIT_OK


def _run_verify(config: RunConfig) -> int:
    """Executa subcomando verify; exit 2 se alguma checagem falhar."""
    from src.core.generators import build_model
    from src.exporters.report import ReportExporter, checks_payload
    from src.verify.suite import run_suite

    model = build_model(config.model)
    results = run_suite(
        config.level, model, config.solver, parallel=config.parallel, seeds=config.seeds
    )
    payload = checks_payload(results, config.level)
    ReportExporter(config.output_dir).write_json("verify.json", payload)

    for result in results:
        print(str(result))
    failed = [r for r in results if not r.passed]
    print(f"\nResumo: {len(results)} checagens, {len(failed)} falhas")
    return EXIT_CHECK_FAILURE if failed else EXIT_OK


def _run_identity_check(config: RunConfig) -> int:
    """Executa subcomando identity-check sobre a solucao do problema configurado."""
    from src.core.cone import cone_identity_check

    run = _Run(config)
    path, _ = run.solve()
    identity = cone_identity_check(path, run.model, eps=config.solver.eps_min, f=run.f)
    run.exporter.write_json("identity.json", {
        "config": _config_payload(config),
        "discrepancy": identity.discrepancy,
        "equation_discrepancy": identity.equation_discrepancy,
    })
    print(f"Discrepancia cone/tempo: {identity.discrepancy:.3e}")
    print(f"Discrepancia da equacao: {identity.equation_discrepancy:.3e}")
    return EXIT_OK


def _run_refine(config: RunConfig) -> int:
    """Executa subcomando refine; exit 2 se a ordem observada ficar abaixo de 1.7."""
    from src.exporters.report import ReportExporter
    from src.verify.refinement import refinement_study

    table = refinement_study(
        config.problem, config.levels, config.solver,
        base_grid=config.model.grid, n=config.model.n,
    )
    ReportExporter(config.output_dir).write_json(
        "refinement.json", {"config": _config_payload(config), **table.to_dict()}
    )
    for level, error in zip(table.levels, table.errors):
        print(f"nt={level}: erro {error:.3e}")
    print(f"Ordem minima: {table.min_order:.2f}")
    return EXIT_OK if table.passed else EXIT_CHECK_FAILURE


_COMMAND_MAP: dict[str, Callable[[RunConfig], int]] = {
    "solve": _run_solve,
    "distance": _run_distance,
    "verify": _run_verify,
    "identity-check": _run_identity_check,
    "refine": _run_refine,
}


def run_cli(argv: Sequence[str] | None = None) -> int:
    """Ponto de entrada principal do CLI (tambem usado pelo script instalado)."""
    limit_blas_threads()
    parser = _build_parser()
    args = parser.parse_args(argv)

    verbosity_map = {0: Verbosity.NORMAL, 1: Verbosity.VERBOSE, 2: Verbosity.DEBUG}
    verbosity = verbosity_map.get(args.verbose, Verbosity.DEBUG)
    AppLogger.setup(verbosity=verbosity)

    if args.command is None:
        parser.print_help()
        return EXIT_OK

    handler = _COMMAND_MAP.get(args.command)
    if handler is None:
        parser.print_help()
        return EXIT_CONFIG_ERROR

    config_file = args.config
    overrides = _overrides(args)
    overrides.pop("config", None)
    overrides.pop("verbose", None)
    try:
        config = parse_config(config_file, overrides)
    except ConfigError as exc:
        logger.error("Configuracao invalida: %s", exc)
        return EXIT_CONFIG_ERROR

    AppLogger.setup(verbosity=verbosity, log_dir=config.output_dir / "logs")
    logger.info("Comando %s, saida em %s", config.command, config.output_dir)

    try:
        return handler(config)
    except ConfigError as exc:
        logger.error("Configuracao invalida: %s", exc)
        return EXIT_CONFIG_ERROR
    except SasakiError as exc:
        logger.error("Falha do solver: %s", exc)
        return EXIT_SOLVER_FAILURE
    except FileNotFoundError as exc:
        logger.error("Arquivo nao encontrado: %s", exc)
        return EXIT_SOLVER_FAILURE
    except Exception as exc:
        logger.exception("Erro inesperado: %s", exc)
        return EXIT_SOLVER_FAILURE


# "A liberdade e o reconhecimento da necessidade." - Friedrich Engels
