"""
Report Module
Exporta relatorios JSON (solve, distancia, verificacao, identidade do cone)
e a serie temporal de diagnosticos em CSV.
Saidas deterministicas: chaves ordenadas, sem timestamps nem tempo de parede.
"""
from __future__ import annotations

import csv
import json
import logging
from collections.abc import Iterable
from pathlib import Path
from typing import Any

from src.core.functionals import PathDiagnostics

logger = logging.getLogger(__name__)

CSV_COLUMNS = PathDiagnostics.COLUMNS


class ReportExporter:
    """Grava artefatos de uma execucao em um diretorio de saida."""

    def __init__(self, output_dir: Path) -> None:
        self._output_dir = Path(output_dir)

    @property
    def output_dir(self) -> Path:
        return self._output_dir

    def write_json(self, name: str, payload: dict[str, Any]) -> Path:
        """JSON com chaves ordenadas e newline final."""
        self._output_dir.mkdir(parents=True, exist_ok=True)
        target = self._output_dir / name
        with open(target, "w", encoding="utf-8") as f:
            f.write(json.dumps(payload, indent=2, sort_keys=True, allow_nan=True))
            f.write("\n")
        logger.info("Relatorio exportado: %s", target)
        return target

    def write_diagnostics_csv(self, name: str, diagnostics: PathDiagnostics) -> Path:
        """Uma linha por fatia com as colunas fixas de CSV_COLUMNS."""
        self._output_dir.mkdir(parents=True, exist_ok=True)
        target = self._output_dir / name
        with open(target, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in diagnostics.rows():
                writer.writerow(repr(value) for value in row)
        logger.info("Diagnosticos exportados: %s (%d fatias)", target, len(diagnostics.times))
        return target


def read_diagnostics_csv(file: Path | str) -> list[dict[str, float]]:
    """Le o CSV de diagnosticos de volta como dicionarios de floats."""
    with open(file, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        return [{key: float(value) for key, value in row.items()} for row in reader]


def checks_payload(results: Iterable[Any], level: str) -> dict[str, Any]:
    """Corpo do relatorio de verificacao a partir de CheckResult."""
    rows = [result.to_dict() for result in results]
    return {
        "level": level,
        "passed": all(row["passed"] for row in rows),
        "checks": rows,
    }


# "O que nao se mede nao se gerencia." - W. Edwards Deming
