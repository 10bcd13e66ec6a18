"""
Dump Module
Formato binario de solucoes: uma linha de cabecalho JSON UTF-8 terminada em '\\n'
seguida de float64 little-endian crus, (nt+1) * prod(grid) valores,
ordem t-major e depois row-major. Ida e volta bit-exata.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from src.core.cone import PotentialPath
from src.core.errors import DumpFormatError

logger = logging.getLogger(__name__)

DUMP_VERSION = 1
DUMP_DTYPE = "f64"
DUMP_ORDER = "t-major-then-row-major"
_LE_FLOAT64 = np.dtype("<f8")


def _header(path: PotentialPath) -> bytes:
    header = {
        "version": DUMP_VERSION,
        "nt": path.nt,
        "grid": list(path.grid_dims),
        "dtype": DUMP_DTYPE,
        "order": DUMP_ORDER,
    }
    return (json.dumps(header, separators=(",", ":")) + "\n").encode("utf-8")


def write_solution_dump(path: PotentialPath, file: Path | str) -> Path:
    """Grava o caminho no formato de dump; devolve o caminho do arquivo."""
    target = Path(file)
    target.parent.mkdir(parents=True, exist_ok=True)
    payload = np.ascontiguousarray(path.slices, dtype=_LE_FLOAT64).tobytes(order="C")
    with open(target, "wb") as handle:
        handle.write(_header(path))
        handle.write(payload)
    logger.info("Dump gravado: %s (%d bytes de payload)", target, len(payload))
    return target


def read_solution_dump(file: Path | str) -> PotentialPath:
    """Le um dump e valida cabecalho e tamanho do payload."""
    raw = Path(file).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise DumpFormatError("Cabecalho sem terminador de linha")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DumpFormatError(f"Cabecalho invalido: {exc}") from exc
    if not isinstance(header, dict):
        raise DumpFormatError("Cabecalho deve ser um objeto JSON")

    version = header.get("version")
    if version != DUMP_VERSION:
        raise DumpFormatError(f"Versao de dump nao suportada: {version}")
    if header.get("dtype") != DUMP_DTYPE or header.get("order") != DUMP_ORDER:
        raise DumpFormatError("Header mismatch: dtype/order inesperados")
    nt = header.get("nt")
    grid = header.get("grid")
    if not isinstance(nt, int) or not isinstance(grid, list) or not all(
        isinstance(d, int) and d > 0 for d in grid
    ):
        raise DumpFormatError("Header mismatch: nt/grid invalidos")

    payload = raw[newline + 1:]
    expected = (nt + 1) * int(np.prod(grid)) * _LE_FLOAT64.itemsize
    if len(payload) < expected:
        raise DumpFormatError(
            f"truncated payload: esperados {expected} bytes, encontrados {len(payload)}"
        )
    if len(payload) > expected:
        raise DumpFormatError(
            f"Header mismatch: payload com {len(payload) - expected} bytes a mais"
        )
    values = np.frombuffer(payload, dtype=_LE_FLOAT64).reshape(nt + 1, *grid)
    return PotentialPath(values.astype(np.float64))


# "Verba volant, scripta manent." - proverbio latino
