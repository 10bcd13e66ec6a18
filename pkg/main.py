#!/usr/bin/env python3
"""
Sasaki Geodesics
Main entry point - delega ao CLI, que limita as threads do BLAS antes de importar numpy.
"""
import sys


def main() -> int:
    from src.cli import run_cli

    return run_cli()


if __name__ == "__main__":
    sys.exit(main())


# "O inicio e a parte mais importante do trabalho." - Platao
