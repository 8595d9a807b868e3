from .main import build_parser, main
from .pipeline import execute, run_scenario, run_suite

__all__ = ["build_parser", "main", "execute", "run_scenario", "run_suite"]
