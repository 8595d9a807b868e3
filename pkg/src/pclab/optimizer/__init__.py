from .anneal import AnnealSchedule, Evaluation, OptTrace, evaluate, lambda_scan, optimize
from .moves import MOVES, MoveContext, MovePool, propose

__all__ = [
    "AnnealSchedule",
    "Evaluation",
    "OptTrace",
    "MovePool",
    "MoveContext",
    "MOVES",
    "evaluate",
    "lambda_scan",
    "optimize",
    "propose",
]
