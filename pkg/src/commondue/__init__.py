"""Exact solvers for single-machine scheduling around a common due date."""

from .dominance import best_for_partition, decode_dblock, decode_left_block, make_orders
from .instance import Instance, RawInstance, classify, make_instance, parse_benchmark, parse_inline
from .lp import relax_value, simplex_solve
from .schedule import evaluate, is_feasible
from .separation import gomory_hu, min_cut, separate, separate_triangle
from .solver import BcConfig, SolveReport, branch_and_cut, brute_force_schedules, enumerate_exact, solve, solve_f2

__all__ = [
    "BcConfig",
    "Instance",
    "RawInstance",
    "SolveReport",
    "best_for_partition",
    "branch_and_cut",
    "brute_force_schedules",
    "classify",
    "decode_dblock",
    "decode_left_block",
    "enumerate_exact",
    "evaluate",
    "gomory_hu",
    "is_feasible",
    "make_instance",
    "make_orders",
    "min_cut",
    "parse_benchmark",
    "parse_inline",
    "relax_value",
    "separate",
    "separate_triangle",
    "simplex_solve",
    "solve",
    "solve_f2",
]
