from .solve_planner import SolvePlan, SolveRequest, assert_plan_applies, plan_solve

__all__ = [
    'SolvePlan',
    'SolveRequest',
    'assert_plan_applies',
    'plan_solve',
]
