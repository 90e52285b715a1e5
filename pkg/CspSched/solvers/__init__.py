from .greedy_single_slot import reduce_preferences, solve as solve_greedy, solve_fractional
from .fptas_multislot import dkp_exact, enumerate_guesses, round_demands, solve_bifptas
from .ptas_multislot import (
    projection_budget,
    purify_to_bfs,
    solve_ptas,
    solve_ptas_fractional,
    solve_relaxation,
)
from .ufp_reduction import (
    carry_back,
    check_nba,
    crossing_bound_check,
    solve_bag_exact,
    solve_large_local_ratio,
    solve_small_greedy,
    solve_split,
    split_by_delta,
    to_bag_ufp,
)
from .mixed_elastic import compute_lb, discretize, map_back, solve_mixed

__all__ = [
    'reduce_preferences',
    'solve_greedy',
    'solve_fractional',
    'dkp_exact',
    'enumerate_guesses',
    'round_demands',
    'solve_bifptas',
    'projection_budget',
    'purify_to_bfs',
    'solve_ptas',
    'solve_ptas_fractional',
    'solve_relaxation',
    'carry_back',
    'check_nba',
    'crossing_bound_check',
    'solve_bag_exact',
    'solve_large_local_ratio',
    'solve_small_greedy',
    'solve_split',
    'split_by_delta',
    'to_bag_ufp',
    'compute_lb',
    'discretize',
    'map_back',
    'solve_mixed',
]
