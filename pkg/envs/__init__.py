from .dirichlet import sample_dirichlet, sample_partner_distribution
from .matrix import PAYOFF_MATRIX, best_response, encode_matrix_obs, matrix_step
from .tsg import TsgState, encode_pairs, tsg_reset, tsg_step
from .oracles import joint_optimal_plan, solo_optimal_plan

__all__ = [
    "sample_dirichlet",
    "sample_partner_distribution",
    "PAYOFF_MATRIX",
    "best_response",
    "encode_matrix_obs",
    "matrix_step",
    "TsgState",
    "encode_pairs",
    "tsg_reset",
    "tsg_step",
    "joint_optimal_plan",
    "solo_optimal_plan",
]
