"""Recover overlapping cluster memberships from same-cluster queries."""

from .bounds import bound_report, necessary_omega, queries_total, sample_size, sufficient_S
from .direct import RecoveryResult, find_membership_disjoint, find_similarity_direct
from .dithered import recover_dithered
from .errors import ScqError
from .factorize import factorization1, factorization2, real_rank_factorization
from .harness import ExperimentConfig, TrialResult, run_sweep, run_trial
from .model import ClusterAssignment, ClusteringMatrix, Params, gram, quantize
from .oracle import LogOracle, OracleHandle, OracleKind
from .quantized import recover_iid_quantized, recover_uniform_quantized, recover_unknown_q
from .worstcase import recover_worstcase

__all__ = [
    "ClusterAssignment", "ClusteringMatrix", "ExperimentConfig", "LogOracle", "OracleHandle",
    "OracleKind", "Params", "RecoveryResult", "ScqError", "TrialResult", "bound_report",
    "factorization1", "factorization2", "find_membership_disjoint", "find_similarity_direct",
    "gram", "necessary_omega", "quantize", "queries_total", "real_rank_factorization",
    "recover_dithered", "recover_iid_quantized", "recover_uniform_quantized", "recover_unknown_q",
    "recover_worstcase", "run_sweep", "run_trial", "sample_size", "sufficient_S",
]
