"""Universal sequential prediction of binary sequences.

A mixture of empirical Markov experts of every order, reweighted in doubling
epochs, whose expected loss approaches the Bayes loss of any stationary
ergodic source; an extension uses quantized side information.
"""

from .context_stats import (
    CountTable,
    JointCountTable,
    MalformedInputError,
    UnknownResolutionError,
    empirical_frequency,
    joint_frequency,
    laplace_frequency,
)
from .evaluation import (
    VerificationError,
    bench,
    cumulative_loss,
    expected_loss_exact,
    hoeffding_check,
    markov_loss_bound,
    minimax_experiment,
    regret_report,
    whole_run_bound,
)
from .experts import markov_expert_predict, randomized_majority_predict, side_info_expert_predict
from .ledger import EpochRecord, LossLedger
from .mixer import SideInfoPredictor, UniversalPredictor, epoch_of, eta, predict_sequence
from .processes import (
    MarkovSource,
    SideInfoSource,
    bayes_loss,
    bernoulli,
    generate,
    side_info_bayes_loss,
    side_info_generate,
    stationary_distribution,
)
from .quantize import DyadicPartition, NestedPartition, cell_id

__all__ = [
    "CountTable",
    "JointCountTable",
    "MalformedInputError",
    "UnknownResolutionError",
    "empirical_frequency",
    "joint_frequency",
    "laplace_frequency",
    "VerificationError",
    "bench",
    "cumulative_loss",
    "expected_loss_exact",
    "hoeffding_check",
    "markov_loss_bound",
    "minimax_experiment",
    "regret_report",
    "whole_run_bound",
    "markov_expert_predict",
    "randomized_majority_predict",
    "side_info_expert_predict",
    "EpochRecord",
    "LossLedger",
    "SideInfoPredictor",
    "UniversalPredictor",
    "epoch_of",
    "eta",
    "predict_sequence",
    "MarkovSource",
    "SideInfoSource",
    "bayes_loss",
    "bernoulli",
    "generate",
    "side_info_bayes_loss",
    "side_info_generate",
    "stationary_distribution",
    "DyadicPartition",
    "NestedPartition",
    "cell_id",
]
