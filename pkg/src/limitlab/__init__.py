"""limitlab: label-noise-robust training via label-blind gradient
prediction, with information-theoretic memorization bounds and
gradient-distance mislabel detection."""

from .bounds import BoundQuery, BoundResult, capacity_bound_bits, fano_error_lower_bound, per_step_budget
from .data import Dataset, gen_synthetic, load_dataset, load_idx, save_dataset, split_dataset
from .detect import DetectionReport, histogram, roc_auc, score_examples
from .kernels import BACKEND
from .nn import (
    ForwardTrace,
    MlpModel,
    backprop_from_logits,
    forward,
    init_model,
    mae_logit_grad,
    softmax_ce_logit_grad,
)
from .noise import NoiseSpec, binary_entropy_bits, conditional_entropy_bits, corrupt
from .training import (
    AdamState,
    TrainConfig,
    TrainRun,
    adam_step,
    ce_logit_update_grad,
    derive_seeds,
    limit_predict_mu,
    limit_step,
    soft_reg_step,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "BACKEND", "BoundQuery", "BoundResult", "Dataset",
    "DetectionReport", "ForwardTrace", "MlpModel", "NoiseSpec", "TrainConfig",
    "TrainRun", "adam_step", "backprop_from_logits", "binary_entropy_bits",
    "capacity_bound_bits", "ce_logit_update_grad", "conditional_entropy_bits",
    "corrupt", "derive_seeds", "fano_error_lower_bound", "forward",
    "gen_synthetic", "histogram", "init_model", "limit_predict_mu",
    "limit_step", "load_dataset", "load_idx", "mae_logit_grad",
    "per_step_budget", "roc_auc", "save_dataset", "score_examples",
    "soft_reg_step", "softmax_ce_logit_grad", "split_dataset", "train",
]
