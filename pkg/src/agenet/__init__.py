"""Age-estimation micro-framework.

A self-contained float64 autodiff engine, a ranking regression loss over
fixed half-integer age thresholds, a multi-scale attentional residual
backbone, a demographic attribute guidance head, synthetic face-proxy data,
and a deterministic training loop with best-validation checkpointing.
"""

from .tensor import Tensor, backward, no_grad
from .ops import affine, conv1d, conv2d, global_avg_pool, maxpool2d, softmax_xent
from .optim import Adam
from .gradcheck import gradcheck
from .ranking import (IntervalPoints, LossKind, RankingLabel, decode_age,
                      ecr_loss, ecr_minimizer_oracle, encode_ranking_label, mae,
                      make_interval_points)
from .network import NetworkConfig, PRESETS, attention_kernel_rule, build_backbone
from .attributes import SCHEMAS, AttributeLabels, AttributeSchema, age_group_bin
from .model import AgeModel
from .data import SyntheticSpec, load_manifest, read_image, split_811, synth_generate, write_image
from .trainer import TrainConfig, evaluate_model, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"
