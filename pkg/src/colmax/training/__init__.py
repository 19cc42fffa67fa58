from .loss import (
    LossGradient,
    LossInput,
    info_nce_batch_loss,
    info_nce_gradient,
    info_nce_loss,
)
from .merging import MergeSpec, ParamSet, merge_models
