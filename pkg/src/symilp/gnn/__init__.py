from .model import (
    GnnModel,
    GraphBatch,
    bce_loss,
    concat_batches,
    forward,
    init_model,
    loss,
    loss_and_grad,
    num_params,
    param_layout,
    single_batch,
)
from .training import (
    Adam,
    Scaler,
    TrainConfig,
    TrainResult,
    TrainingSample,
    evaluate_loss,
    fit_scaler,
    predict_probs,
    sample_batch,
    train,
)

__all__ = [
    "GnnModel", "GraphBatch", "bce_loss", "concat_batches", "forward",
    "init_model", "loss", "loss_and_grad", "num_params", "param_layout",
    "single_batch", "Adam", "Scaler", "TrainConfig", "TrainResult",
    "TrainingSample", "evaluate_loss", "fit_scaler", "predict_probs",
    "sample_batch", "train",
]
