from .checkpoint import Checkpoint, load_checkpoint, load_model_state, model_state, save_checkpoint
from .loop import Trainer, train
from .optim import AdamW, clip_grad_norm, global_grad_norm
from .schedule import Schedule, lr_at

__all__ = [
    "AdamW",
    "Checkpoint",
    "Schedule",
    "Trainer",
    "clip_grad_norm",
    "global_grad_norm",
    "load_checkpoint",
    "load_model_state",
    "lr_at",
    "model_state",
    "save_checkpoint",
    "train",
]
