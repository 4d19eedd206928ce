from .ablate import AblationRow, ablate
from .checkpoint import Checkpoint
from .evaluate import evaluate, evaluate_predictions, predict
from .profile import profile
from .train import train, train_samples

__all__ = [
    "AblationRow",
    "Checkpoint",
    "ablate",
    "evaluate",
    "evaluate_predictions",
    "predict",
    "profile",
    "train",
    "train_samples",
]
