"""Training side of the bi-prediction blending network."""

from .formats import PatchSet, read_patch_file, read_weight_file, write_weight_file
from .loss import satd_loss
from .network import BlendNet
from .train import TrainConfig, train

__version__ = "0.1.0"

__all__ = ["BlendNet", "PatchSet", "TrainConfig", "read_patch_file",
           "read_weight_file", "satd_loss", "train", "write_weight_file"]
