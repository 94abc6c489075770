from . import tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import finite_diff_check
from .layers import GRUCell, LayerNormParams, Linear, gru_step, linear_forward, orthogonal_init
from .optim import OptimizerState, adam_step, clip_grad_norm, linear_schedule
from .params import GradStore, ParamStore
from .tensor import DTYPE, ShapeError, Tensor, layer_norm, no_grad

__all__ = [
    "tensor", "Tensor", "DTYPE", "ShapeError", "no_grad", "layer_norm",
    "ParamStore", "GradStore", "Linear", "GRUCell", "LayerNormParams",
    "gru_step", "linear_forward", "orthogonal_init",
    "OptimizerState", "adam_step", "clip_grad_norm", "linear_schedule",
    "finite_diff_check", "save_checkpoint", "load_checkpoint",
]
