from .schedule import DiffusionSchedule, forward_noise, make_schedule
from .denoiser import (
    ConditionEmbedding,
    Denoiser,
    GaussianOracleDenoiser,
    ResidualMlpDenoiser,
)
from .fine import FinePredictor, LinearStencilPredictor, MlpFinePredictor
from .training import generate_udf, sample, train_denoiser, train_fine_predictor
from .checkpoint import GeneratorBundle, read_checkpoint, write_checkpoint

__all__ = [
    "DiffusionSchedule",
    "make_schedule",
    "forward_noise",
    "Denoiser",
    "ResidualMlpDenoiser",
    "GaussianOracleDenoiser",
    "ConditionEmbedding",
    "FinePredictor",
    "LinearStencilPredictor",
    "MlpFinePredictor",
    "train_denoiser",
    "train_fine_predictor",
    "sample",
    "generate_udf",
    "GeneratorBundle",
    "write_checkpoint",
    "read_checkpoint",
]
