from .bank import (
    FILTER_NAMES,
    PRESET_NAMES,
    FilterBank,
    load_bank,
    preset_bank,
    resolve_bank,
    save_bank,
)
from .transform import (
    WaveletPyramid,
    band_length,
    decompose,
    decompose_array,
    invert,
    invert_array,
    read_pyramid,
    write_pyramid,
)
from .optimize import loss_gradient, optimize_filters, recon_loss

__all__ = [
    "FilterBank",
    "FILTER_NAMES",
    "PRESET_NAMES",
    "WaveletPyramid",
    "band_length",
    "preset_bank",
    "resolve_bank",
    "save_bank",
    "load_bank",
    "decompose",
    "decompose_array",
    "invert",
    "invert_array",
    "write_pyramid",
    "read_pyramid",
    "recon_loss",
    "loss_gradient",
    "optimize_filters",
]
