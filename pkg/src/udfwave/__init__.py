"""udfwave: compact unsigned-distance-field shape representation.

A learnable multi-scale wavelet transform over truncated UDF volumes,
optimized to preserve the zero-level set, with a diffusion generator over
coarse coefficient volumes, open-surface-capable mesh extraction, and the
standard set-level generation metrics.
"""
from . import errors
from .errors import (
    CountMismatch,
    DegenerateGeometry,
    EmptyLevelSet,
    FormatError,
    InvalidParameter,
    IoError,
    NumericError,
    ParseError,
    ShapeMismatch,
    UdfwaveError,
)
from .geometry import (
    DistanceAccelerator,
    PointCloud,
    TriangleMesh,
    load_mesh,
    normalize_to_unit_cube,
    sample_surface,
    save_obj,
    unsigned_distance,
)
from .volume import (
    UdfVolume,
    WeightMask,
    grid_geometry,
    read_volume,
    sample_udf,
    weight_mask,
    write_volume,
)
from .wavelet import (
    FilterBank,
    WaveletPyramid,
    decompose,
    invert,
    load_bank,
    loss_gradient,
    optimize_filters,
    preset_bank,
    read_pyramid,
    recon_loss,
    resolve_bank,
    save_bank,
    write_pyramid,
)

__version__ = "0.1.0"
