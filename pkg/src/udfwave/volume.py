"""Dense truncated UDF voxel grids, the near-surface weight mask, and file IO.

Grid convention: values are sampled at voxel centers; the flat array is
x-fastest. A volume of resolution n spans the unit cube [-0.5, 0.5]^3 with
spacing 1/(n-1), so spacing*(n-1) covers the normalized shape domain and the
origin is the center of voxel (0, 0, 0).
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidParameter, IoError, ShapeMismatch
from .geometry import DistanceAccelerator, TriangleMesh
from .validation import check_positive

DEFAULT_TRUNCATION = 0.1
DEFAULT_GAMMA = 0.05
DEFAULT_FAR_WEIGHT = 0.01

_MAGIC = b"UDFV"
_VERSION = 1


class UdfVolume:
    """Truncated unsigned distance grid with physical extent metadata."""

    __slots__ = ("resolution", "origin", "spacing", "truncation", "values")

    def __init__(self, resolution, origin, spacing, truncation, values):
        nx, ny, nz = (int(r) for r in resolution)
        if min(nx, ny, nz) < 1:
            raise InvalidParameter(f"resolution must be positive, got {resolution}")
        self.resolution = (nx, ny, nz)
        self.origin = tuple(float(c) for c in origin)
        self.spacing = check_positive("spacing", spacing)
        self.truncation = check_positive("truncation", truncation)
        v = np.ascontiguousarray(np.asarray(values, dtype=np.float64).reshape(-1))
        if v.size != nx * ny * nz:
            raise ShapeMismatch(
                f"values length {v.size} != {nx}*{ny}*{nz}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidParameter("volume contains non-finite values")
        if v.size and (v.min() < 0.0 or v.max() > self.truncation):
            raise InvalidParameter(
                f"values must lie in [0, truncation={self.truncation}], "
                f"got [{v.min()}, {v.max()}]"
            )
        self.values = v

    def as_array(self) -> np.ndarray:
        """Values as an (nx, ny, nz) array indexed [x, y, z]."""
        return self.values.reshape(self.resolution, order="F")

    def voxel_centers(self) -> np.ndarray:
        """(nx*ny*nz, 3) center positions in flat (x-fastest) order."""
        nx, ny, nz = self.resolution
        ax = self.origin[0] + self.spacing * np.arange(nx)
        ay = self.origin[1] + self.spacing * np.arange(ny)
        az = self.origin[2] + self.spacing * np.arange(nz)
        gx, gy, gz = np.meshgrid(ax, ay, az, indexing="ij")
        return np.stack(
            [gx.ravel(order="F"), gy.ravel(order="F"), gz.ravel(order="F")], axis=1
        )

    def with_values(self, values) -> "UdfVolume":
        return UdfVolume(self.resolution, self.origin, self.spacing, self.truncation, values)

    def __repr__(self):
        nx, ny, nz = self.resolution
        return f"UdfVolume({nx}x{ny}x{nz}, truncation={self.truncation})"


class WeightMask:
    """Per-voxel weights: 1 on the near-surface band, far_weight elsewhere."""

    __slots__ = ("resolution", "weights", "gamma", "far_weight")

    def __init__(self, resolution, weights, gamma, far_weight):
        self.resolution = tuple(int(r) for r in resolution)
        w = np.ascontiguousarray(np.asarray(weights, dtype=np.float64).reshape(-1))
        n = self.resolution[0] * self.resolution[1] * self.resolution[2]
        if w.size != n:
            raise ShapeMismatch(f"weights length {w.size} != {n}")
        if w.size and (w.min() < 0.0 or w.max() > 1.0):
            raise InvalidParameter("weights must lie in [0, 1]")
        self.weights = w
        self.gamma = float(gamma)
        self.far_weight = float(far_weight)

    def as_array(self) -> np.ndarray:
        return self.weights.reshape(self.resolution, order="F")


def grid_geometry(resolution: int):
    """(origin, spacing) of the canonical unit-cube grid at a given resolution."""
    n = int(resolution)
    spacing = 1.0 / (n - 1)
    return (-0.5, -0.5, -0.5), spacing


def sample_udf(
    mesh: TriangleMesh,
    resolution: int,
    truncation: float = DEFAULT_TRUNCATION,
    accel: DistanceAccelerator | None = None,
) -> UdfVolume:
    """Sample exact voxel-center distances, clamped to [0, truncation].

    The mesh is expected in normalized space ([-0.5, 0.5]^3). Values are
    rounded to float32 precision so that volume files round-trip bit-exactly;
    truncation is snapped to a float32-representable value for the same reason.
    """
    resolution = int(resolution)
    if resolution < 8:
        raise InvalidParameter(f"resolution must be >= 8, got {resolution}")
    truncation = float(np.float32(check_positive("truncation", truncation)))
    if accel is None:
        accel = DistanceAccelerator(mesh)
    origin, spacing = grid_geometry(resolution)
    shell = UdfVolume(
        (resolution,) * 3, origin, spacing, truncation,
        np.zeros(resolution**3),
    )
    dist = accel.distances(shell.voxel_centers())
    values = np.minimum(dist, truncation).astype(np.float32).astype(np.float64)
    np.minimum(values, truncation, out=values)
    return shell.with_values(values)


def weight_mask(
    udf: UdfVolume,
    gamma: float = DEFAULT_GAMMA,
    far_weight: float = DEFAULT_FAR_WEIGHT,
) -> WeightMask:
    """Weight 1 where the UDF is within gamma of the surface, far_weight beyond."""
    gamma = check_positive("gamma", gamma)
    if gamma > udf.truncation:
        raise InvalidParameter(
            f"gamma={gamma} exceeds volume truncation {udf.truncation}"
        )
    far_weight = float(far_weight)
    if not 0.0 <= far_weight < 1.0:
        raise InvalidParameter(f"far_weight must lie in [0, 1), got {far_weight}")
    w = np.where(udf.values <= gamma, 1.0, far_weight)
    return WeightMask(udf.resolution, w, gamma, far_weight)


def write_volume(udf: UdfVolume, path) -> None:
    """Write the UDFV container (little-endian, float32 payload)."""
    nx, ny, nz = udf.resolution
    header = _MAGIC + struct.pack(
        "<IIII3ddd", _VERSION, nx, ny, nz, *udf.origin, udf.spacing, udf.truncation
    )
    payload = udf.values.astype("<f4").tobytes()
    try:
        Path(path).write_bytes(header + payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_volume(path) -> UdfVolume:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    head = struct.calcsize("<IIII3ddd") + 4
    if len(data) < head:
        raise FormatError(f"{path}: truncated header")
    if data[:4] != _MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    version, nx, ny, nz, ox, oy, oz, spacing, trunc = struct.unpack_from(
        "<IIII3ddd", data, 4
    )
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expect = head + 4 * nx * ny * nz
    if len(data) != expect:
        raise FormatError(
            f"{path}: payload length {len(data) - head} != {expect - head}"
        )
    values = np.frombuffer(data, dtype="<f4", offset=head).astype(np.float64)
    return UdfVolume((nx, ny, nz), (ox, oy, oz), spacing, trunc, values)
