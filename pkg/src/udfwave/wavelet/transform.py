"""Separable multi-scale 3-D wavelet decomposition and inversion.

One level along one axis, for a tap vector f of (common, even) length L and
an input length n:

    band[i] = sum_k f[k] * ext[2*i + 1 + k - (L-1)],   i in [0, m),
    m = (n + L - 1) // 2,

where ext is the half-sample symmetric extension of the signal (indices fold
with period 2n). Synthesis is the transposed correlation of each band,
cropped at offset L-2 to the recorded input length. The subband chain is
expansive: sizes follow the documented ceil rule m = (n + L - 1) // 2, which
keeps boundary information so that preset banks reconstruct exactly.

A level produces 8 subbands labeled by a low/high bit per axis (axis order
x, y, z); the LLL band cascades to the next level. The pyramid keeps the
coarse LLL band at the last level plus the 7 level-J detail channels ordered
by bits b_x*4 + b_y*2 + b_z (1..7). Detail bands of earlier levels are
discarded - that is the single lossy step - unless the diagnostic
keep_finer_details mode retains them.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, InvalidParameter, IoError, ShapeMismatch
from ..volume import UdfVolume
from .bank import FilterBank

_MAGIC = b"UDFP"
_VERSION = 1

CHANNEL_BITS = [(b >> 2 & 1, b >> 1 & 1, b & 1) for b in range(8)]


def band_length(n: int, length: int) -> int:
    return (n + length - 1) // 2


def _fold_indices(e: np.ndarray, n: int) -> np.ndarray:
    r = np.mod(e, 2 * n)
    return np.minimum(r, 2 * n - 1 - r)


def analysis_indices(n: int, length: int) -> np.ndarray:
    """(L, m) map from (tap, output) to the folded source index."""
    m = band_length(n, length)
    k = np.arange(length)[:, None]
    i = np.arange(m)[None, :]
    return _fold_indices(2 * i + 1 + k - (length - 1), n)


def analysis_matrix(taps: np.ndarray, n: int) -> np.ndarray:
    length = taps.size
    idx = analysis_indices(n, length)
    m = idx.shape[1]
    A = np.zeros((m, n))
    rows = np.broadcast_to(np.arange(m), (length, m))
    np.add.at(A, (rows, idx), np.broadcast_to(taps[:, None], (length, m)))
    return A


def synthesis_placement(m: int, length: int, n_out: int):
    """(L, m) output positions of the transposed correlation and their validity."""
    k = np.arange(length)[:, None]
    i = np.arange(m)[None, :]
    j = 2 * i + k - (length - 2)
    valid = (j >= 0) & (j < n_out)
    return j, valid


def synthesis_matrix(taps: np.ndarray, m: int, n_out: int) -> np.ndarray:
    length = taps.size
    j, valid = synthesis_placement(m, length, n_out)
    cols = np.broadcast_to(np.arange(m), (length, m))
    t = np.broadcast_to(taps[:, None], (length, m))
    S = np.zeros((n_out, m))
    np.add.at(S, (j[valid], cols[valid]), t[valid])
    return S


def apply_along(M: np.ndarray, x: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(x, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    y = M @ flat
    return np.moveaxis(y.reshape((M.shape[0],) + moved.shape[1:]), 0, axis)


class PyramidSpec:
    """Shape/geometry metadata needed to rebuild a pyramid from raw bands."""

    __slots__ = ("levels", "source_resolution", "level_sizes", "filter_length",
                 "origin", "spacing", "truncation")

    def __init__(self, levels, source_resolution, level_sizes, filter_length,
                 origin, spacing, truncation):
        self.levels = int(levels)
        self.source_resolution = tuple(int(v) for v in source_resolution)
        self.level_sizes = tuple(tuple(int(v) for v in s) for s in level_sizes)
        self.filter_length = int(filter_length)
        self.origin = tuple(float(v) for v in origin)
        self.spacing = float(spacing)
        self.truncation = float(truncation)

    @property
    def coarse_shape(self):
        return tuple(band_length(n, self.filter_length)
                     for n in self.level_sizes[-1])

    def build(self, coarse, fine) -> "WaveletPyramid":
        return WaveletPyramid(
            coarse, fine, self.levels, self.source_resolution, self.level_sizes,
            self.filter_length, self.origin, self.spacing, self.truncation,
        )


class WaveletPyramid:
    """Coarse LLL volume plus the 7 detail channels at the coarsest level."""

    __slots__ = ("coarse", "fine", "levels", "source_resolution", "level_sizes",
                 "filter_length", "origin", "spacing", "truncation", "retained")

    def __init__(self, coarse, fine, levels, source_resolution, level_sizes,
                 filter_length, origin, spacing, truncation, retained=None):
        coarse = np.asarray(coarse, dtype=np.float64)
        fine = np.asarray(fine, dtype=np.float64)
        if coarse.ndim != 3:
            raise ShapeMismatch(f"coarse must be 3-d, got {coarse.ndim}-d")
        if fine.shape != (7,) + coarse.shape:
            raise ShapeMismatch(
                f"fine must be (7,)+{coarse.shape}, got {fine.shape}"
            )
        self.coarse = coarse
        self.fine = fine
        self.levels = int(levels)
        self.source_resolution = tuple(int(v) for v in source_resolution)
        self.level_sizes = tuple(tuple(int(v) for v in s) for s in level_sizes)
        if len(self.level_sizes) != self.levels:
            raise ShapeMismatch("level_sizes must record one entry per level")
        self.filter_length = int(filter_length)
        self.origin = tuple(float(v) for v in origin)
        self.spacing = float(spacing)
        self.truncation = float(truncation)
        self.retained = retained

    def coefficient_count(self) -> int:
        return self.coarse.size + self.fine.size

    @property
    def spec(self) -> PyramidSpec:
        return PyramidSpec(self.levels, self.source_resolution, self.level_sizes,
                           self.filter_length, self.origin, self.spacing,
                           self.truncation)

    def __repr__(self):
        return (f"WaveletPyramid(levels={self.levels}, coarse={self.coarse.shape}, "
                f"source={self.source_resolution})")


def _level_plan(resolution, length, levels):
    """Per-level input sizes for the LLL cascade."""
    sizes = [tuple(resolution)]
    cur = tuple(resolution)
    for _ in range(levels - 1):
        cur = tuple(band_length(n, length) for n in cur)
        sizes.append(cur)
    return sizes


def _analysis_level(arr, a_lo, a_hi, full: bool):
    """One level of separable analysis; returns dict bit-tuple -> band."""
    bands = {(): arr}
    for axis in range(3):
        nxt = {}
        for key, val in bands.items():
            n = val.shape[axis]
            nxt[key + (0,)] = apply_along(analysis_matrix(a_lo, n), val, axis)
            if full:
                nxt[key + (1,)] = apply_along(analysis_matrix(a_hi, n), val, axis)
        bands = nxt
    return bands


def _synthesis_level(bands, s_lo, s_hi, target):
    """Inverse of one analysis level; bands maps bit-tuples to arrays."""
    for axis in (2, 1, 0):
        nxt = {}
        keys = {key[:axis] for key in bands}
        for key in sorted(keys):
            low = bands.get(key + (0,))
            high = bands.get(key + (1,))
            base = low if low is not None else high
            m = base.shape[axis]
            n_out = target[axis]
            acc = None
            if low is not None:
                acc = apply_along(synthesis_matrix(s_lo, m, n_out), low, axis)
            if high is not None:
                part = apply_along(synthesis_matrix(s_hi, m, n_out), high, axis)
                acc = part if acc is None else acc + part
            nxt[key] = acc
        bands = nxt
    return bands[()]


def decompose_array(arr, bank: FilterBank, levels: int, keep_finer_details=False):
    """Decompose a raw (nx, ny, nz) array; returns (coarse, fine, sizes, retained)."""
    levels = int(levels)
    if levels < 1:
        raise InvalidParameter(f"levels must be >= 1, got {levels}")
    for n in arr.shape:
        if n < 2 ** levels:
            raise InvalidParameter(
                f"dimension {n} too small for {levels} levels (need >= {2 ** levels})"
            )
    a_lo, a_hi = bank.analysis_low, bank.analysis_high
    sizes = _level_plan(arr.shape, bank.length, levels)
    retained = [] if keep_finer_details else None
    cur = np.asarray(arr, dtype=np.float64)
    fine = None
    for level in range(levels):
        last = level == levels - 1
        bands = _analysis_level(cur, a_lo, a_hi, full=last or keep_finer_details)
        cur = bands[(0, 0, 0)]
        details = None
        if last or keep_finer_details:
            details = np.stack([bands[CHANNEL_BITS[ch]] for ch in range(1, 8)])
        if last:
            fine = details
        elif keep_finer_details:
            retained.append(details)
    return cur, fine, sizes, retained


def decompose(udf: UdfVolume, bank: FilterBank, levels: int = 3,
              keep_finer_details: bool = False) -> WaveletPyramid:
    """Multi-scale decomposition of a UDF volume (deterministic, linear)."""
    coarse, fine, sizes, retained = decompose_array(
        udf.as_array(), bank, levels, keep_finer_details
    )
    return WaveletPyramid(
        coarse, fine, levels, udf.resolution, sizes, bank.length,
        udf.origin, udf.spacing, udf.truncation, retained=retained,
    )


def invert_array(pyr: WaveletPyramid, bank: FilterBank) -> np.ndarray:
    """Raw reconstruction (no clamping); missing finer details count as zero."""
    if bank.length != pyr.filter_length:
        raise ShapeMismatch(
            f"bank length {bank.length} != pyramid filter length {pyr.filter_length}"
        )
    expect = tuple(band_length(n, bank.length) for n in pyr.level_sizes[-1])
    if pyr.coarse.shape != expect:
        raise ShapeMismatch(
            f"coarse shape {pyr.coarse.shape} inconsistent with level plan {expect}"
        )
    s_lo, s_hi = bank.synthesis_low, bank.synthesis_high
    cur = pyr.coarse
    for level in range(pyr.levels - 1, -1, -1):
        bands = {(0, 0, 0): cur}
        details = None
        if level == pyr.levels - 1:
            details = pyr.fine
        elif pyr.retained is not None:
            details = pyr.retained[level]
        if details is not None:
            for ch in range(1, 8):
                bands[CHANNEL_BITS[ch]] = details[ch - 1]
        cur = _synthesis_level(bands, s_lo, s_hi, pyr.level_sizes[level])
    return cur


def invert(pyr: WaveletPyramid, bank: FilterBank) -> UdfVolume:
    """Reconstruct a UDF volume; values are clamped to [0, truncation] last."""
    arr = invert_array(pyr, bank)
    clamped = np.clip(arr, 0.0, pyr.truncation)
    return UdfVolume(
        pyr.source_resolution, pyr.origin, pyr.spacing, pyr.truncation,
        clamped.ravel(order="F"),
    )


def write_pyramid(pyr: WaveletPyramid, path) -> None:
    """Write the UDFP container (little-endian, float64 payload)."""
    header = _MAGIC + struct.pack(
        "<III", _VERSION, pyr.levels, pyr.filter_length
    )
    header += struct.pack("<3I", *pyr.source_resolution)
    header += struct.pack("<3ddd", *pyr.origin, pyr.spacing, pyr.truncation)
    for size in pyr.level_sizes:
        header += struct.pack("<3I", *size)
    header += struct.pack("<3I", *pyr.coarse.shape)
    payload = pyr.coarse.astype("<f8").tobytes() + pyr.fine.astype("<f8").tobytes()
    try:
        Path(path).write_bytes(header + payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_pyramid(path) -> WaveletPyramid:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if data[:4] != _MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    off = 4
    try:
        version, levels, filter_length = struct.unpack_from("<III", data, off)
        off += 12
        if version != _VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        source = struct.unpack_from("<3I", data, off)
        off += 12
        ox, oy, oz, spacing, trunc = struct.unpack_from("<3ddd", data, off)
        off += 40
        sizes = []
        for _ in range(levels):
            sizes.append(struct.unpack_from("<3I", data, off))
            off += 12
        cdims = struct.unpack_from("<3I", data, off)
        off += 12
    except struct.error as exc:
        raise FormatError(f"{path}: truncated header") from exc
    n = cdims[0] * cdims[1] * cdims[2]
    expect = off + 8 * n * 8
    if len(data) != expect:
        raise FormatError(f"{path}: payload length {len(data) - off} != {expect - off}")
    coarse = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(cdims)
    fine = np.frombuffer(data, dtype="<f8", count=7 * n, offset=off + 8 * n)
    fine = fine.reshape((7,) + tuple(cdims))
    return WaveletPyramid(
        coarse.copy(), fine.copy(), levels, source, sizes, filter_length,
        (ox, oy, oz), spacing, trunc,
    )
