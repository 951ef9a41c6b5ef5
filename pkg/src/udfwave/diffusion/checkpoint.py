"""Versioned binary model checkpoint (magic UDFM): denoiser and fine
predictor parameters (float32), schedule constants, normalization scalars and
the pyramid geometry needed for generation."""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError, InvalidParameter, IoError
from ..wavelet.transform import PyramidSpec
from .denoiser import ResidualMlpDenoiser
from .fine import LinearStencilPredictor, MlpFinePredictor
from .schedule import DiffusionSchedule, make_schedule

_MAGIC = b"UDFM"
_VERSION = 1


class GeneratorBundle:
    """Everything needed to run generate_udf except the filter bank."""

    __slots__ = ("denoiser", "fine", "schedule", "spec", "mean", "std")

    def __init__(self, denoiser, fine, schedule, spec, mean, std):
        self.denoiser = denoiser
        self.fine = fine
        self.schedule = schedule
        self.spec = spec
        self.mean = float(mean)
        self.std = float(std)

    @property
    def normalization(self):
        return (self.mean, self.std)


def _pack_dims(dims):
    return struct.pack("<B", len(dims)) + struct.pack(f"<{len(dims)}I", *dims)


def _unpack_dims(data, off):
    (nd,) = struct.unpack_from("<B", data, off)
    off += 1
    dims = struct.unpack_from(f"<{nd}I", data, off)
    return tuple(dims), off + 4 * nd


def _pack_params(params):
    out = struct.pack("<I", len(params))
    for name in sorted(params):
        arr = params[name]
        enc = name.encode("utf-8")
        out += struct.pack("<H", len(enc)) + enc
        out += _pack_dims(arr.shape)
        out += arr.astype("<f4").tobytes()
    return out


def _unpack_params(data, off):
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    params = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off:off + nlen].decode("utf-8")
        off += nlen
        dims, off = _unpack_dims(data, off)
        n = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=off)
        off += 4 * n
        params[name] = arr.astype(np.float64).reshape(dims)
    return params, off


def write_checkpoint(path, bundle: GeneratorBundle) -> None:
    sched = bundle.schedule
    spec = bundle.spec
    blob = _MAGIC + struct.pack("<I", _VERSION)
    blob += struct.pack("<Idd", sched.T, sched.beta_start, sched.beta_end)
    blob += struct.pack("<dd", bundle.mean, bundle.std)
    den = bundle.denoiser
    blob += struct.pack("<I", den.cond_dim)
    blob += struct.pack("<II", spec.levels, spec.filter_length)
    blob += struct.pack("<3I", *spec.source_resolution)
    for size in spec.level_sizes:
        blob += struct.pack("<3I", *size)
    blob += struct.pack("<3ddd", *spec.origin, spec.spacing, spec.truncation)

    if not isinstance(den, ResidualMlpDenoiser):
        raise InvalidParameter(
            f"only the built-in denoiser is serializable, got {type(den).__name__}"
        )
    blob += struct.pack("<B", 1)
    blob += _pack_dims(den.shape)
    blob += struct.pack("<III", den.hidden, den.blocks, den.t_dim)
    blob += _pack_params(den.params)

    fine = bundle.fine
    if fine is None:
        blob += struct.pack("<B", 0)
    elif isinstance(fine, LinearStencilPredictor):
        if fine.weights is None:
            raise InvalidParameter("cannot serialize an unfitted stencil predictor")
        blob += struct.pack("<B", 1)
        blob += struct.pack("<Id", fine.radius, fine.ridge)
        blob += _pack_dims(fine.weights.shape)
        blob += fine.weights.astype("<f4").tobytes()
    elif isinstance(fine, MlpFinePredictor):
        blob += struct.pack("<B", 2)
        blob += _pack_dims(fine.coarse_shape)
        blob += struct.pack("<II", fine.hidden, fine.blocks)
        blob += _pack_params(fine.params)
    else:
        raise InvalidParameter(f"unsupported fine predictor {type(fine).__name__}")
    try:
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_checkpoint(path) -> GeneratorBundle:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if data[:4] != _MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    try:
        (version,) = struct.unpack_from("<I", data, 4)
        if version != _VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        off = 8
        T, beta_start, beta_end = struct.unpack_from("<Idd", data, off)
        off += 20
        mean, std = struct.unpack_from("<dd", data, off)
        off += 16
        (cond_dim,) = struct.unpack_from("<I", data, off)
        off += 4
        levels, filter_length = struct.unpack_from("<II", data, off)
        off += 8
        source = struct.unpack_from("<3I", data, off)
        off += 12
        sizes = []
        for _ in range(levels):
            sizes.append(struct.unpack_from("<3I", data, off))
            off += 12
        ox, oy, oz, spacing, trunc = struct.unpack_from("<3ddd", data, off)
        off += 40
        spec = PyramidSpec(levels, source, sizes, filter_length,
                           (ox, oy, oz), spacing, trunc)
        sched = make_schedule(T, beta_start, beta_end)

        (arch,) = struct.unpack_from("<B", data, off)
        off += 1
        if arch != 1:
            raise FormatError(f"{path}: unknown denoiser arch {arch}")
        shape, off = _unpack_dims(data, off)
        hidden, blocks, t_dim = struct.unpack_from("<III", data, off)
        off += 12
        params, off = _unpack_params(data, off)
        den = ResidualMlpDenoiser(shape, sched, cond_dim, hidden, blocks, t_dim)
        if sorted(params) != sorted(den.params):
            raise FormatError(f"{path}: denoiser parameter set mismatch")
        den.params = params

        (farch,) = struct.unpack_from("<B", data, off)
        off += 1
        if farch == 0:
            fine = None
        elif farch == 1:
            radius, ridge = struct.unpack_from("<Id", data, off)
            off += 12
            wdims, off = _unpack_dims(data, off)
            n = int(np.prod(wdims))
            w = np.frombuffer(data, dtype="<f4", count=n, offset=off)
            off += 4 * n
            fine = LinearStencilPredictor(radius, ridge)
            fine.weights = w.astype(np.float64).reshape(wdims)
        elif farch == 2:
            cshape, off = _unpack_dims(data, off)
            hidden, blocks = struct.unpack_from("<II", data, off)
            off += 8
            params, off = _unpack_params(data, off)
            fine = MlpFinePredictor(cshape, hidden, blocks)
            if sorted(params) != sorted(fine.params):
                raise FormatError(f"{path}: fine parameter set mismatch")
            fine.params = params
        else:
            raise FormatError(f"{path}: unknown fine predictor arch {farch}")
        if off != len(data):
            raise FormatError(f"{path}: {len(data) - off} trailing bytes")
    except struct.error as exc:
        raise FormatError(f"{path}: truncated checkpoint") from exc
    return GeneratorBundle(den, fine, sched, spec, mean, std)
