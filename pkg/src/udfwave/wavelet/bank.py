"""Two-channel filter banks with independently learnable analysis/synthesis taps.

Canonical form: all four tap vectors share one even length L, aligned so that
every filter's center offset sits at the same index. The transform anchors on
that frame, so banks with arbitrary per-filter offsets are first re-aligned.

Preset high-pass filters follow the alternating-flip rule
    analysis_high[k]  = (-1)^k * synthesis_low[L-1-k]
    synthesis_high[k] = (-1)^k * analysis_low[L-1-k]
which, together with the transform's extension and crop conventions, gives
perfect reconstruction for every preset (see tests).
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import FormatError, InvalidParameter, IoError

FILTER_NAMES = ("analysis_low", "analysis_high", "synthesis_low", "synthesis_high")

_SQ2 = np.sqrt(2.0)

# Exact rational-times-sqrt2 taps for the spline 3/3 pair.
_B33_DEC = np.array([3, -9, -7, 45, 45, -7, -9, 3], dtype=np.float64) * _SQ2 / 64.0
_B33_REC = np.array([1, 3, 3, 1], dtype=np.float64) * _SQ2 / 8.0

# 17/11 "less dissimilar lengths" pair, halfband product filter of order 7
# factored so the synthesis factor takes the root pair -0.124643 +- 0.283191j.
_B68_DEC = np.array([
    0.00190883173648502615, -0.00191428612908088634, -0.0169906398676070994,
    0.0119345652797267314, 0.0497329034909376536, -0.0772631731672113421,
    -0.0940592034957616298, 0.420796284609839259, 0.825922997458439623,
    0.420796284609839259, -0.0940592034957616298, -0.0772631731672113421,
    0.0497329034909376536, 0.0119345652797267314, -0.0169906398676070994,
    -0.00191428612908088634, 0.00190883173648502615,
])
_B68_REC = np.array([
    0.0144262825056222475, 0.0144675048967740988, -0.0787220010626687169,
    -0.0403679790303819037, 0.417849109150320232, 0.758907729453763134,
    0.417849109150320232, -0.0403679790303819037, -0.0787220010626687169,
    0.0144675048967740988, 0.0144262825056222475,
])

PRESET_NAMES = ("haar", "bior3.3", "bior6.8")


class FilterBank:
    """Four tap vectors (analysis low/high, synthesis low/high) plus offsets."""

    __slots__ = ("analysis_low", "analysis_high", "synthesis_low",
                 "synthesis_high", "centers", "name")

    def __init__(self, analysis_low, analysis_high, synthesis_low,
                 synthesis_high, centers=None, name="custom"):
        raw = [np.asarray(f, dtype=np.float64).reshape(-1)
               for f in (analysis_low, analysis_high, synthesis_low, synthesis_high)]
        for label, taps in zip(FILTER_NAMES, raw):
            if taps.size < 2:
                raise InvalidParameter(f"{label} must have >= 2 taps")
            if not np.all(np.isfinite(taps)):
                raise InvalidParameter(f"{label} contains non-finite taps")
        if centers is None:
            centers = [_default_center(t.size) for t in raw]
        centers = [int(c) for c in centers]
        if len(centers) != 4:
            raise InvalidParameter("centers must list one offset per filter")
        aligned, center = _align(raw, centers)
        self.analysis_low, self.analysis_high = aligned[0], aligned[1]
        self.synthesis_low, self.synthesis_high = aligned[2], aligned[3]
        self.centers = (center, center, center, center)
        self.name = str(name)

    @property
    def length(self) -> int:
        return self.analysis_low.size

    def filters(self):
        return (self.analysis_low, self.analysis_high,
                self.synthesis_low, self.synthesis_high)

    def copy(self, name=None) -> "FilterBank":
        return FilterBank(*[f.copy() for f in self.filters()],
                          centers=self.centers,
                          name=self.name if name is None else name)

    def __repr__(self):
        return f"FilterBank(name={self.name!r}, length={self.length})"


def _default_center(length: int) -> int:
    # odd (whole-sample symmetric): middle tap; even (half-sample): left of pair
    return (length - 1) // 2


def _align(raw, centers):
    """Pad the four filters to a common even length with aligned centers."""
    left = max(c for c in centers)
    right = max(t.size - 1 - c for t, c in zip(raw, centers))
    length = left + right + 1
    if length % 2:
        right += 1
        length += 1
    out = []
    for taps, c in zip(raw, centers):
        arr = np.zeros(length)
        arr[left - c: left - c + taps.size] = taps
        out.append(arr)
    return out, left


def _alt_flip(taps: np.ndarray) -> np.ndarray:
    signs = np.where(np.arange(taps.size) % 2 == 0, 1.0, -1.0)
    return signs * taps[::-1]


def _from_lowpass(dec_lo, rec_lo, name) -> FilterBank:
    (a_lo, s_lo), center = _align(
        [np.asarray(dec_lo, dtype=np.float64), np.asarray(rec_lo, dtype=np.float64)],
        [_default_center(len(dec_lo)), _default_center(len(rec_lo))],
    )
    a_hi = _alt_flip(s_lo)
    s_hi = _alt_flip(a_lo)
    return FilterBank(a_lo, a_hi, s_lo, s_hi,
                      centers=(center,) * 4, name=name)


def preset_bank(name: str) -> FilterBank:
    """Built-in perfect-reconstruction banks: haar, bior3.3, bior6.8."""
    key = name.lower()
    if key == "haar":
        lo = np.array([1.0, 1.0]) / _SQ2
        return _from_lowpass(lo, lo, "haar")
    if key in ("bior3.3", "bior33"):
        return _from_lowpass(_B33_DEC, _B33_REC, "bior3.3")
    if key in ("bior6.8", "bior68"):
        return _from_lowpass(_B68_DEC, _B68_REC, "bior6.8")
    raise InvalidParameter(
        f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
    )


def resolve_bank(bank) -> FilterBank:
    """Accept a FilterBank, a preset name, or a bank file path."""
    if isinstance(bank, FilterBank):
        return bank
    text = str(bank)
    if text.lower() in ("haar", "bior3.3", "bior33", "bior6.8", "bior68"):
        return preset_bank(text)
    return load_bank(text)


def save_bank(bank: FilterBank, path) -> None:
    """Write the versioned JSON interchange file (full float64 precision)."""
    doc = {
        "format": "udfwave-filter-bank",
        "version": 1,
        "name": bank.name,
        "filters": {
            label: {"taps": taps.tolist(), "center": int(center)}
            for label, taps, center in zip(FILTER_NAMES, bank.filters(), bank.centers)
        },
    }
    try:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_bank(path) -> FilterBank:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != "udfwave-filter-bank":
        raise FormatError(f"{path}: missing udfwave-filter-bank format tag")
    if doc.get("version") != 1:
        raise FormatError(f"{path}: unsupported version {doc.get('version')!r}")
    filters = doc.get("filters")
    if not isinstance(filters, dict):
        raise FormatError(f"{path}: missing filters object")
    taps = []
    centers = []
    for label in FILTER_NAMES:
        entry = filters.get(label)
        if not isinstance(entry, dict) or "taps" not in entry:
            raise FormatError(f"{path}: missing filter {label!r}")
        taps.append(np.asarray(entry["taps"], dtype=np.float64))
        centers.append(int(entry.get("center", _default_center(len(entry["taps"])))))
    try:
        return FilterBank(*taps, centers=centers, name=doc.get("name", "custom"))
    except InvalidParameter as exc:
        raise FormatError(f"{path}: {exc}") from exc
