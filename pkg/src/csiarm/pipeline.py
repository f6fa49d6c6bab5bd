"""Amplitude preprocessing: subcarrier filtering, windowed tensorization
with its mode-v matrixization inverse, normalization, and balanced dataset
assembly.

Everything in this module is deterministic — no randomness anywhere.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    ALL_ACTIONS,
    ActionClass,
    BadMagic,
    CsiArmError,
    CsiRecording,
    LengthMismatch,
    N_SUBCARRIERS_80MHZ,
    TruncatedPayload,
    UnsupportedVersion,
)


class WindowTooLarge(CsiArmError):
    """Requested window exceeds the number of available packets."""


class NotInvertible(CsiArmError):
    """Tensor was built with overlapping windows; matrixization undefined."""


class UnlabeledRecording(CsiArmError):
    """A recording without a label cannot enter a supervised dataset."""


class EmptyClass(CsiArmError):
    """A requested class contributed zero samples."""


# --- subcarrier selection ----------------------------------------------------
#
# 802.11ac 80 MHz tone map, tone indices -128 ... 127 (array position =
# tone + 128): edge guards and the DC region carry nothing (14 tones), and
# 8 tones are pilots.  The remaining 234 carry data.

_GUARD_TONES = tuple(range(-128, -122)) + tuple(range(123, 128))  # 6 + 5
_DC_TONES = (-1, 0, 1)
_PILOT_TONES = (-103, -75, -39, -11, 11, 39, 75, 103)

REMOVED_TONES = tuple(sorted(_GUARD_TONES + _DC_TONES + _PILOT_TONES))
REMOVED_POSITIONS = np.array([t + 128 for t in REMOVED_TONES], dtype=np.intp)
KEPT_POSITIONS = np.array(
    [p for p in range(N_SUBCARRIERS_80MHZ) if p not in set(REMOVED_POSITIONS)],
    dtype=np.intp,
)
N_RETAINED = len(KEPT_POSITIONS)  # 234


def filter_subcarriers(row: np.ndarray) -> np.ndarray:
    """Drop guard, DC and pilot subcarriers from one length-256 row,
    preserving the order of the retained tones."""
    row = np.asarray(row)
    if row.shape[-1] != N_SUBCARRIERS_80MHZ:
        raise LengthMismatch(
            f"expected {N_SUBCARRIERS_80MHZ} subcarriers, got {row.shape[-1]}"
        )
    return row[..., KEPT_POSITIONS]


# --- amplitude ---------------------------------------------------------------


@dataclass
class AmplitudeMatrix:
    """N x W real amplitude matrix with the provenance of its recording."""

    data: np.ndarray  # (N, W) float64
    label: Optional[ActionClass] = None
    scenario_id: int = 0
    los: bool = True
    sample_rate_hz: float = 30.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError("amplitude data must be 2-D")


def amplitude(rec: CsiRecording) -> AmplitudeMatrix:
    """Elementwise magnitude sqrt(re^2 + im^2) of the CSI matrix, in
    float64."""
    data = np.abs(rec.csi.astype(np.complex128))
    return AmplitudeMatrix(
        data=data,
        label=rec.label,
        scenario_id=rec.scenario_id,
        los=rec.los,
        sample_rate_hz=rec.sample_rate_hz,
    )


# --- tensorization -----------------------------------------------------------


@dataclass
class SampleTensor:
    """U x W' x V tensor whose frontal slices data[:, :, v] are the input
    samples, plus per-slice provenance."""

    data: np.ndarray  # (U, W', V)
    window: int
    stride: int
    label: Optional[ActionClass] = None
    scenario_id: int = 0
    los: bool = True

    @property
    def n_samples(self) -> int:
        return self.data.shape[2]


def tensorize(amp: AmplitudeMatrix, window: int = 300, stride: int = 300) -> SampleTensor:
    """Cut the amplitude matrix into V = floor((N - window)/stride) + 1
    windows of `window` consecutive rows; subcarrier filtering is applied
    per row before assembly.  Trailing remainder rows are dropped."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n = amp.data.shape[0]
    if window > n:
        raise WindowTooLarge(f"window {window} > {n} packets")
    filtered = filter_subcarriers(amp.data)
    v = (n - window) // stride + 1
    slices = [filtered[i * stride : i * stride + window] for i in range(v)]
    return SampleTensor(
        data=np.stack(slices, axis=-1),
        window=window,
        stride=stride,
        label=amp.label,
        scenario_id=amp.scenario_id,
        los=amp.los,
    )


def matrixize(t: SampleTensor) -> np.ndarray:
    """Mode-v matrixization: concatenate the frontal slices in v order,
    recovering the filtered source rows (minus any dropped remainder)
    bit-exactly.  Defined only for non-overlapping windows."""
    if t.stride != t.window:
        raise NotInvertible(
            f"stride {t.stride} != window {t.window}: windows overlap"
        )
    u, w, v = t.data.shape
    return t.data.transpose(2, 0, 1).reshape(v * u, w)


# --- labeled dataset ---------------------------------------------------------


@dataclass
class LabeledDataset:
    """Stack of equally shaped samples with labels and provenance."""

    X: np.ndarray  # (n, U, W')
    y: np.ndarray  # (n,) ActionClass codes
    scenario_ids: np.ndarray  # (n,)
    los: np.ndarray  # (n,) bool
    window: int
    stride: int

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.uint8)
        self.scenario_ids = np.asarray(self.scenario_ids, dtype=np.uint8)
        self.los = np.asarray(self.los, dtype=bool)
        n = len(self.X)
        if not (len(self.y) == len(self.scenario_ids) == len(self.los) == n):
            raise LengthMismatch("dataset arrays disagree on sample count")

    def __len__(self) -> int:
        return len(self.X)

    def class_counts(self) -> Dict[ActionClass, int]:
        return {a: int(np.sum(self.y == int(a))) for a in ALL_ACTIONS}

    def subset(self, indices) -> "LabeledDataset":
        idx = np.asarray(indices)
        return LabeledDataset(
            X=self.X[idx],
            y=self.y[idx],
            scenario_ids=self.scenario_ids[idx],
            los=self.los[idx],
            window=self.window,
            stride=self.stride,
        )


def assemble(
    recordings: Sequence[CsiRecording],
    window: int = 300,
    stride: int = 300,
    per_class_cap: Optional[int] = None,
    classes: Sequence[ActionClass] = tuple(ALL_ACTIONS),
    dtype=np.float32,
) -> LabeledDataset:
    """Window every recording and build an exactly class-balanced dataset.

    Per-class counts are truncated to min(smallest class count, cap);
    order is deterministic: recording list order, then window order.
    """
    per_class: Dict[ActionClass, List[Tuple[np.ndarray, int, bool]]] = {
        ActionClass(c): [] for c in classes
    }
    for rec in recordings:
        if rec.label is None:
            raise UnlabeledRecording("recording has no action label")
        tens = tensorize(amplitude(rec), window, stride)
        if rec.label in per_class:
            for v in range(tens.n_samples):
                per_class[rec.label].append(
                    (tens.data[:, :, v], rec.scenario_id, rec.los)
                )

    for action, samples in per_class.items():
        if not samples:
            raise EmptyClass(f"class {action.name} contributed zero samples")

    target = min(len(s) for s in per_class.values())
    if per_class_cap is not None:
        target = min(target, int(per_class_cap))

    xs, ys, scen, los = [], [], [], []
    for action in per_class:  # insertion order == requested class order
        for mat, sid, l in per_class[action][:target]:
            xs.append(mat.astype(dtype))
            ys.append(int(action))
            scen.append(sid)
            los.append(l)
    return LabeledDataset(
        X=np.stack(xs),
        y=np.array(ys, dtype=np.uint8),
        scenario_ids=np.array(scen, dtype=np.uint8),
        los=np.array(los, dtype=bool),
        window=window,
        stride=stride,
    )


# --- normalization -----------------------------------------------------------

NORM_MODES = ("none", "per-sample-standardize", "global-minmax")
_STD_FLOOR = 1e-8


@dataclass
class NormStats:
    """Fitted normalization parameters; apply_normalization reproduces the
    exact training-time transform at inference."""

    mode: str = "per-sample-standardize"
    minimum: float = 0.0
    maximum: float = 1.0

    def to_dict(self) -> dict:
        return {"mode": self.mode, "minimum": self.minimum, "maximum": self.maximum}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(mode=d["mode"], minimum=float(d["minimum"]), maximum=float(d["maximum"]))


def apply_normalization(X: np.ndarray, stats: NormStats) -> np.ndarray:
    """Apply a fitted transform to an (n, U, W') stack of samples."""
    if stats.mode == "none":
        return X.copy()
    if stats.mode == "per-sample-standardize":
        flat = X.reshape(len(X), -1).astype(np.float64)
        mean = flat.mean(axis=1, keepdims=True)
        std = np.maximum(flat.std(axis=1, keepdims=True), _STD_FLOOR)
        out = (flat - mean) / std
        return out.reshape(X.shape).astype(X.dtype)
    if stats.mode == "global-minmax":
        span = max(stats.maximum - stats.minimum, _STD_FLOOR)
        return ((X.astype(np.float64) - stats.minimum) / span).astype(X.dtype)
    raise ValueError(f"unknown normalization mode {stats.mode!r}")


def normalize(
    ds: LabeledDataset, mode: str = "per-sample-standardize"
) -> Tuple[LabeledDataset, NormStats]:
    """Normalize a dataset, returning the transformed copy and the fitted
    stats needed to apply the identical transform to unseen samples."""
    if mode not in NORM_MODES:
        raise ValueError(f"mode must be one of {NORM_MODES}, got {mode!r}")
    stats = NormStats(mode=mode)
    if mode == "global-minmax":
        stats.minimum = float(ds.X.min())
        stats.maximum = float(ds.X.max())
    out = LabeledDataset(
        X=apply_normalization(ds.X, stats),
        y=ds.y.copy(),
        scenario_ids=ds.scenario_ids.copy(),
        los=ds.los.copy(),
        window=ds.window,
        stride=ds.stride,
    )
    return out, stats


# --- dataset container (CSDS v1) ---------------------------------------------
#
#   offset  size  field
#   ------  ----  ------------------------------
#   0       4     magic  b"CSDS"
#   4       2     version (1), uint16 LE
#   6       1     dtype code: 0 = float32, 1 = float64
#   7       1     padding
#   8       4     n_samples    uint32 LE
#   12      4     window (U)   uint32 LE
#   16      4     width (W')   uint32 LE
#   20      4     stride       uint32 LE
#   24      8     reserved
#   32      n    y            uint8
#   32+n    n    scenario_id  uint8
#   32+2n   n    los          uint8
#   ...          X payload, row-major
# ------------------------------------------------------------------------------

CSDS_MAGIC = b"CSDS"
CSDS_VERSION = 1
_CSDS_HEADER = struct.Struct("<4sHBBIIII8x")
_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def save_dataset(path, ds: LabeledDataset) -> None:
    dtype = np.dtype(ds.X.dtype)
    code = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}.get(dtype)
    if code is None:
        raise ValueError(f"unsupported dataset dtype {dtype}")
    n, u, w = ds.X.shape
    header = _CSDS_HEADER.pack(
        CSDS_MAGIC, CSDS_VERSION, code, 0, n, u, w, ds.stride
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(ds.y.astype(np.uint8).tobytes())
        fh.write(ds.scenario_ids.astype(np.uint8).tobytes())
        fh.write(ds.los.astype(np.uint8).tobytes())
        fh.write(np.ascontiguousarray(ds.X, dtype=dtype).tobytes())


def load_dataset(path) -> LabeledDataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _CSDS_HEADER.size:
        raise TruncatedPayload(f"{len(blob)} bytes is shorter than the header")
    magic, version, code, _, n, u, w, stride = _CSDS_HEADER.unpack_from(blob)
    if magic != CSDS_MAGIC:
        raise BadMagic(f"not a CSDS container (magic {magic!r})")
    if version != CSDS_VERSION:
        raise UnsupportedVersion(f"CSDS version {version}")
    if code not in _DTYPE_CODES:
        raise UnsupportedVersion(f"unknown dtype code {code}")
    dtype = _DTYPE_CODES[code]
    need = _CSDS_HEADER.size + 3 * n + n * u * w * dtype.itemsize
    if len(blob) < need:
        raise TruncatedPayload(f"need {need} bytes, have {len(blob)}")
    off = _CSDS_HEADER.size
    y = np.frombuffer(blob, np.uint8, n, off).copy()
    scen = np.frombuffer(blob, np.uint8, n, off + n).copy()
    los = np.frombuffer(blob, np.uint8, n, off + 2 * n).astype(bool)
    X = (
        np.frombuffer(blob, dtype, n * u * w, off + 3 * n)
        .reshape(n, u, w)
        .copy()
    )
    return LabeledDataset(X=X, y=y, scenario_ids=scen, los=los, window=u, stride=stride)


def export_csv(path, ds: LabeledDataset) -> None:
    """One row per sample: label, scenario, los, then the flattened window."""
    n, u, w = ds.X.shape
    with open(path, "w") as fh:
        cols = ",".join(f"f{i}" for i in range(u * w))
        fh.write(f"label,scenario,los,{cols}\n")
        for i in range(n):
            flat = ",".join(repr(float(v)) for v in ds.X[i].ravel())
            fh.write(f"{int(ds.y[i])},{int(ds.scenario_ids[i])},{int(ds.los[i])},{flat}\n")
