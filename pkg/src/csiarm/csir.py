"""CSIR v1: the on-disk container for CSI recordings.

All fields little-endian. Header is exactly 32 bytes:

    offset  size  field
    0       4     magic "CSIR"
    4       2     version (u16, =1)
    6       1     label (u8: class code 0-3, 255 = unlabeled)
    7       1     scenario (u8)
    8       1     los (u8: 0/1)
    9       3     pad
    12      4     N, frame count (u32)
    16      2     W, subcarriers per frame (u16, =256)
    18      4     sample_rate_hz (f32)
    22      2     channel (u16)
    24      2     bandwidth_mhz (u16)
    26      6     reserved

followed by N frame records of 24 + W*8 bytes each:

    offset  size  field
    0       8     timestamp (f64, seconds)
    8       4     seq (u32)
    12      2     rssi (i16, dBm)
    14      2     pad
    16      8     reserved
    24      W*8   subcarriers, W pairs of (re f32, im f32), ascending tone order
"""

from __future__ import annotations

import struct
from typing import Optional, Union

import numpy as np

from .core import (
    ActionClass,
    BadMagic,
    CorruptFrame,
    CsiArmError,
    CsiRecording,
    N_SUBCARRIERS_80MHZ,
    TruncatedPayload,
    UNLABELED,
    UnsupportedVersion,
)

MAGIC = b"CSIR"
VERSION = 1
HEADER_SIZE = 32
HEADER_STRUCT = struct.Struct("<4sHBBB3xIHfHH6x")
FRAME_PREFIX_SIZE = 24
FRAME_RECORD_SIZE = FRAME_PREFIX_SIZE + N_SUBCARRIERS_80MHZ * 8

FRAME_DTYPE = np.dtype(
    [
        ("timestamp", "<f8"),
        ("seq", "<u4"),
        ("rssi", "<i2"),
        ("pad", "<u2"),
        ("reserved", "<u8"),
        ("iq", "<f4", (2 * N_SUBCARRIERS_80MHZ,)),
    ]
)
assert HEADER_STRUCT.size == HEADER_SIZE
assert FRAME_DTYPE.itemsize == FRAME_RECORD_SIZE

_VALID_LABELS = frozenset(int(a) for a in ActionClass) | {UNLABELED}


class CsirError(CsiArmError):
    """Base class for recording-container decode errors."""


# Decode failures reuse the shared error types but are re-parented here so
# callers can catch everything codec-related in one clause.
class CsirBadMagic(CsirError, BadMagic):
    pass


class CsirUnsupportedVersion(CsirError, UnsupportedVersion):
    pass


class CsirTruncatedPayload(CsirError, TruncatedPayload):
    pass


class CsirCorruptFrame(CsirError, CorruptFrame):
    pass


def encode_recording(rec: CsiRecording) -> bytes:
    """Serialize a recording to the CSIR v1 byte layout.

    Inverse of :func:`decode_recording`, bit-exactly, for any recording
    that satisfies the type invariants.
    """
    rec.validate()
    n = rec.n_frames
    label = UNLABELED if rec.label is None else int(rec.label)
    header = HEADER_STRUCT.pack(
        MAGIC,
        VERSION,
        label,
        rec.scenario_id,
        1 if rec.los else 0,
        n,
        N_SUBCARRIERS_80MHZ,
        rec.sample_rate_hz,
        rec.channel,
        rec.bandwidth_mhz,
    )
    records = np.zeros(n, dtype=FRAME_DTYPE)
    records["timestamp"] = rec.timestamps
    records["seq"] = rec.seqs
    records["rssi"] = rec.rssis
    records["iq"] = rec.csi.view(np.float32)
    return header + records.tobytes()


def decode_recording(data: Union[bytes, bytearray, memoryview]) -> CsiRecording:
    """Parse CSIR v1 bytes into a recording.

    Raises a :class:`CsirError` subclass on any malformed input; never
    raises anything else, regardless of the bytes supplied.
    """
    data = bytes(data)
    if data[:4] != MAGIC:
        raise CsirBadMagic(f"not a CSIR file (leading bytes {data[:4]!r})")
    if len(data) < HEADER_SIZE:
        raise CsirTruncatedPayload(
            f"header needs {HEADER_SIZE} bytes, got {len(data)}"
        )
    (
        _magic,
        version,
        label_code,
        scenario,
        los_code,
        n,
        w,
        sample_rate,
        channel,
        bandwidth,
    ) = HEADER_STRUCT.unpack_from(data)
    if version != VERSION:
        raise CsirUnsupportedVersion(f"unsupported CSIR version {version}")
    if w != N_SUBCARRIERS_80MHZ:
        raise CsirCorruptFrame(f"unsupported subcarrier count {w}")
    if n < 1:
        raise CsirCorruptFrame("recording declares zero frames")
    if label_code not in _VALID_LABELS:
        raise CsirCorruptFrame(f"invalid label code {label_code}")
    if los_code not in (0, 1):
        raise CsirCorruptFrame(f"invalid los flag {los_code}")
    if not np.isfinite(sample_rate) or sample_rate <= 0:
        raise CsirCorruptFrame(f"invalid sample rate {sample_rate}")
    body = len(data) - HEADER_SIZE
    if body < n * FRAME_RECORD_SIZE:
        raise CsirTruncatedPayload(
            f"declared {n} frames need {n * FRAME_RECORD_SIZE} bytes, got {body}"
        )
    records = np.frombuffer(data, dtype=FRAME_DTYPE, count=n, offset=HEADER_SIZE)
    csi = records["iq"].view(np.complex64)
    timestamps = records["timestamp"].astype(np.float64)
    if not np.all(np.isfinite(records["iq"])):
        raise CsirCorruptFrame("non-finite CSI value in frame body")
    if not np.all(np.isfinite(timestamps)):
        raise CsirCorruptFrame("non-finite timestamp in frame body")
    return CsiRecording(
        csi=csi.copy(),
        timestamps=timestamps,
        seqs=records["seq"].astype(np.uint32),
        rssis=records["rssi"].astype(np.int16),
        label=None if label_code == UNLABELED else ActionClass(label_code),
        scenario_id=scenario,
        los=bool(los_code),
        sample_rate_hz=float(np.float32(sample_rate)),
        channel=channel,
        bandwidth_mhz=bandwidth,
    )


def write_recording(path, rec: CsiRecording) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_recording(rec))


def read_recording(path) -> CsiRecording:
    with open(path, "rb") as fh:
        return decode_recording(fh.read())
