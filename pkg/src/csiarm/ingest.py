"""UDP ingestion of sniffer datagrams.

One CSI frame per datagram.  Sniffer firmware payloads vary by chip, so the
byte layout is a parameter (`DatagramLayout`); the default layout is the CSIR
frame record prefixed with a 4-byte magic:

    offset  size  field
    ------  ----  -----------------------------------------
    0       4     magic  b"CSIF"
    4       8     timestamp     float64 LE, seconds
    12      4     seq           uint32 LE
    16      2     rssi          int16 LE, dBm
    18      2     padding
    20      8     reserved
    28      --    I/Q samples, interleaved (re, im) per subcarrier

Samples are either little-endian float32 (default, lossless CSIR interop) or
int16 with unit scaling (a value of 3 decodes to 3.0).
"""

from __future__ import annotations

import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .core import (
    BadMagic,
    CsiArmError,
    CsiFrame,
    LengthMismatch,
    N_SUBCARRIERS_80MHZ,
)

DEFAULT_PORT = 5500

_SAMPLE_DTYPES = {"f4": np.dtype("<f4"), "i2": np.dtype("<i2")}


class BindFailure(CsiArmError):
    """The requested UDP port could not be bound."""


@dataclass(frozen=True)
class DatagramLayout:
    """Byte layout of one sniffer datagram.

    Field offsets are from the start of the payload.  ``timestamp_offset``,
    ``seq_offset`` and ``rssi_offset`` may be None for firmwares that do not
    send them; missing timestamps fall back to arrival time.
    """

    magic: bytes = b"CSIF"
    timestamp_offset: Optional[int] = 4
    seq_offset: Optional[int] = 12
    rssi_offset: Optional[int] = 16
    iq_offset: int = 28
    n_subcarriers: int = N_SUBCARRIERS_80MHZ
    sample_format: str = "f4"  # "f4" float32 | "i2" int16, little-endian

    def __post_init__(self):
        if self.sample_format not in _SAMPLE_DTYPES:
            raise ValueError(f"unknown sample_format {self.sample_format!r}")

    @property
    def sample_dtype(self) -> np.dtype:
        return _SAMPLE_DTYPES[self.sample_format]

    @property
    def payload_size(self) -> int:
        return self.iq_offset + self.n_subcarriers * 2 * self.sample_dtype.itemsize


DEFAULT_LAYOUT = DatagramLayout()


def decode_sniffer_datagram(
    payload: bytes, decoder: DatagramLayout = DEFAULT_LAYOUT
) -> CsiFrame:
    """Decode one datagram into a CsiFrame.

    Raises BadMagic if the payload does not start with the layout's magic,
    LengthMismatch if it is shorter than header + I/Q section.
    """
    payload = bytes(payload)
    if decoder.magic and not payload.startswith(decoder.magic):
        raise BadMagic(
            f"datagram magic {payload[:len(decoder.magic)]!r} != {decoder.magic!r}"
        )
    if len(payload) < decoder.payload_size:
        raise LengthMismatch(
            f"datagram has {len(payload)} bytes, layout needs {decoder.payload_size}"
        )

    if decoder.timestamp_offset is not None:
        (timestamp,) = struct.unpack_from("<d", payload, decoder.timestamp_offset)
    else:
        timestamp = time.time()
    if decoder.seq_offset is not None:
        (seq,) = struct.unpack_from("<I", payload, decoder.seq_offset)
    else:
        seq = 0
    if decoder.rssi_offset is not None:
        (rssi,) = struct.unpack_from("<h", payload, decoder.rssi_offset)
    else:
        rssi = 0

    n = decoder.n_subcarriers
    flat = np.frombuffer(
        payload, dtype=decoder.sample_dtype, count=2 * n, offset=decoder.iq_offset
    )
    iq = flat.astype(np.float32).reshape(n, 2)  # unit scaling for int16 sources
    subcarriers = (iq[:, 0] + 1j * iq[:, 1]).astype(np.complex64)
    return CsiFrame(timestamp=timestamp, seq=seq, subcarriers=subcarriers, rssi=rssi)


def encode_sniffer_datagram(
    frame: CsiFrame, layout: DatagramLayout = DEFAULT_LAYOUT
) -> bytes:
    """Inverse of decode_sniffer_datagram; used by the loopback test harness
    and by the synthetic-corpus replay path."""
    buf = bytearray(layout.payload_size)
    buf[: len(layout.magic)] = layout.magic
    if layout.timestamp_offset is not None:
        struct.pack_into("<d", buf, layout.timestamp_offset, frame.timestamp)
    if layout.seq_offset is not None:
        struct.pack_into("<I", buf, layout.seq_offset, frame.seq)
    if layout.rssi_offset is not None:
        struct.pack_into("<h", buf, layout.rssi_offset, frame.rssi)
    iq = np.empty((layout.n_subcarriers, 2), dtype=np.float32)
    iq[:, 0] = frame.subcarriers.real
    iq[:, 1] = frame.subcarriers.imag
    samples = iq.astype(layout.sample_dtype).tobytes()
    buf[layout.iq_offset : layout.iq_offset + len(samples)] = samples
    return bytes(buf)


@dataclass
class IngestResult:
    """Frames received in arrival order plus drop accounting."""

    frames: List[CsiFrame] = field(default_factory=list)
    dropped: int = 0
    port: int = 0


def ingest_stream(
    port: int = DEFAULT_PORT,
    *,
    max_frames: Optional[int] = None,
    max_seconds: Optional[float] = None,
    stop_event: Optional[threading.Event] = None,
    layout: DatagramLayout = DEFAULT_LAYOUT,
    host: str = "127.0.0.1",
    recv_buffer: int = 1 << 22,
) -> IngestResult:
    """Listen on a UDP port and collect frames until a stop condition.

    Stop conditions: frame count (max_frames), wall-clock duration
    (max_seconds), or external signal (stop_event).  At least one of the
    three must be given.  Undecodable datagrams are counted as drops, never
    fatal.  Frames are delivered strictly in arrival order.
    """
    if max_frames is None and max_seconds is None and stop_event is None:
        raise ValueError("need a stop condition: max_frames, max_seconds or stop_event")

    try:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, recv_buffer)
        except OSError:
            pass  # best effort; kernel may clamp
        sock.bind((host, port))
    except OSError as exc:
        raise BindFailure(f"cannot bind UDP {host}:{port}: {exc}") from exc

    result = IngestResult(port=sock.getsockname()[1])
    deadline = None if max_seconds is None else time.monotonic() + max_seconds
    try:
        while True:
            if max_frames is not None and len(result.frames) >= max_frames:
                break
            if stop_event is not None and stop_event.is_set():
                break
            if deadline is not None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                sock.settimeout(min(remaining, 0.25))
            else:
                sock.settimeout(0.25)
            try:
                payload, _addr = sock.recvfrom(65535)
            except socket.timeout:
                continue
            try:
                result.frames.append(decode_sniffer_datagram(payload, layout))
            except CsiArmError:
                result.dropped += 1
    finally:
        sock.close()
    return result
