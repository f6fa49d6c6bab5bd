"""Domain types for WiFi channel state information recordings.

A recording is the complex channel matrix H (packets x subcarriers) plus
capture metadata. 80 MHz captures carry 256 subcarriers per frame, stored
in ascending tone order (tone index -128 .. +127).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterator, Optional, Sequence

import numpy as np

N_SUBCARRIERS_80MHZ = 256
DEFAULT_CHANNEL = 36
DEFAULT_BANDWIDTH_MHZ = 80
DEFAULT_SAMPLE_RATE_HZ = 30.0

UNLABELED = 255  # on-disk code for "no label"


class CsiArmError(Exception):
    """Base class for all csiarm errors."""


class BadMagic(CsiArmError):
    """Byte stream does not start with the expected magic."""


class UnsupportedVersion(CsiArmError):
    """Recognized container but unknown format version."""


class TruncatedPayload(CsiArmError):
    """Declared payload extends past the available bytes."""


class CorruptFrame(CsiArmError):
    """Frame carries a non-finite channel value."""


class LengthMismatch(CsiArmError):
    """Input length disagrees with the expected layout."""


class ActionClass(IntEnum):
    """The four robotic-arm motion classes, with stable on-disk codes."""

    ARC = 0
    ELBOW = 1
    CIRCLE = 2
    SILENCE = 3

    @classmethod
    def from_name(cls, name: str) -> "ActionClass":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown action class: {name!r}") from None


ALL_ACTIONS = tuple(ActionClass)


@dataclass
class CsiFrame:
    """One decoded CSI frame: 256 complex subcarrier gains plus metadata.

    Subcarrier values are held as complex64 (the storage precision of the
    recording format); rssi is informational and unused by the classifier.
    """

    timestamp: float
    seq: int
    subcarriers: np.ndarray
    rssi: int = 0
    channel: int = DEFAULT_CHANNEL
    bandwidth_mhz: int = DEFAULT_BANDWIDTH_MHZ

    def __post_init__(self) -> None:
        sub = np.asarray(self.subcarriers, dtype=np.complex64)
        if sub.shape != (N_SUBCARRIERS_80MHZ,):
            raise LengthMismatch(
                f"expected {N_SUBCARRIERS_80MHZ} subcarriers, got shape {sub.shape}"
            )
        self.subcarriers = sub

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CsiFrame):
            return NotImplemented
        return (
            self.timestamp == other.timestamp
            and self.seq == other.seq
            and self.rssi == other.rssi
            and self.channel == other.channel
            and self.bandwidth_mhz == other.bandwidth_mhz
            and np.array_equal(
                self.subcarriers.view(np.float32), other.subcarriers.view(np.float32)
            )
        )


@dataclass
class CsiRecording:
    """A capture session: H as an (N, 256) complex64 matrix plus metadata.

    Storage is columnar (one matrix, parallel per-frame metadata arrays)
    rather than a list of frame objects; ``frames()`` yields the row view.
    """

    csi: np.ndarray  # (N, 256) complex64
    timestamps: np.ndarray  # (N,) float64, non-decreasing
    seqs: np.ndarray  # (N,) uint32
    rssis: np.ndarray  # (N,) int16
    label: Optional[ActionClass] = None
    scenario_id: int = 1
    los: bool = True
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    channel: int = DEFAULT_CHANNEL
    bandwidth_mhz: int = DEFAULT_BANDWIDTH_MHZ

    def __post_init__(self) -> None:
        self.csi = np.ascontiguousarray(self.csi, dtype=np.complex64)
        if self.csi.ndim != 2 or self.csi.shape[1] != N_SUBCARRIERS_80MHZ:
            raise LengthMismatch(
                f"csi matrix must be (N, {N_SUBCARRIERS_80MHZ}), got {self.csi.shape}"
            )
        if self.csi.shape[0] < 1:
            raise ValueError("a recording needs at least one frame")
        n = self.csi.shape[0]
        self.timestamps = np.ascontiguousarray(self.timestamps, dtype=np.float64)
        self.seqs = np.ascontiguousarray(self.seqs, dtype=np.uint32)
        self.rssis = np.ascontiguousarray(self.rssis, dtype=np.int16)
        for name, arr in (
            ("timestamps", self.timestamps),
            ("seqs", self.seqs),
            ("rssis", self.rssis),
        ):
            if arr.shape != (n,):
                raise LengthMismatch(f"{name} must have shape ({n},), got {arr.shape}")
        if self.label is not None:
            self.label = ActionClass(self.label)
        # the container stores the rate as f32; coerce up front so that
        # encode/decode is the identity on every constructible recording
        self.sample_rate_hz = float(np.float32(self.sample_rate_hz))

    @property
    def n_frames(self) -> int:
        return self.csi.shape[0]

    def validate(self) -> None:
        """Check the invariants required of a well-formed recording."""
        if not np.all(np.isfinite(self.csi.view(np.float32))):
            raise CorruptFrame("recording contains non-finite CSI values")
        if not np.all(np.isfinite(self.timestamps)):
            raise CorruptFrame("recording contains non-finite timestamps")
        if np.any(np.diff(self.timestamps) < 0):
            raise ValueError("timestamps must be non-decreasing")
        if not 0 <= self.scenario_id <= 255:
            raise ValueError(f"scenario_id out of range: {self.scenario_id}")

    def frames(self) -> Iterator[CsiFrame]:
        for i in range(self.n_frames):
            yield CsiFrame(
                timestamp=float(self.timestamps[i]),
                seq=int(self.seqs[i]),
                subcarriers=self.csi[i],
                rssi=int(self.rssis[i]),
                channel=self.channel,
                bandwidth_mhz=self.bandwidth_mhz,
            )

    @classmethod
    def from_frames(
        cls,
        frames: Sequence[CsiFrame],
        label: Optional[ActionClass] = None,
        scenario_id: int = 1,
        los: bool = True,
        sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    ) -> "CsiRecording":
        if not frames:
            raise ValueError("a recording needs at least one frame")
        return cls(
            csi=np.stack([f.subcarriers for f in frames]),
            timestamps=np.array([f.timestamp for f in frames], dtype=np.float64),
            seqs=np.array([f.seq for f in frames], dtype=np.uint32),
            rssis=np.array([f.rssi for f in frames], dtype=np.int16),
            label=label,
            scenario_id=scenario_id,
            los=los,
            sample_rate_hz=sample_rate_hz,
            channel=frames[0].channel,
            bandwidth_mhz=frames[0].bandwidth_mhz,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CsiRecording):
            return NotImplemented
        return (
            self.label == other.label
            and self.scenario_id == other.scenario_id
            and self.los == other.los
            and self.sample_rate_hz == other.sample_rate_hz
            and self.channel == other.channel
            and self.bandwidth_mhz == other.bandwidth_mhz
            and np.array_equal(self.csi.view(np.float32), other.csi.view(np.float32))
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.seqs, other.seqs)
            and np.array_equal(self.rssis, other.rssis)
        )
