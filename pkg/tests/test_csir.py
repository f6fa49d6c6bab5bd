import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csiarm.core import ActionClass, CsiRecording
from csiarm.csir import (
    CsirBadMagic,
    CsirCorruptFrame,
    CsirError,
    CsirTruncatedPayload,
    CsirUnsupportedVersion,
    FRAME_RECORD_SIZE,
    HEADER_SIZE,
    decode_recording,
    encode_recording,
    read_recording,
    write_recording,
)

from conftest import make_random_recording


def zero_recording(n=1, **kw):
    return CsiRecording(
        csi=np.zeros((n, 256), dtype=np.complex64),
        timestamps=np.arange(n, dtype=np.float64),
        seqs=np.arange(n, dtype=np.uint32),
        rssis=np.zeros(n, dtype=np.int16),
        **kw,
    )


def test_single_zero_frame_size_and_roundtrip():
    rec = zero_recording(1)
    blob = encode_recording(rec)
    assert len(blob) == 32 + 24 + 256 * 8
    assert HEADER_SIZE == 32
    assert FRAME_RECORD_SIZE == 24 + 256 * 8
    assert decode_recording(blob) == rec


def test_metadata_roundtrip():
    rec = zero_recording(3, label=ActionClass.SILENCE, scenario_id=2, los=False)
    out = decode_recording(encode_recording(rec))
    assert out.label == ActionClass.SILENCE
    assert out.scenario_id == 2
    assert out.los is False


def test_unlabeled_roundtrip():
    rec = zero_recording(2)
    out = decode_recording(encode_recording(rec))
    assert out.label is None


def test_large_recording_byte_level_roundtrip():
    rng = np.random.default_rng(7)
    rec = make_random_recording(rng, n_frames=10000, label=ActionClass.ARC)
    blob = encode_recording(rec)
    out = decode_recording(blob)
    assert out.n_frames == 10000
    assert np.array_equal(out.csi.view(np.float32), rec.csi.view(np.float32))
    assert out == rec
    # byte-level oracle: re-encoding the decoded recording reproduces the blob
    assert encode_recording(out) == blob


def test_bad_magic():
    with pytest.raises(CsirBadMagic):
        decode_recording(b"XXXX" + b"\x00" * 64)


def test_truncated_payload():
    rec = zero_recording(2)
    blob = encode_recording(rec)
    with pytest.raises(CsirTruncatedPayload):
        decode_recording(blob[: HEADER_SIZE + FRAME_RECORD_SIZE])  # N=2, one body


def test_unsupported_version():
    blob = bytearray(encode_recording(zero_recording(1)))
    blob[4] = 9
    with pytest.raises(CsirUnsupportedVersion):
        decode_recording(bytes(blob))


def test_corrupt_nonfinite_value():
    blob = bytearray(encode_recording(zero_recording(1)))
    blob[HEADER_SIZE + 24 : HEADER_SIZE + 28] = np.float32(np.nan).tobytes()
    with pytest.raises(CsirCorruptFrame):
        decode_recording(bytes(blob))


def test_invalid_label_code():
    blob = bytearray(encode_recording(zero_recording(1)))
    blob[6] = 77
    with pytest.raises(CsirCorruptFrame):
        decode_recording(bytes(blob))


def test_file_roundtrip(tmp_path, rng):
    rec = make_random_recording(rng, 50, label=ActionClass.CIRCLE, scenario_id=3)
    path = tmp_path / "rec.csir"
    write_recording(path, rec)
    assert read_recording(path) == rec


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 40),
    label_code=st.sampled_from([None, 0, 1, 2, 3]),
    scenario=st.integers(0, 255),
    los=st.booleans(),
    seed=st.integers(0, 2**32 - 1),
)
def test_roundtrip_property(n, label_code, scenario, los, seed):
    rng = np.random.default_rng(seed)
    rec = make_random_recording(
        rng,
        n,
        label=None if label_code is None else ActionClass(label_code),
        scenario_id=scenario,
        los=los,
    )
    assert decode_recording(encode_recording(rec)) == rec


@settings(max_examples=200, deadline=None)
@given(data=st.binary(max_size=4096))
def test_fuzz_decode_never_crashes(data):
    try:
        decode_recording(data)
    except CsirError:
        pass


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    cut=st.integers(0, 200),
    flip_at=st.integers(0, 500),
)
def test_fuzz_mutated_valid_files(seed, cut, flip_at):
    rng = np.random.default_rng(seed)
    blob = bytearray(encode_recording(make_random_recording(rng, 2)))
    blob = blob[: max(0, len(blob) - cut)]
    if flip_at < len(blob):
        blob[flip_at] ^= 0xFF
    try:
        decode_recording(bytes(blob))
    except CsirError:
        pass
