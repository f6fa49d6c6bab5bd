import numpy as np
import pytest

from csiarm.core import CsiRecording


def make_random_recording(
    rng: np.random.Generator,
    n_frames: int = 20,
    label=None,
    scenario_id: int = 1,
    los: bool = True,
) -> CsiRecording:
    """A structurally valid recording with random finite CSI content."""
    csi = (
        rng.normal(size=(n_frames, 256)) + 1j * rng.normal(size=(n_frames, 256))
    ).astype(np.complex64)
    return CsiRecording(
        csi=csi,
        timestamps=np.cumsum(rng.uniform(0.01, 0.05, size=n_frames)),
        seqs=np.arange(n_frames, dtype=np.uint32),
        rssis=rng.integers(-90, -20, size=n_frames).astype(np.int16),
        label=label,
        scenario_id=scenario_id,
        los=los,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
