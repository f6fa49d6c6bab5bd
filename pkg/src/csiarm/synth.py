"""Synthetic multipath CSI generator.

Parametric robotic-arm trajectories drive a geometric single-bounce ray
model: the channel at each subcarrier frequency f is

    H(f) = a_los * exp(-2j*pi*f*tau_los) + sum_k rho_k * (1/d_k) * exp(-2j*pi*f*tau_k)

where d_k is the total path length tx -> scatterer_k -> rx, tau = d/c, and
the line-of-sight term is attenuated by a fixed factor when an axis-aligned
obstacle box blocks the tx-rx segment.  The arm contributes two moving
scatter points (end effector and mid-link); everything is deterministic
given the scene seed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    ALL_ACTIONS,
    ActionClass,
    CsiArmError,
    CsiRecording,
    DEFAULT_BANDWIDTH_MHZ,
    DEFAULT_CHANNEL,
    DEFAULT_SAMPLE_RATE_HZ,
    N_SUBCARRIERS_80MHZ,
)

C_LIGHT = 299_792_458.0
DEFAULT_CARRIER_HZ = 5.18e9  # channel 36 center
DEFAULT_BANDWIDTH_HZ = 80e6
DEFAULT_NLOS_ATTENUATION_DB = -15.0

ScatterPoint = Tuple[np.ndarray, float]  # (position [m], reflectivity 0-1)


class DegenerateGeometry(CsiArmError):
    """A propagation path has zero length."""


def _vec3(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64).reshape(3)
    return v


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by center and edge lengths, in meters."""

    center: Tuple[float, float, float]
    size: Tuple[float, float, float]

    def intersects_segment(self, p, q) -> bool:
        """Slab test: does the segment p->q pass through the box?"""
        p = _vec3(p)
        d = _vec3(q) - p
        lo = _vec3(self.center) - 0.5 * _vec3(self.size)
        hi = _vec3(self.center) + 0.5 * _vec3(self.size)
        tmin, tmax = 0.0, 1.0
        for ax in range(3):
            if d[ax] == 0.0:
                if p[ax] < lo[ax] or p[ax] > hi[ax]:
                    return False
            else:
                t1 = (lo[ax] - p[ax]) / d[ax]
                t2 = (hi[ax] - p[ax]) / d[ax]
                if t1 > t2:
                    t1, t2 = t2, t1
                tmin = max(tmin, t1)
                tmax = min(tmax, t2)
                if tmin > tmax:
                    return False
        return True


# obstacle used for NLOS cells: 0.10 x 0.20 x 1.00 m slab in front of the tx
DEFAULT_OBSTACLE = Box(center=(1.4, 2.5, 0.9), size=(0.10, 0.20, 1.00))


@dataclass
class SceneConfig:
    """Static geometry and channel parameters for one measurement setup."""

    tx_pos: np.ndarray
    rx_pos: np.ndarray
    robot_base: np.ndarray
    static_scatterers: List[ScatterPoint] = field(default_factory=list)
    obstacle: Optional[Box] = None
    carrier_hz: float = DEFAULT_CARRIER_HZ
    bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ
    noise_std: float = 0.0
    nlos_attenuation_db: float = DEFAULT_NLOS_ATTENUATION_DB
    seed: int = 0

    def __post_init__(self):
        self.tx_pos = _vec3(self.tx_pos)
        self.rx_pos = _vec3(self.rx_pos)
        self.robot_base = _vec3(self.robot_base)
        self.static_scatterers = [
            (_vec3(p), float(r)) for p, r in self.static_scatterers
        ]
        if np.array_equal(self.tx_pos, self.rx_pos):
            raise ValueError("tx_pos and rx_pos must differ")
        for _, r in self.static_scatterers:
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"reflectivity {r} outside [0, 1]")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    @property
    def los_blocked(self) -> bool:
        return self.obstacle is not None and self.obstacle.intersects_segment(
            self.tx_pos, self.rx_pos
        )


def subcarrier_frequencies(scene: SceneConfig) -> np.ndarray:
    """Absolute frequency of the 256 subcarriers in ascending tone order:
    carrier + k * (bandwidth / 256) for tone index k = -128 ... 127."""
    k = np.arange(N_SUBCARRIERS_80MHZ, dtype=np.float64) - 128.0
    return scene.carrier_hz + k * (scene.bandwidth_hz / N_SUBCARRIERS_80MHZ)


@dataclass(frozen=True)
class Trajectory:
    """Time-parametric positions of the arm's reflection points.

    scatterer_path maps t (seconds) to the list of (position, reflectivity)
    pairs; it must be period_s-periodic.
    """

    action: ActionClass
    period_s: float
    scatterer_path: Callable[[float], List[ScatterPoint]]


def trajectory_at(traj: Trajectory, t: float) -> List[ScatterPoint]:
    if t < 0:
        raise ValueError("t must be >= 0")
    return traj.scatterer_path(float(t))


# --- default arm poses -----------------------------------------------------
#
# The arm is reduced to two scatter points: the end effector and the
# mid-link (elbow region).  Arc and Circle share the same circular locus of
# the end effector and differ only in the temporal sweep, which is what
# makes them the confusable pair.

ARM_RADIUS = 0.3  # end-effector reach, meters
_SHOULDER_LIFT = np.array([0.0, 0.0, 0.3])
_CENTER_LIFT = np.array([0.0, 0.0, 0.45])
_MID_BEND = np.array([0.0, 0.12, 0.0])
_REST_ANGLE = np.pi / 2  # top of the circle

END_REFLECTIVITY = 0.9
MID_REFLECTIVITY = 0.6


def _end_on_circle(base: np.ndarray, angle: float, radius: float) -> np.ndarray:
    center = base + _CENTER_LIFT
    return center + radius * np.array([np.cos(angle), 0.0, np.sin(angle)])


def _mid_from_end(base: np.ndarray, end: np.ndarray) -> np.ndarray:
    shoulder = base + _SHOULDER_LIFT
    return 0.5 * (shoulder + end) + _MID_BEND


def circle_trajectory(
    base, radius: float = ARM_RADIUS, period_s: float = 15.0
) -> Trajectory:
    """Full rotation of the end effector, one turn per period."""
    base = _vec3(base)

    def path(t: float) -> List[ScatterPoint]:
        u = (t % period_s) / period_s
        end = _end_on_circle(base, _REST_ANGLE + 2.0 * np.pi * u, radius)
        return [(end, END_REFLECTIVITY), (_mid_from_end(base, end), MID_REFLECTIVITY)]

    return Trajectory(ActionClass.CIRCLE, period_s, path)


def arc_trajectory(
    base,
    radius: float = ARM_RADIUS,
    period_s: float = 6.0,
    sweep_rad: float = np.pi / 3,
) -> Trajectory:
    """Back-and-forth sweep over the same circular locus as the circle
    motion, +-sweep_rad around the rest angle."""
    base = _vec3(base)

    def path(t: float) -> List[ScatterPoint]:
        u = (t % period_s) / period_s
        end = _end_on_circle(
            base, _REST_ANGLE + sweep_rad * np.sin(2.0 * np.pi * u), radius
        )
        return [(end, END_REFLECTIVITY), (_mid_from_end(base, end), MID_REFLECTIVITY)]

    return Trajectory(ActionClass.ARC, period_s, path)


def elbow_trajectory(
    base, period_s: float = 4.0, amplitude: float = 0.15
) -> Trajectory:
    """End effector held fixed at the rest pose; only the mid-link
    oscillates."""
    base = _vec3(base)
    end = _end_on_circle(base, _REST_ANGLE, ARM_RADIUS)
    mid0 = _mid_from_end(base, end)
    direction = np.array([0.6, 0.8, 0.0])

    def path(t: float) -> List[ScatterPoint]:
        u = (t % period_s) / period_s
        mid = mid0 + amplitude * np.cos(2.0 * np.pi * u) * direction
        return [(end, END_REFLECTIVITY), (mid, MID_REFLECTIVITY)]

    return Trajectory(ActionClass.ELBOW, period_s, path)


def silence_trajectory(base) -> Trajectory:
    """Arm frozen at the rest pose."""
    base = _vec3(base)
    end = _end_on_circle(base, _REST_ANGLE, ARM_RADIUS)
    mid = _mid_from_end(base, end)
    points = [(end, END_REFLECTIVITY), (mid, MID_REFLECTIVITY)]

    def path(t: float) -> List[ScatterPoint]:
        return [(p.copy(), r) for p, r in points]

    return Trajectory(ActionClass.SILENCE, 1.0, path)


def default_trajectory(action: ActionClass, base) -> Trajectory:
    factories = {
        ActionClass.ARC: arc_trajectory,
        ActionClass.ELBOW: elbow_trajectory,
        ActionClass.CIRCLE: circle_trajectory,
        ActionClass.SILENCE: silence_trajectory,
    }
    return factories[action](base)


# --- channel model ---------------------------------------------------------


def _los_amplitude_and_delay(scene: SceneConfig) -> Tuple[float, float]:
    d = float(np.linalg.norm(scene.rx_pos - scene.tx_pos))
    if d == 0.0:
        raise DegenerateGeometry("tx-rx distance is zero")
    a = 1.0 / d
    if scene.los_blocked:
        a *= 10.0 ** (scene.nlos_attenuation_db / 20.0)
    return a, d / C_LIGHT


def channel_response(
    scene: SceneConfig, scatterers: Sequence[ScatterPoint], freqs: np.ndarray
) -> np.ndarray:
    """Frequency response over the given subcarrier frequencies for one
    instantaneous scatterer configuration."""
    freqs = np.asarray(freqs, dtype=np.float64)
    a_los, tau_los = _los_amplitude_and_delay(scene)
    h = a_los * np.exp(-2j * np.pi * freqs * tau_los)
    for pos, rho in scatterers:
        pos = _vec3(pos)
        d = float(
            np.linalg.norm(pos - scene.tx_pos) + np.linalg.norm(scene.rx_pos - pos)
        )
        if d == 0.0:
            raise DegenerateGeometry("scatterer path length is zero")
        h = h + (rho / d) * np.exp(-2j * np.pi * freqs * (d / C_LIGHT))
    return h


def generate_recording(
    scene: SceneConfig,
    traj: Trajectory,
    n_packets: int = 10000,
    rate_hz: float = DEFAULT_SAMPLE_RATE_HZ,
    scenario_id: int = 1,
) -> CsiRecording:
    """Simulate n_packets CSI frames at rate_hz.

    Frame i is the channel response at t = i/rate_hz for the trajectory's
    scatterers plus the scene's static scatterers, with i.i.d. complex
    Gaussian noise (noise_std per real/imaginary component) added to every
    subcarrier.  Deterministic given scene.seed.
    """
    if n_packets < 1:
        raise ValueError("n_packets must be >= 1")
    if rate_hz <= 0:
        raise ValueError("rate_hz must be > 0")

    rng = np.random.default_rng(scene.seed)
    freqs = subcarrier_frequencies(scene)
    times = np.arange(n_packets, dtype=np.float64) / rate_hz

    # constant terms: LOS + static scatterers
    base_scatter = list(scene.static_scatterers)
    h_static = channel_response(scene, base_scatter, freqs)
    h = np.broadcast_to(h_static, (n_packets, freqs.size)).copy()

    # moving scatter points, vectorized over time
    samples = [trajectory_at(traj, t) for t in times]
    n_points = len(samples[0])
    for j in range(n_points):
        pos = np.array([s[j][0] for s in samples])  # (N, 3)
        rho = np.array([s[j][1] for s in samples])  # (N,)
        d = np.linalg.norm(pos - scene.tx_pos, axis=1) + np.linalg.norm(
            scene.rx_pos - pos, axis=1
        )
        if np.any(d == 0.0):
            raise DegenerateGeometry("scatterer path length is zero")
        h += (rho / d)[:, None] * np.exp(
            -2j * np.pi * (d / C_LIGHT)[:, None] * freqs[None, :]
        )

    if scene.noise_std > 0:
        h = h + rng.normal(scale=scene.noise_std, size=h.shape)
        h = h + 1j * rng.normal(scale=scene.noise_std, size=h.shape)

    power = np.mean(np.abs(h) ** 2, axis=1)
    rssis = np.clip(np.round(10.0 * np.log10(power)), -32768, 32767).astype(np.int16)

    return CsiRecording(
        csi=h.astype(np.complex64),
        timestamps=times,
        seqs=np.arange(n_packets, dtype=np.uint32),
        rssis=rssis,
        label=traj.action,
        scenario_id=scenario_id,
        los=not scene.los_blocked,
        sample_rate_hz=rate_hz,
        channel=DEFAULT_CHANNEL,
        bandwidth_mhz=DEFAULT_BANDWIDTH_MHZ,
    )


# --- corpus ---------------------------------------------------------------


@dataclass
class CorpusPlan:
    """Declarative description of which (scenario, action, LOS) cells to
    generate and how long each recording is."""

    scenarios: Sequence[int] = (1, 2, 3, 4)
    actions: Sequence[ActionClass] = tuple(ALL_ACTIONS)
    los: Sequence[bool] = (True,)
    recordings_per_cell: int = 1
    packets: int = 10000
    rate_hz: float = DEFAULT_SAMPLE_RATE_HZ
    seed: Optional[int] = None  # overrides scene.seed as the corpus base seed
    noise_std: Optional[float] = None  # overrides scene.noise_std
    offset_axis: Tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        for s in self.scenarios:
            if not 1 <= int(s) <= 4:
                raise ValueError(f"scenario {s} outside 1-4")


def cell_seed(base_seed: int, scenario: int, action: ActionClass, los: bool, idx: int) -> int:
    """Independent, well-mixed seed for one corpus cell."""
    ss = np.random.SeedSequence([int(base_seed), int(scenario), int(action), int(los), int(idx)])
    return int(ss.generate_state(1, np.uint64)[0])


def corpus_filename(action: ActionClass, scenario: int, los: bool, idx: int) -> str:
    return f"{action.name.lower()}_{scenario}_{'los' if los else 'nlos'}_{idx}.csir"


def scene_for_cell(
    base_scene: SceneConfig, plan: CorpusPlan, scenario: int, action: ActionClass,
    los: bool, idx: int,
) -> SceneConfig:
    offset = (int(scenario) - 1) * 0.12 * np.asarray(plan.offset_axis, dtype=np.float64)
    obstacle = None
    if not los:
        obstacle = base_scene.obstacle if base_scene.obstacle is not None else DEFAULT_OBSTACLE
    base_seed = plan.seed if plan.seed is not None else base_scene.seed
    return dataclasses.replace(
        base_scene,
        rx_pos=base_scene.rx_pos + offset,
        obstacle=obstacle,
        noise_std=base_scene.noise_std if plan.noise_std is None else plan.noise_std,
        seed=cell_seed(base_seed, scenario, action, los, idx),
    )


def generate_corpus(base_scene: SceneConfig, plan: CorpusPlan) -> List[CsiRecording]:
    """One labeled recording per (scenario, action, LOS, idx) cell.

    Scenario s places the receiver at base rx_pos + (s-1) * 0.12 m along
    plan.offset_axis.  Cell seeds are derived independently from the base
    seed, so generation order (or parallelism) cannot change the output.
    """
    out: List[CsiRecording] = []
    for scenario in plan.scenarios:
        for action in plan.actions:
            for los in plan.los:
                for idx in range(plan.recordings_per_cell):
                    scene = scene_for_cell(base_scene, plan, scenario, action, los, idx)
                    traj = default_trajectory(ActionClass(action), scene.robot_base)
                    out.append(
                        generate_recording(
                            scene, traj, plan.packets, plan.rate_hz,
                            scenario_id=int(scenario),
                        )
                    )
    return out


def default_scene(seed: int = 0, noise_scale: float = 0.05) -> SceneConfig:
    """Desk-scale default: 5x5 m room, tx and rx 3 m apart, robot between
    them, a little static clutter.  noise_std is noise_scale times the mean
    line-of-sight amplitude (1 / tx-rx distance)."""
    tx = np.array([1.0, 2.5, 1.0])
    rx = np.array([4.0, 2.5, 1.0])
    noise_std = noise_scale / float(np.linalg.norm(rx - tx))
    return SceneConfig(
        tx_pos=tx,
        rx_pos=rx,
        robot_base=np.array([2.5, 1.8, 0.0]),
        static_scatterers=[
            (np.array([0.4, 0.3, 1.2]), 0.45),
            (np.array([4.6, 4.7, 0.3]), 0.35),
            (np.array([2.6, 4.8, 1.5]), 0.30),
        ],
        obstacle=None,
        noise_std=noise_std,
        seed=seed,
    )
