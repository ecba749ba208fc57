"""Simulated nine-joint robot with pre-defined per-move trajectories.

Joints are angle-feedback servos modeled as first-order lags: each step they
relax toward the active waypoint's targets by 1 - exp(-k dt). Trajectories
are static tables of waypoints; every one ends on the neutral pose so the
figure always returns home, and combo trajectories take longer than the base
moves they are built from. Dispatching while busy queues up to two moves;
anything beyond that is dropped and counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import exp

import numpy as np

from .command import Move

JOINTS = (
    "shoulder_l",
    "shoulder_r",
    "elbow_l",
    "elbow_r",
    "hip_l",
    "hip_r",
    "knee_l",
    "knee_r",
    "torso",
)
N_JOINTS = len(JOINTS)
JOINT_INDEX = {name: i for i, name in enumerate(JOINTS)}
JOINT_LIMIT_DEG = 120.0
MAX_TRAJECTORY_MS = 3000
DEFAULT_SERVO_K = 5.0  # per second
MAX_QUEUE = 2

_NEUTRAL = {j: 0.0 for j in JOINTS}


@dataclass(frozen=True)
class Waypoint:
    """Joint targets (degrees) to hold for duration_ms; partial maps keep
    the previous targets for unlisted joints."""

    targets: dict[str, float]
    duration_ms: int

    def __post_init__(self) -> None:
        if self.duration_ms <= 0:
            raise ValueError("waypoint duration must be positive")
        for joint, angle in self.targets.items():
            if joint not in JOINT_INDEX:
                raise ValueError(f"unknown joint {joint!r}")
            if abs(angle) > JOINT_LIMIT_DEG:
                raise ValueError(f"{joint}: target {angle} exceeds +/-{JOINT_LIMIT_DEG} deg")


@dataclass(frozen=True)
class Trajectory:
    move: Move
    waypoints: tuple[Waypoint, ...]

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise ValueError("trajectory needs at least one waypoint")
        if self.total_ms > MAX_TRAJECTORY_MS:
            raise ValueError(f"{self.move.value}: total duration {self.total_ms} ms > {MAX_TRAJECTORY_MS}")
        final = self.waypoints[-1].targets
        if any(final.get(j, None) != 0.0 for j in JOINTS):
            raise ValueError(f"{self.move.value}: final waypoint must be the neutral pose")

    @property
    def total_ms(self) -> int:
        return sum(wp.duration_ms for wp in self.waypoints)


def _traj(move: Move, *steps: tuple[dict[str, float], int]) -> Trajectory:
    return Trajectory(move, tuple(Waypoint(dict(t), ms) for t, ms in steps))


# Poses are invented but visually distinct per move: punch = left arm,
# heavy punch = both arms, kick = right leg, pedals = legs/guard. All
# durations are multiples of the 20 ms stepping cadence.
TRAJECTORIES: dict[Move, Trajectory] = {
    Move.DEFENSE: _traj(
        Move.DEFENSE,
        ({"shoulder_l": -70, "shoulder_r": -70, "elbow_l": 95, "elbow_r": 95, "torso": -5}, 260),
        (dict(_NEUTRAL), 260),
    ),
    Move.FORWARD: _traj(
        Move.FORWARD,
        ({"hip_l": 35, "knee_l": -45, "torso": 8}, 220),
        ({"hip_l": -10, "hip_r": 35, "knee_l": 0, "knee_r": -45, "torso": 4}, 220),
        (dict(_NEUTRAL), 240),
    ),
    Move.PUNCH: _traj(
        Move.PUNCH,
        ({"shoulder_l": 85, "elbow_l": 20, "torso": 6}, 180),
        (dict(_NEUTRAL), 220),
    ),
    Move.HEAVY_PUNCH: _traj(
        Move.HEAVY_PUNCH,
        ({"shoulder_l": 95, "shoulder_r": 95, "elbow_l": 15, "elbow_r": 15, "torso": 10}, 260),
        (dict(_NEUTRAL), 280),
    ),
    Move.KICK: _traj(
        Move.KICK,
        ({"hip_r": -20, "knee_r": 70, "torso": -6}, 160),
        ({"hip_r": 70, "knee_r": 5, "torso": -10}, 200),
        (dict(_NEUTRAL), 240),
    ),
    Move.PUNCH_COMBO: _traj(
        Move.PUNCH_COMBO,
        ({"hip_l": 30, "knee_l": -40, "torso": 8}, 200),
        ({"shoulder_l": 85, "elbow_l": 20, "hip_l": 0, "knee_l": 0}, 180),
        ({"shoulder_l": 0, "elbow_l": 0, "shoulder_r": 85, "elbow_r": 20}, 180),
        (dict(_NEUTRAL), 260),
    ),
    Move.UPPERCUT: _traj(
        Move.UPPERCUT,
        ({"hip_l": 25, "hip_r": 25, "knee_l": -35, "knee_r": -35, "torso": -12}, 240),
        ({"shoulder_r": 110, "elbow_r": 60, "hip_l": 0, "hip_r": 0, "knee_l": 0, "knee_r": 0, "torso": 14}, 260),
        (dict(_NEUTRAL), 300),
    ),
    Move.KICK_COMBO: _traj(
        Move.KICK_COMBO,
        ({"hip_l": 30, "knee_l": -40, "torso": 6}, 200),
        ({"hip_r": 70, "knee_r": 10, "hip_l": 0, "knee_l": 0, "torso": -10}, 200),
        ({"hip_r": 0, "knee_r": 0, "hip_l": 65, "knee_l": 10, "torso": 10}, 220),
        (dict(_NEUTRAL), 260),
    ),
    Move.HADOKEN: _traj(
        Move.HADOKEN,
        ({"shoulder_l": -40, "shoulder_r": -40, "elbow_l": 110, "elbow_r": 110, "torso": -8}, 300),
        ({"shoulder_l": -40, "shoulder_r": -40, "elbow_l": 110, "elbow_r": 110, "torso": -12}, 160),
        ({"shoulder_l": 90, "shoulder_r": 90, "elbow_l": 5, "elbow_r": 5, "torso": 12}, 320),
        ({"shoulder_l": 90, "shoulder_r": 90, "elbow_l": 5, "elbow_r": 5, "torso": 12}, 200),
        (dict(_NEUTRAL), 300),
    ),
}


def trajectory_for(m: Move) -> Trajectory:
    return TRAJECTORIES[m]


@dataclass(frozen=True)
class ActiveTrajectory:
    trajectory: Trajectory
    waypoint_index: int
    elapsed_ms: int


def _freeze_angles(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RobotState:
    """Immutable snapshot: joint angles, servo targets, playback position.

    targets carries the currently commanded pose (neutral when idle), so the
    servos keep settling toward home after a trajectory finishes.
    """

    angles: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))
    targets: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))
    active: ActiveTrajectory | None = None
    queue: tuple[Move, ...] = ()
    servo_k: float = DEFAULT_SERVO_K
    dropped_moves: int = 0

    def __post_init__(self) -> None:
        angles = np.asarray(self.angles, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if angles.shape != (N_JOINTS,) or targets.shape != (N_JOINTS,):
            raise ValueError(f"angles/targets must have shape ({N_JOINTS},)")
        if np.any(np.abs(angles) > JOINT_LIMIT_DEG + 1e-9):
            raise ValueError("joint angles outside limits")
        if self.servo_k <= 0:
            raise ValueError("servo_k must be positive")
        if len(self.queue) > MAX_QUEUE:
            raise ValueError(f"queue length exceeds {MAX_QUEUE}")
        object.__setattr__(self, "angles", _freeze_angles(angles))
        object.__setattr__(self, "targets", _freeze_angles(targets))

    def angles_by_joint(self) -> dict[str, float]:
        return {j: float(self.angles[i]) for i, j in enumerate(JOINTS)}

    @property
    def idle(self) -> bool:
        return self.active is None


def _merged_targets(targets: np.ndarray, wp: Waypoint) -> np.ndarray:
    out = targets.copy()
    for joint, angle in wp.targets.items():
        out[JOINT_INDEX[joint]] = angle
    return out


def _activate(s: RobotState, move: Move) -> RobotState:
    traj = trajectory_for(move)
    return replace(
        s,
        active=ActiveTrajectory(traj, 0, 0),
        targets=_merged_targets(s.targets, traj.waypoints[0]),
    )


def dispatch(s: RobotState, m: Move) -> RobotState:
    """Start the move now if idle, otherwise queue it (drop + count if full)."""
    if s.active is None:
        return _activate(s, m)
    if len(s.queue) < MAX_QUEUE:
        return replace(s, queue=s.queue + (m,))
    return replace(s, dropped_moves=s.dropped_moves + 1)


def step(s: RobotState, dt_ms: int) -> RobotState:
    """Advance the simulation by dt_ms.

    Joints relax toward the current targets with first-order dynamics
    (theta += (1 - exp(-k dt)) * (target - theta)); waypoint bookkeeping then
    consumes dt, advancing waypoints and popping the queue when a trajectory
    completes. Targets move between angle sweeps only at step boundaries, so
    behavior is exactly reproducible for a given dt sequence.
    """
    if dt_ms <= 0:
        raise ValueError(f"dt_ms must be positive, got {dt_ms}")
    alpha = 1.0 - exp(-s.servo_k * dt_ms / 1000.0)
    angles = s.angles + alpha * (s.targets - s.angles)

    active = s.active
    targets = s.targets
    queue = s.queue
    if active is not None:
        elapsed = active.elapsed_ms + dt_ms
        idx = active.waypoint_index
        traj = active.trajectory
        while active is not None and elapsed >= traj.waypoints[idx].duration_ms:
            elapsed -= traj.waypoints[idx].duration_ms
            idx += 1
            if idx < len(traj.waypoints):
                targets = _merged_targets(targets, traj.waypoints[idx])
            elif queue:
                next_traj = trajectory_for(queue[0])
                queue = queue[1:]
                traj = next_traj
                idx = 0
                targets = _merged_targets(targets, traj.waypoints[0])
            else:
                # trajectory done: idle with servos holding neutral
                active = None
                targets = np.zeros(N_JOINTS)
        if active is not None:
            active = ActiveTrajectory(traj, idx, elapsed)

    return replace(s, angles=angles, targets=targets, active=active, queue=queue)
