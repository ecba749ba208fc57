import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psyframe.command import BASE_MOVES, COMBO_RULES, Move
from psyframe.robot import (
    JOINT_INDEX,
    JOINT_LIMIT_DEG,
    JOINTS,
    RobotState,
    TRAJECTORIES,
    Trajectory,
    Waypoint,
    dispatch,
    step,
    trajectory_for,
)


class TestTrajectoryTable:
    def test_every_move_has_an_entry(self):
        for move in Move:
            traj = trajectory_for(move)
            assert traj.move is move
            assert traj.total_ms <= 3000

    def test_every_trajectory_ends_neutral(self):
        for move in Move:
            final = trajectory_for(move).waypoints[-1].targets
            assert set(final) == set(JOINTS)
            assert all(v == 0.0 for v in final.values())

    def test_punch_uses_left_arm(self):
        traj = trajectory_for(Move.PUNCH)
        assert len(traj.waypoints) >= 2
        first = traj.waypoints[0].targets
        assert first.get("shoulder_l", 0.0) != 0.0
        assert first.get("elbow_l", 0.0) != 0.0

    def test_hadoken_outlasts_punch(self):
        assert trajectory_for(Move.HADOKEN).total_ms > trajectory_for(Move.PUNCH).total_ms

    def test_combos_outlast_their_base_moves(self):
        for (first, second), combo in COMBO_RULES.items():
            combo_ms = trajectory_for(combo).total_ms
            assert combo_ms > trajectory_for(first).total_ms
            assert combo_ms > trajectory_for(second).total_ms

    def test_targets_within_limits(self):
        for traj in TRAJECTORIES.values():
            for wp in traj.waypoints:
                for angle in wp.targets.values():
                    assert abs(angle) <= JOINT_LIMIT_DEG

    def test_waypoint_validation(self):
        with pytest.raises(ValueError):
            Waypoint({"shoulder_l": 130.0}, 100)
        with pytest.raises(ValueError):
            Waypoint({"shoulder_l": 10.0}, 0)
        with pytest.raises(ValueError):
            Waypoint({"tail": 10.0}, 100)

    def test_trajectory_must_end_neutral(self):
        with pytest.raises(ValueError):
            Trajectory(Move.PUNCH, (Waypoint({"shoulder_l": 50.0}, 100),))


class TestDispatch:
    def test_idle_activates(self):
        s = dispatch(RobotState(), Move.PUNCH)
        assert s.active is not None
        assert s.active.trajectory.move is Move.PUNCH
        assert s.targets[JOINT_INDEX["shoulder_l"]] == 85.0

    def test_busy_queues(self):
        s = dispatch(RobotState(), Move.PUNCH)
        s = dispatch(s, Move.KICK)
        s = dispatch(s, Move.DEFENSE)
        assert s.queue == (Move.KICK, Move.DEFENSE)
        assert s.dropped_moves == 0

    def test_overflow_drops_and_counts(self):
        s = RobotState()
        for move in (Move.PUNCH, Move.KICK, Move.DEFENSE, Move.FORWARD, Move.HADOKEN):
            s = dispatch(s, move)
        assert len(s.queue) == 2
        assert s.dropped_moves == 2

    def test_fifo_drain(self):
        s = dispatch(RobotState(), Move.PUNCH)
        s = dispatch(s, Move.KICK)
        s = dispatch(s, Move.DEFENSE)
        seen = [s.active.trajectory.move]
        for _ in range(500):
            s = step(s, 20)
            current = s.active.trajectory.move if s.active else None
            if current is not None and current is not seen[-1]:
                seen.append(current)
        assert seen == [Move.PUNCH, Move.KICK, Move.DEFENSE]


class TestStep:
    def test_first_order_response_analytic(self):
        targets = np.zeros(9)
        targets[0] = 90.0
        s = RobotState(targets=targets, servo_k=5.0)
        s = step(s, 100)
        assert s.angles[0] == pytest.approx(90.0 * (1.0 - np.exp(-0.5)), abs=1e-9)
        assert abs(s.angles[0] - 35.41) < 0.01

    def test_idle_neutral_state_is_fixed_point(self):
        s = RobotState()
        out = step(s, 20)
        assert np.array_equal(out.angles, s.angles)
        assert out.active is None and out.queue == ()

    def test_bad_dt_rejected(self):
        with pytest.raises(ValueError):
            step(RobotState(), 0)

    def test_settles_to_neutral_after_trajectory(self):
        for move in Move:
            s = dispatch(RobotState(), move)
            total_ms = trajectory_for(move).total_ms
            settle_ms = total_ms + int(5.0 / s.servo_k * 1000.0)
            for _ in range(settle_ms // 20):
                s = step(s, 20)
            assert s.active is None
            assert np.abs(s.angles).max() < 1.0, move

    def test_waypoints_advance_on_schedule(self):
        s = dispatch(RobotState(), Move.PUNCH)  # waypoints: 180 ms, then 220 ms
        for _ in range(8):  # 160 ms
            s = step(s, 20)
        assert s.active.waypoint_index == 0
        s = step(s, 20)  # 180 ms total
        assert s.active.waypoint_index == 1
        assert np.all(s.targets == 0.0)

    def test_convergence_bound_while_holding_waypoint(self):
        # holding a target indefinitely reaches 0.1 degrees within ln(range/0.1)/k
        targets = np.full(9, 100.0)
        s = RobotState(targets=targets, servo_k=5.0)
        horizon_s = np.log(100.0 / 0.1) / 5.0
        steps = int(np.ceil(horizon_s * 1000 / 20))
        for _ in range(steps):
            s = step(s, 20)
        assert np.abs(s.angles - 100.0).max() < 0.1

    def test_determinism(self):
        rng = np.random.default_rng(0)
        moves = [BASE_MOVES[i] for i in rng.integers(0, 5, size=30)]

        def run():
            s = RobotState()
            for i, move in enumerate(moves):
                s = dispatch(s, move)
                for _ in range(5):
                    s = step(s, 20)
            return s

        a, b = run(), run()
        assert a.angles.tobytes() == b.angles.tobytes()
        assert a.dropped_moves == b.dropped_moves

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_joint_limits_never_violated(self, seed):
        rng = np.random.default_rng(seed)
        s = RobotState()
        moves = list(Move)
        for _ in range(100):
            if rng.random() < 0.3:
                s = dispatch(s, moves[rng.integers(len(moves))])
            s = step(s, int(rng.integers(5, 60)))
            assert np.abs(s.angles).max() <= JOINT_LIMIT_DEG + 1e-9
