"""Posterior stream -> discrete moves: leaky integration, then combo upgrades.

The integrator keeps one accumulator per base move (move-table row order:
Defense, Forward, Punch, HeavyPunch, Kick). Each tick every accumulator leaks
by lambda and gains that move's posterior probability; the first accumulator
to reach theta fires its move, everything resets, and a short refractory
window suppresses re-triggers. Fired base moves then pass through a
hold-and-upgrade resolver that turns the four known two-move sequences into
their combo moves.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .synth import N_CLASSES


class Move(str, Enum):
    DEFENSE = "Defense"
    FORWARD = "Forward"
    PUNCH = "Punch"
    HEAVY_PUNCH = "HeavyPunch"
    KICK = "Kick"
    PUNCH_COMBO = "PunchCombo"
    UPPERCUT = "Uppercut"
    KICK_COMBO = "KickCombo"
    HADOKEN = "Hadoken"

    @property
    def is_combo(self) -> bool:
        return self in COMBO_MOVES


# Move-table row order; also the accumulator index order and the tie-break
# order on simultaneous threshold crossings (lowest row wins).
BASE_MOVES = (Move.DEFENSE, Move.FORWARD, Move.PUNCH, Move.HEAVY_PUNCH, Move.KICK)
COMBO_MOVES = (Move.PUNCH_COMBO, Move.UPPERCUT, Move.KICK_COMBO, Move.HADOKEN)

# (first, second) -> combo
COMBO_RULES: dict[tuple[Move, Move], Move] = {
    (Move.FORWARD, Move.PUNCH): Move.PUNCH_COMBO,
    (Move.FORWARD, Move.HEAVY_PUNCH): Move.UPPERCUT,
    (Move.FORWARD, Move.KICK): Move.KICK_COMBO,
    (Move.PUNCH, Move.HEAVY_PUNCH): Move.HADOKEN,
}
COMBO_STARTERS = frozenset(first for first, _ in COMBO_RULES)

# Fixed bijection between imagery classes and base moves. The two pedal
# classes map to the two pedal moves; the three two-hand classes fill the
# three handle moves in label order.
CLASS_TO_MOVE: dict[int, Move] = {
    1: Move.DEFENSE,
    3: Move.FORWARD,
    0: Move.PUNCH,
    2: Move.HEAVY_PUNCH,
    4: Move.KICK,
}
MOVE_TO_CLASS = {m: c for c, m in CLASS_TO_MOVE.items()}
# posterior (class order) -> accumulator (move order) permutation
_CLASS_OF_ACCUMULATOR = tuple(MOVE_TO_CLASS[m] for m in BASE_MOVES)


def class_to_move(class_id: int) -> Move:
    if class_id not in CLASS_TO_MOVE:
        raise ValueError(f"class_id must be 0..{N_CLASSES - 1}, got {class_id}")
    return CLASS_TO_MOVE[class_id]


@dataclass(frozen=True)
class IntegratorState:
    """Leaky accumulators plus the parameters that govern them.

    accumulators: length-5 tuple in BASE_MOVES order, all >= 0.
    lam:          leak factor in (0, 1); bound on any accumulator is 1/(1-lam).
    theta:        trigger threshold, > 0.
    refractory_ticks: ticks of suppression installed after each trigger.
    """

    accumulators: tuple[float, ...] = (0.0,) * 5
    lam: float = 0.9
    theta: float = 5.0
    refractory_ticks: int = 2
    refractory_remaining: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lambda must be in (0, 1), got {self.lam}")
        if self.theta <= 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.refractory_ticks < 0 or self.refractory_remaining < 0:
            raise ValueError("refractory counts must be non-negative")
        if len(self.accumulators) != len(BASE_MOVES) or any(a < 0 for a in self.accumulators):
            raise ValueError("accumulators must be 5 non-negative values")

    @property
    def bound(self) -> float:
        return 1.0 / (1.0 - self.lam)


def check_posterior(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (N_CLASSES,):
        raise ValueError(f"posterior must have shape ({N_CLASSES},), got {p.shape}")
    if np.any(p < -1e-12) or np.any(p > 1.0 + 1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("posterior entries must lie in [0,1] and sum to 1")
    return np.clip(p, 0.0, 1.0)


def integrate(s: IntegratorState, p) -> tuple[IntegratorState, Move | None]:
    """One tick of the leaky integrator.

    During refractory: everything leaks, the counter decrements, nothing can
    fire. Otherwise each accumulator takes lam * a + p_move; if the maximum
    reaches theta, that move fires (ties broken by move-table row order), all
    accumulators reset to zero and refractory starts.
    """
    p = check_posterior(p)
    acc = np.asarray(s.accumulators)
    if s.refractory_remaining > 0:
        return (
            replace(
                s,
                accumulators=tuple(acc * s.lam),
                refractory_remaining=s.refractory_remaining - 1,
            ),
            None,
        )
    acc = acc * s.lam + p[list(_CLASS_OF_ACCUMULATOR)]
    if acc.max() >= s.theta:
        winner = BASE_MOVES[int(np.argmax(acc))]
        return (
            replace(
                s,
                accumulators=(0.0,) * len(BASE_MOVES),
                refractory_remaining=s.refractory_ticks,
            ),
            winner,
        )
    return replace(s, accumulators=tuple(acc)), None


def leak(s: IntegratorState) -> IntegratorState:
    """Decay-only tick, used when a window is rejected by the artifact gate."""
    acc = tuple(a * s.lam for a in s.accumulators)
    return replace(
        s,
        accumulators=acc,
        refractory_remaining=max(0, s.refractory_remaining - 1),
    )


@dataclass(frozen=True)
class MoveEvent:
    tick: int
    move: Move
    source: str  # "base" | "combo"

    def to_dict(self) -> dict:
        return {"tick": self.tick, "move": self.move.value, "source": self.source}


@dataclass(frozen=True)
class Hold:
    """A combo-starting base move waiting for its second half."""

    move: Move
    tick: int


def resolve_tick(
    hold: Hold | None, tick: int, window_ticks: int
) -> tuple[Hold | None, list[MoveEvent]]:
    """Expiry check, run once per tick before any new trigger is processed.

    A hold that reaches window_ticks of age is released as its plain base
    move, stamped at the tick the window closed.
    """
    if hold is not None and tick - hold.tick >= window_ticks:
        return None, [MoveEvent(hold.tick + window_ticks, hold.move, "base")]
    return hold, []


def resolve_trigger(
    hold: Hold | None, move: Move, tick: int, window_ticks: int
) -> tuple[Hold | None, list[MoveEvent]]:
    """Feed one fired base move through the hold-and-upgrade policy.

    A move that starts some combo rule is held (no event yet). While a hold
    is live, a matching second move within the window emits the combo as a
    single event; anything else flushes the held base move first and then the
    new move is processed on its own. Moves that start no rule emit
    immediately.
    """
    if move.is_combo:
        raise ValueError(f"combo move {move.value} cannot be a raw trigger")
    events: list[MoveEvent] = []
    if hold is not None and tick - hold.tick >= window_ticks:
        # Stale hold (caller skipped intermediate ticks): release it late.
        events.append(MoveEvent(hold.tick + window_ticks, hold.move, "base"))
        hold = None
    if hold is not None:
        combo = COMBO_RULES.get((hold.move, move))
        if combo is not None:
            events.append(MoveEvent(tick, combo, "combo"))
            return None, events
        events.append(MoveEvent(tick, hold.move, "base"))
        hold = None
    if move in COMBO_STARTERS:
        return Hold(move, tick), events
    events.append(MoveEvent(tick, move, "base"))
    return None, events
