"""Two-stage wiring: offline training run and the online decode-control loop.

The decode loop advances in hops. Each hop it acquires one synthetic window
(class chosen by a schedule and/or live injections), gates it for artifacts,
band-passes, normalizes, extracts features, classifies, feeds the posterior
to the leaky integrator, resolves combos, and dispatches resulting moves to
the robot, which itself steps on a finer cadence between hops. One TickReport
is emitted per hop; a session log of those reports plus the applied control
changes replays bit-identically.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable

from . import command as cmd
from . import model as mdl
from . import robot as rob
from .features import FEATURE_LAYOUT_ID, assemble_features, band_power_matrix
from .fileio import dump_line, read_manifest, sha256_file
from .signal_core import DEFAULT_AMP_LIMIT_UV, FS_HZ, design_bandpass, gate_artifacts, preprocess
from .synth import N_CLASSES, Dataset, build_dataset, noise_window, split_dataset, synth_window

PROTOCOL_VERSION = 1
SESSION_FORMAT = "psyframe-session"

# Multiplier folding the hop index into the per-window seed stream.
_TICK_SEED_STRIDE = 1_000_003


@dataclass(frozen=True)
class IntegratorConfig:
    lam: float = 0.9
    theta: float = 5.0
    refractory: int = 2
    combo_window: int = 8

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "theta": self.theta,
            "refractory": self.refractory,
            "combo_window": self.combo_window,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IntegratorConfig":
        return cls(
            lam=d.get("lambda", 0.9),
            theta=d.get("theta", 5.0),
            refractory=d.get("refractory", 2),
            combo_window=d.get("combo_window", 8),
        )


@dataclass(frozen=True)
class FilterConfig:
    lo: float = 1.0
    hi: float = 50.0
    order: int = 4

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "order": self.order}

    @classmethod
    def from_dict(cls, d: dict) -> "FilterConfig":
        return cls(lo=d.get("lo", 1.0), hi=d.get("hi", 50.0), order=d.get("order", 4))


# One schedule segment: hold class_id (None = pure noise) for `hops` hops.
Segment = tuple[int | None, int]


def _segments_to_json(schedule: tuple[Segment, ...]) -> list[dict]:
    return [{"class_id": c, "hops": h} for c, h in schedule]


def _segments_from_json(items: Iterable[dict]) -> tuple[Segment, ...]:
    out: list[Segment] = []
    for item in items:
        class_id = item.get("class_id")
        hops = int(item["hops"])
        if class_id is not None:
            class_id = int(class_id)
            if not 0 <= class_id < N_CLASSES:
                raise ValueError(f"schedule class_id out of range: {class_id}")
        if hops < 1:
            raise ValueError("schedule segment hops must be >= 1")
        out.append((class_id, hops))
    return tuple(out)


@dataclass(frozen=True)
class SourceConfig:
    """Synthetic acquisition source: seed plus an optional scripted schedule."""

    seed: int = 7
    schedule: tuple[Segment, ...] = ()

    def to_dict(self) -> dict:
        return {"type": "synth", "seed": self.seed, "schedule": _segments_to_json(self.schedule)}

    @classmethod
    def from_dict(cls, d: dict) -> "SourceConfig":
        if d.get("type", "synth") != "synth":
            raise ValueError(f"unsupported source type {d.get('type')!r}")
        return cls(seed=int(d.get("seed", 7)), schedule=_segments_from_json(d.get("schedule", [])))


@dataclass(frozen=True)
class PipelineConfig:
    window_seconds: int = 2
    hop_ms: int = 250
    robot_dt_ms: int = 20
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    source: SourceConfig = field(default_factory=SourceConfig)
    amp_limit: float = DEFAULT_AMP_LIMIT_UV
    servo_k: float = rob.DEFAULT_SERVO_K
    model_path: str = "weights.ndjson"
    service_port: int = 8765

    def __post_init__(self) -> None:
        if self.hop_ms < self.robot_dt_ms:
            raise ValueError("hop_ms must be >= robot_dt_ms")
        if self.robot_dt_ms <= 0:
            raise ValueError("robot_dt_ms must be positive")
        if (self.window_seconds * 1000) % self.hop_ms != 0:
            raise ValueError("window length must be a whole multiple of hop_ms")

    def to_dict(self) -> dict:
        return {
            "window_seconds": self.window_seconds,
            "hop_ms": self.hop_ms,
            "robot_dt_ms": self.robot_dt_ms,
            "integrator": self.integrator.to_dict(),
            "filter": self.filter.to_dict(),
            "source": self.source.to_dict(),
            "amp_limit": self.amp_limit,
            "servo_k": self.servo_k,
            "model_path": self.model_path,
            "service_port": self.service_port,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        base = cls()
        return cls(
            window_seconds=d.get("window_seconds", base.window_seconds),
            hop_ms=d.get("hop_ms", base.hop_ms),
            robot_dt_ms=d.get("robot_dt_ms", base.robot_dt_ms),
            integrator=IntegratorConfig.from_dict(d.get("integrator", {})),
            filter=FilterConfig.from_dict(d.get("filter", {})),
            source=SourceConfig.from_dict(d.get("source", {})),
            amp_limit=d.get("amp_limit", base.amp_limit),
            servo_k=d.get("servo_k", base.servo_k),
            model_path=d.get("model_path", base.model_path),
            service_port=d.get("service_port", base.service_port),
        )


def load_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return PipelineConfig.from_dict(json.load(fh))


@dataclass(frozen=True)
class TickReport:
    """Everything the cockpit needs to render one hop."""

    tick: int
    source_class: int | None
    gated: bool
    posterior: tuple[float, ...]
    accumulators: tuple[float, ...]
    triggered: cmd.Move | None
    events: tuple[cmd.MoveEvent, ...]
    band_powers: tuple[tuple[float, ...], ...] | None
    robot_angles: dict[str, float]
    dropped_moves: int

    def __post_init__(self) -> None:
        if self.tick < 1:
            raise ValueError("tick must be >= 1")
        if abs(sum(self.posterior) - 1.0) > 1e-9:
            raise ValueError("posterior must sum to 1")

    def to_dict(self) -> dict:
        return {
            "type": "tick",
            "v": PROTOCOL_VERSION,
            "tick": self.tick,
            "source_class": self.source_class,
            "gated": self.gated,
            "posterior": list(self.posterior),
            "accumulators": list(self.accumulators),
            "triggered": self.triggered.value if self.triggered else None,
            "events": [e.to_dict() for e in self.events],
            "band_powers": [list(row) for row in self.band_powers] if self.band_powers else None,
            "robot_angles": self.robot_angles,
            "dropped_moves": self.dropped_moves,
        }

    def to_line(self) -> str:
        return dump_line(self.to_dict())


class ScheduleSource:
    """Per-hop class source: scripted segments, preemptable by injections."""

    def __init__(self, cfg: SourceConfig):
        self.seed = cfg.seed
        self._base = deque(cfg.schedule)
        self._injected: deque[Segment] = deque()

    def inject(self, class_id: int | None, hops: int) -> None:
        if class_id is not None and not 0 <= class_id < N_CLASSES:
            raise ValueError(f"class_id out of range: {class_id}")
        if hops < 1:
            raise ValueError("hops must be >= 1")
        self._injected.append((class_id, hops))

    def reset(self, cfg: SourceConfig) -> None:
        self.seed = cfg.seed
        self._base = deque(cfg.schedule)
        self._injected.clear()

    def next_class(self) -> int | None:
        for q in (self._injected, self._base):
            while q:
                class_id, hops = q[0]
                if hops <= 0:
                    q.popleft()
                    continue
                q[0] = (class_id, hops - 1)
                return class_id
        return None


_UNIFORM = tuple([1.0 / N_CLASSES] * N_CLASSES)
_FROM_SCHEDULE = object()  # sentinel: step_hop draws from the live schedule


class DecodeLoop:
    """Deterministic decode-and-control state machine, one hop per step."""

    def __init__(self, cfg: PipelineConfig, weights: mdl.Weights):
        if weights.layout_id != FEATURE_LAYOUT_ID:
            raise ValueError(
                f"weights layout {weights.layout_id!r} does not match {FEATURE_LAYOUT_ID!r}"
            )
        self.cfg = cfg
        self.weights = weights
        self.filter_spec = design_bandpass(cfg.filter.lo, cfg.filter.hi, FS_HZ, cfg.filter.order)
        self.integrator = cmd.IntegratorState(
            lam=cfg.integrator.lam,
            theta=cfg.integrator.theta,
            refractory_ticks=cfg.integrator.refractory,
        )
        self.combo_window = cfg.integrator.combo_window
        self.hold: cmd.Hold | None = None
        self.robot = rob.RobotState(servo_k=cfg.servo_k)
        self.source = ScheduleSource(cfg.source)
        self.tick = 0

    def apply_params(
        self,
        lam: float | None = None,
        theta: float | None = None,
        refractory: int | None = None,
        combo_window: int | None = None,
    ) -> dict:
        """Change integrator parameters at a hop boundary; accumulators carry over."""
        s = self.integrator
        self.integrator = replace(
            s,
            lam=s.lam if lam is None else float(lam),
            theta=s.theta if theta is None else float(theta),
            refractory_ticks=s.refractory_ticks if refractory is None else int(refractory),
        )
        if combo_window is not None:
            if int(combo_window) < 1:
                raise ValueError("combo_window must be >= 1")
            self.combo_window = int(combo_window)
        return self.params_dict()

    def params_dict(self) -> dict:
        return {
            "lambda": self.integrator.lam,
            "theta": self.integrator.theta,
            "refractory": self.integrator.refractory_ticks,
            "combo_window": self.combo_window,
        }

    def apply_source(self, cfg: SourceConfig) -> None:
        self.source.reset(cfg)

    def _robot_catchup(self) -> None:
        hop, dt = self.cfg.hop_ms, self.cfg.robot_dt_ms
        n_steps = self.tick * hop // dt - (self.tick - 1) * hop // dt
        for _ in range(n_steps):
            self.robot = rob.step(self.robot, dt)

    def step_hop(self, forced_class=_FROM_SCHEDULE) -> TickReport:
        """Advance one hop. forced_class overrides the schedule (replay path)."""
        self.tick += 1
        self._robot_catchup()

        if forced_class is _FROM_SCHEDULE:
            source_class = self.source.next_class()
        else:
            source_class = forced_class
        seed_t = self.source.seed * _TICK_SEED_STRIDE + self.tick
        if source_class is None:
            window = noise_window(seed_t, start_tick=self.tick)
        else:
            window = synth_window(source_class, seed_t, start_tick=self.tick)

        gate = gate_artifacts(window, self.cfg.amp_limit)
        trigger: cmd.Move | None = None
        band_powers = None
        if gate.accepted:
            feats = assemble_features(preprocess(window, self.filter_spec))
            post = mdl.posterior(self.weights, feats)
            band_powers = tuple(tuple(row) for row in band_power_matrix(feats))
            self.integrator, trigger = cmd.integrate(self.integrator, post)
            posterior_out = tuple(float(p) for p in post)
        else:
            self.integrator = cmd.leak(self.integrator)
            posterior_out = _UNIFORM

        self.hold, events = cmd.resolve_tick(self.hold, self.tick, self.combo_window)
        if trigger is not None:
            self.hold, more = cmd.resolve_trigger(self.hold, trigger, self.tick, self.combo_window)
            events = events + more
        for event in events:
            self.robot = rob.dispatch(self.robot, event.move)

        return TickReport(
            tick=self.tick,
            source_class=source_class,
            gated=not gate.accepted,
            posterior=posterior_out,
            accumulators=tuple(self.integrator.accumulators),
            triggered=trigger,
            events=tuple(events),
            band_powers=band_powers,
            robot_angles=self.robot.angles_by_joint(),
            dropped_moves=self.robot.dropped_moves,
        )


def run_decode_loop(
    cfg: PipelineConfig,
    weights: mdl.Weights,
    n_hops: int,
    log_path=None,
    model_path: str | None = None,
) -> list[TickReport]:
    """Headless decode run (no pacing); optionally writes a session log."""
    loop = DecodeLoop(cfg, weights)
    reports = [loop.step_hop() for _ in range(n_hops)]
    if log_path is not None:
        writer = SessionLogWriter(log_path, cfg, model_path or cfg.model_path)
        for r in reports:
            writer.append_tick(r)
        writer.close()
    return reports


class SessionLogWriter:
    """Appends manifest, control-change, and tick records as they happen."""

    def __init__(self, path, cfg: PipelineConfig, model_path: str):
        self._fh = open(path, "w", encoding="utf-8")
        manifest = {
            "type": "manifest",
            "format": SESSION_FORMAT,
            "v": PROTOCOL_VERSION,
            "config": cfg.to_dict(),
            "model_path": str(model_path),
            "model_sha256": sha256_file(model_path),
        }
        self._write(manifest)

    def _write(self, obj: dict) -> None:
        self._fh.write(dump_line(obj))
        self._fh.write("\n")
        self._fh.flush()

    def append_tick(self, report: TickReport) -> None:
        self._write(report.to_dict())

    def append_params(self, before_tick: int, params: dict) -> None:
        self._write({"type": "params", "v": PROTOCOL_VERSION, "before_tick": before_tick, **params})

    def append_source(self, before_tick: int, source: SourceConfig) -> None:
        self._write({"type": "source", "v": PROTOCOL_VERSION, "before_tick": before_tick, **source.to_dict()})

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


def replay_session(log_path, weights: mdl.Weights | None = None) -> tuple[PipelineConfig, list[TickReport]]:
    """Re-run a logged session deterministically.

    The log carries the config, every control change, and the realized class
    per hop, so the rebuilt loop reproduces the original TickReport stream
    bit for bit (the model file is located via the manifest unless weights
    are passed explicitly; a checksum mismatch is an error).
    """
    manifest, records = read_manifest(log_path, SESSION_FORMAT)
    cfg = PipelineConfig.from_dict(manifest["config"])
    if weights is None:
        model_path = manifest["model_path"]
        if sha256_file(model_path) != manifest["model_sha256"]:
            raise ValueError(f"model file {model_path} does not match the logged checksum")
        weights = mdl.load_weights(model_path)
    loop = DecodeLoop(cfg, weights)
    reports: list[TickReport] = []
    for rec in records:
        kind = rec.get("type")
        if kind == "params":
            loop.apply_params(
                lam=rec.get("lambda"),
                theta=rec.get("theta"),
                refractory=rec.get("refractory"),
                combo_window=rec.get("combo_window"),
            )
        elif kind == "source":
            loop.apply_source(SourceConfig.from_dict(rec))
        elif kind == "tick":
            reports.append(loop.step_hop(forced_class=rec["source_class"]))
        else:
            raise ValueError(f"unknown session record type {kind!r}")
    return cfg, reports


def read_session_ticks(log_path) -> list[dict]:
    """The logged tick records, as parsed dicts in stream order."""
    _, records = read_manifest(log_path, SESSION_FORMAT)
    return [rec for rec in records if rec.get("type") == "tick"]


def run_train(
    weights_path,
    report_path=None,
    n_per_class: int = 100,
    data_seed: int = 7,
    split_seed: int = 0,
    train_seed: int = 0,
    cfg_model: mdl.ModelConfig = mdl.ModelConfig(),
    epochs: int = 30,
    batch_size: int = 16,
    lr: float = 1e-3,
    dataset: Dataset | None = None,
) -> tuple[mdl.Weights, mdl.TrainReport]:
    """Offline stage: build (or take) a dataset, split 80/20, train, persist."""
    if dataset is None:
        dataset = build_dataset(n_per_class, data_seed)
    d_train, d_val = split_dataset(dataset, 0.8, split_seed)
    weights, report = mdl.train(
        d_train, d_val, cfg_model, epochs=epochs, batch_size=batch_size, lr=lr, seed=train_seed
    )
    mdl.save_weights(weights_path, weights)
    if report_path is not None:
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    return weights, report
