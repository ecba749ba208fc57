"""Live telemetry and control service for the operator cockpit.

One WebSocket endpoint speaks the line-delimited message protocol documented
in PROTOCOL.md: every message is a single JSON object sent as one text frame
ending in a newline (so a captured stream is also a valid session file).
The decode loop advances on a wall-clock hop cadence inside a single asyncio
task; inbound control messages are queued and applied between hops, which
pins every parameter change to a deterministic tick boundary.

Slow consumers never stall the loop: each client has a bounded tick buffer
that drops oldest entries, while acks, errors, and parameter broadcasts ride
an unbounded control lane that is never dropped.
"""

from __future__ import annotations

import asyncio
import json
from collections import deque

from websockets.asyncio.server import serve as ws_serve
from websockets.exceptions import ConnectionClosed

from . import model as mdl
from .command import BASE_MOVES, COMBO_MOVES
from .fileio import dump_line
from .pipeline import (
    PROTOCOL_VERSION,
    DecodeLoop,
    PipelineConfig,
    SessionLogWriter,
    SourceConfig,
)
from .robot import JOINTS
from .signal_core import CHANNELS, FS_HZ
from .synth import CLASS_NAMES, N_CLASSES

TICK_BUFFER = 256


class _Outbox:
    """Per-client outbound queues: lossless control lane, lossy tick lane."""

    def __init__(self, max_ticks: int = TICK_BUFFER):
        self.control: deque[str] = deque()
        self.ticks: deque[str] = deque(maxlen=max_ticks)
        self._wakeup = asyncio.Event()

    def put_control(self, line: str) -> None:
        self.control.append(line)
        self._wakeup.set()

    def put_tick(self, line: str) -> None:
        self.ticks.append(line)  # deque maxlen drops the oldest on overflow
        self._wakeup.set()

    async def get(self) -> str:
        while not self.control and not self.ticks:
            self._wakeup.clear()
            await self._wakeup.wait()
        return self.control.popleft() if self.control else self.ticks.popleft()


def _msg(kind: str, **fields) -> str:
    return dump_line({"type": kind, "v": PROTOCOL_VERSION, **fields})


class TelemetryService:
    """Owns the decode loop, the hop pacing task, and the client set."""

    def __init__(
        self,
        cfg: PipelineConfig,
        weights: mdl.Weights,
        log_path=None,
        max_hops: int | None = None,
    ):
        self.cfg = cfg
        self.loop = DecodeLoop(cfg, weights)
        self.paused = False
        self.max_hops = max_hops
        self._clients: set[_Outbox] = set()
        self._pending: deque[tuple[_Outbox, dict]] = deque()
        self._log = SessionLogWriter(log_path, cfg, cfg.model_path) if log_path else None
        self._done = asyncio.Event()

    # -- control handling ---------------------------------------------------

    def _hello(self) -> str:
        return _msg(
            "hello",
            fs=FS_HZ,
            hop_ms=self.cfg.hop_ms,
            channels=list(CHANNELS),
            class_names=list(CLASS_NAMES),
            base_moves=[m.value for m in BASE_MOVES],
            combo_moves=[m.value for m in COMBO_MOVES],
            joints=list(JOINTS),
            params=self.loop.params_dict(),
            paused=self.paused,
            tick=self.loop.tick,
        )

    def _broadcast_control(self, line: str) -> None:
        for outbox in self._clients:
            outbox.put_control(line)

    def _apply_control(self, outbox: _Outbox, msg: dict) -> None:
        """Apply one inbound message at the hop boundary and ack or err it."""
        seq = msg.get("seq")
        kind = msg.get("type")
        try:
            if kind == "set_params":
                params = self.loop.apply_params(
                    lam=msg.get("lambda"),
                    theta=msg.get("theta"),
                    refractory=msg.get("refractory"),
                    combo_window=msg.get("combo_window"),
                )
                if self._log:
                    self._log.append_params(self.loop.tick + 1, params)
                self._broadcast_control(_msg("params", paused=self.paused, **params))
            elif kind == "inject":
                self.loop.source.inject(int(msg["class_id"]), int(msg.get("hold_hops", 1)))
            elif kind == "pause":
                self.paused = True
                self._broadcast_control(_msg("params", paused=True, **self.loop.params_dict()))
            elif kind == "resume":
                self.paused = False
                self._broadcast_control(_msg("params", paused=False, **self.loop.params_dict()))
            elif kind == "set_source":
                source = SourceConfig.from_dict(msg)
                self.loop.apply_source(source)
                if self._log:
                    self._log.append_source(self.loop.tick + 1, source)
            else:
                raise ValueError(f"unknown message type {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            outbox.put_control(_msg("err", seq=seq, reason=str(exc)))
            return
        outbox.put_control(_msg("ack", seq=seq, applied_before_tick=self.loop.tick + 1))

    # -- hop pacing ----------------------------------------------------------

    async def run_hops(self) -> None:
        """Advance the decode loop on the configured wall-clock cadence."""
        loop_time = asyncio.get_running_loop().time
        hop_s = self.cfg.hop_ms / 1000.0
        next_deadline = loop_time() + hop_s
        try:
            while self.max_hops is None or self.loop.tick < self.max_hops:
                await asyncio.sleep(max(0.0, next_deadline - loop_time()))
                next_deadline += hop_s
                while self._pending:
                    outbox, msg = self._pending.popleft()
                    self._apply_control(outbox, msg)
                if self.paused:
                    continue
                report = self.loop.step_hop()
                line = report.to_line()
                if self._log:
                    self._log.append_tick(report)
                for outbox in self._clients:
                    outbox.put_tick(line + "\n")
        finally:
            if self._log:
                self._log.close()
            self._done.set()

    # -- per-connection handling ----------------------------------------------

    async def handle_client(self, ws) -> None:
        outbox = _Outbox()
        outbox.put_control(self._hello())
        self._clients.add(outbox)

        async def writer():
            while True:
                line = await outbox.get()
                await ws.send(line if line.endswith("\n") else line + "\n")

        writer_task = asyncio.create_task(writer())
        try:
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict):
                        raise ValueError("message must be a JSON object")
                except (json.JSONDecodeError, ValueError) as exc:
                    outbox.put_control(_msg("err", seq=None, reason=f"malformed message: {exc}"))
                    continue
                # Applied between hops; the ack names the tick boundary.
                self._pending.append((outbox, msg))
        except ConnectionClosed:
            pass
        finally:
            writer_task.cancel()
            self._clients.discard(outbox)

    async def serve_forever(self, host: str = "127.0.0.1", port: int | None = None) -> None:
        port = port if port is not None else self.cfg.service_port
        hopper = asyncio.create_task(self.run_hops())
        async with ws_serve(self.handle_client, host, port):
            await self._done.wait()
        hopper.cancel()


def serve(
    cfg: PipelineConfig,
    weights: mdl.Weights,
    host: str = "127.0.0.1",
    port: int | None = None,
    log_path=None,
    max_hops: int | None = None,
) -> None:
    """Blocking entry point: run the service until max_hops (or forever)."""
    service = TelemetryService(cfg, weights, log_path=log_path, max_hops=max_hops)
    asyncio.run(service.serve_forever(host=host, port=port))
