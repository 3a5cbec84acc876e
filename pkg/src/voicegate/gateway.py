"""Gateway: wires session, turn manager, tools, robot sim, and rules together.

Everything flows through one consumer loop over a single queue (session
events, console commands, perception ticks, robot events, and completed tool
executions), so the transcript order is the system's total order. Tool
handlers run off-loop in worker threads and re-enter through the same queue.
"""

from __future__ import annotations

import asyncio
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .builtin_tools import ExternalClientConfig, build_registry, make_external_clients
from .clock import Clock
from .protocol import (
    AudioInputChunk,
    ContextInjection,
    InputMode,
    InterruptRequest,
    ModelAudioDelta,
    ModelTextDelta,
    ModelTurnEnd,
    ModelTurnStart,
    SessionConfig,
    SessionEvent,
    TextInput,
    ToolCallRequest,
    ToolResultEvent,
)
from .registry import ExecutionContext, ToolCall, ToolRegistry
from .rules import EventKind, PerceptionEvent, RuleEngine, firing_to_injection, load_rules
from .session import SessionClosed, make_adapter, open_session
from .sim import (
    HardwareChanged,
    MovementBlocked,
    SimError,
    SimulatedRobotController,
    TouchSensor,
    blockage_message,
    blocked_reflex,
    inject_touch,
    load_world,
)
from .turns import TurnActionKind, TurnEvent, TurnLoop, TurnState

logger = logging.getLogger(__name__)

AUDIO_CHUNK_MS = 500
DEFAULT_STT_CONFIDENCE = 0.92
SEND_TEXT_MS_PER_CHAR = 60
SEND_TEXT_MIN_MS = 300
DEFAULT_SYSTEM_PROMPT = (
    "You are a small social robot. Keep replies short and spoken-friendly, "
    "use your tools when they help, and react to context messages."
)


class GatewayError(Exception):
    pass


@dataclass(frozen=True)
class GatewayConfig:
    backend: str
    adapter: str = "canonical"
    input_mode: InputMode = InputMode.DIRECT_AUDIO
    world_path: Optional[str] = None
    rules_path: Optional[str] = None
    gate_during_thinking: bool = True
    console_bind: Optional[str] = None
    transcript_path: Optional[str] = None
    latency_report_path: Optional[str] = None
    system_prompt: str = DEFAULT_SYSTEM_PROMPT
    stt_confidence: float = DEFAULT_STT_CONFIDENCE
    tick_interval_s: float = 1.0
    external: ExternalClientConfig = field(default_factory=ExternalClientConfig)

    def validate(self) -> None:
        if not self.backend:
            raise GatewayError("backend endpoint is required")
        for path in (self.world_path, self.rules_path):
            if path is not None and not Path(path).exists():
                raise GatewayError(f"no such file: {path}")


@dataclass(frozen=True)
class TranscriptRecord:
    seq: int
    t_ms: float
    direction: str  # user | model | system
    kind: str  # text | audio-ms | context | function-card | state-change
    body: dict

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "t_ms": round(self.t_ms, 3),
            "direction": self.direction,
            "kind": self.kind,
            "body": self.body,
        }


@dataclass(frozen=True)
class TurnLatencySample:
    turn_index: int
    t_user_end: float
    t_first_delta: float

    @property
    def latency_ms(self) -> float:
        return self.t_first_delta - self.t_user_end

    def to_dict(self) -> dict:
        return {
            "turn_index": self.turn_index,
            "t_user_end": round(self.t_user_end, 3),
            "t_first_delta": round(self.t_first_delta, 3),
            "latency_ms": round(self.latency_ms, 3),
        }


@dataclass(frozen=True)
class Utterance:
    """One completed user input, however the operator produced it."""

    text: str = ""
    duration_ms: int = 0


def text_duration_ms(text: str) -> int:
    return max(SEND_TEXT_MIN_MS, SEND_TEXT_MS_PER_CHAR * len(text))


def input_mode_transform(
    mode: InputMode,
    utterance: Utterance,
    *,
    start_seq: int = 1,
    confidence: float = DEFAULT_STT_CONFIDENCE,
) -> list[SessionEvent]:
    """Turn a completed utterance into wire events for the active mode.

    DirectAudio slices the duration into fixed chunks (the text rides along
    as the payload label) and closes with the zero-duration end marker; Stt
    produces one TextInput carrying the simulated transcription confidence.
    """
    if mode is InputMode.STT:
        return [TextInput(text=utterance.text or "(inaudible)", confidence=confidence)]
    events: list[SessionEvent] = []
    seq = start_seq
    remaining = utterance.duration_ms
    first = True
    while remaining > 0:
        chunk = min(AUDIO_CHUNK_MS, remaining)
        events.append(
            AudioInputChunk(seq=seq, duration_ms=chunk, payload_ref=utterance.text if first else "")
        )
        first = False
        seq += 1
        remaining -= chunk
    events.append(AudioInputChunk(seq=seq, duration_ms=0))
    return events


class GatewayService:
    """One live session plus everything attached to it."""

    def __init__(
        self,
        config: GatewayConfig,
        *,
        controller: Optional[SimulatedRobotController] = None,
        registry: Optional[ToolRegistry] = None,
        clock: Optional[Clock] = None,
    ):
        config.validate()
        self.config = config
        self._clock = clock if clock is not None else Clock()
        if controller is not None:
            self._controller = controller
        elif config.world_path is not None:
            self._controller = SimulatedRobotController(load_world(config.world_path))
        else:
            self._controller = SimulatedRobotController()
        self._registry = registry if registry is not None else build_registry()
        self._external = make_external_clients(config.external)
        rules = load_rules(config.rules_path) if config.rules_path else []
        self._rules = RuleEngine(rules)
        self._turns = TurnLoop(gate_during_thinking=config.gate_during_thinking)
        self._input_mode = config.input_mode

        self._queue: asyncio.Queue = asyncio.Queue()
        self._loop: Optional[asyncio.AbstractEventLoop] = None
        self._session = None
        self._tasks: list[asyncio.Task] = []
        self._tool_tasks: set[asyncio.Task] = set()
        self._closed = asyncio.Event()
        self._running = False

        self._transcript: list[TranscriptRecord] = []
        self._transcript_file = None
        self._record_seq = 0
        self._t0_ms = self._clock.now_ms()

        self._latency_samples: list[TurnLatencySample] = []
        self._latency_anchor: Optional[float] = None
        self._turn_meta: dict = {}
        self._cancelled_turns: set[str] = set()
        self._buffered_audio_ms = 0
        self._audio_seq = 1
        self._self_call_ids: set[str] = set()
        self._tool_extras: dict = {}
        self._feed_clients: list[asyncio.Queue] = []

    # -- lifecycle ----------------------------------------------------------

    @property
    def controller(self) -> SimulatedRobotController:
        return self._controller

    @property
    def state(self) -> TurnState:
        return self._turns.state

    def transcript(self) -> list[TranscriptRecord]:
        return list(self._transcript)

    def record_latency(self) -> list[TurnLatencySample]:
        return list(self._latency_samples)

    def session_config(self) -> SessionConfig:
        return SessionConfig(
            tool_schemas=tuple(self._registry.list_schemas()),
            input_mode=self._input_mode,
            system_prompt=self.config.system_prompt,
        )

    async def start(self) -> None:
        self._loop = asyncio.get_running_loop()
        if self.config.transcript_path:
            self._transcript_file = open(self.config.transcript_path, "a", encoding="utf-8")
        adapter = make_adapter(self.config.adapter)
        self._session = await open_session(
            self.session_config(), self.config.backend, adapter
        )
        self._running = True
        self._controller.add_listener(self._on_robot_event_threadsafe)
        self._record_sent(self.session_config())
        await self._apply_actions(self._turns.feed(TurnEvent.SESSION_OPENED))
        self._tasks.append(asyncio.ensure_future(self._pump_session()))
        self._tasks.append(asyncio.ensure_future(self._tick_pump()))
        self._tasks.append(asyncio.ensure_future(self._consume()))

    async def stop(self) -> None:
        if not self._running and self._closed.is_set():
            return
        self._running = False
        for task in self._tool_tasks | set(self._tasks):
            task.cancel()
        if self._tool_tasks or self._tasks:
            await asyncio.gather(*self._tool_tasks, *self._tasks, return_exceptions=True)
        self._tasks.clear()
        if self._session is not None:
            await self._session.close()
        self._write_latency_report()
        if self._transcript_file is not None:
            self._transcript_file.close()
            self._transcript_file = None
        self._closed.set()

    async def wait_closed(self) -> None:
        await self._closed.wait()

    def _write_latency_report(self) -> None:
        if not self.config.latency_report_path:
            return
        lines = ["turn\tlatency_ms"]
        for sample in self._latency_samples:
            lines.append(f"{sample.turn_index}\t{sample.latency_ms:.0f}")
        Path(self.config.latency_report_path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    # -- producers ----------------------------------------------------------

    async def _pump_session(self) -> None:
        try:
            async for event in self._session.events():
                self._queue.put_nowait(("inbound", event))
        except asyncio.CancelledError:
            raise
        except Exception as exc:
            logger.error("session reader failed: %s", exc)
        self._queue.put_nowait(("session_closed",))

    async def _tick_pump(self) -> None:
        while self._running:
            await asyncio.sleep(self.config.tick_interval_s)
            self._queue.put_nowait(("tick",))

    def _on_robot_event_threadsafe(self, event) -> None:
        # listeners fire on tool worker threads and on the loop thread alike
        if self._loop is None:
            return
        self._loop.call_soon_threadsafe(self._queue.put_nowait, ("robot", event))

    def submit_command(self, cmd: dict, reply: Optional[Callable[[dict], None]] = None) -> None:
        self._queue.put_nowait(("command", cmd, reply))

    # -- consumer -----------------------------------------------------------

    async def _consume(self) -> None:
        while True:
            item = await self._queue.get()
            tag = item[0]
            try:
                if tag == "inbound":
                    await self._on_inbound(item[1])
                elif tag == "outbound":
                    await self._send_client_event(item[1])
                elif tag == "command":
                    await self._on_command(item[1], item[2])
                elif tag == "tick":
                    await self._on_tick()
                elif tag == "robot":
                    await self._on_robot_event(item[1])
                elif tag == "card":
                    await self._on_card(item[1], item[2])
                elif tag == "session_closed":
                    await self._apply_actions(self._turns.feed(TurnEvent.SESSION_CLOSED))
                    self._running = False
                    self._closed.set()
                    return
            except SessionClosed:
                logger.warning("backend closed the session")
                await self._apply_actions(self._turns.feed(TurnEvent.SESSION_CLOSED))
                self._running = False
                self._closed.set()
                return
            except asyncio.CancelledError:
                raise
            except Exception:
                logger.exception("error handling %s item", tag)

    # -- transcript & feed ----------------------------------------------------

    def _now_rel_ms(self) -> float:
        return self._clock.now_ms() - self._t0_ms

    def _append(self, direction: str, kind: str, body: dict) -> TranscriptRecord:
        self._record_seq += 1
        record = TranscriptRecord(
            seq=self._record_seq,
            t_ms=self._now_rel_ms(),
            direction=direction,
            kind=kind,
            body=body,
        )
        self._transcript.append(record)
        if self._transcript_file is not None:
            self._transcript_file.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
            self._transcript_file.flush()
        self._broadcast({"kind": "transcript", "record": record.to_dict()})
        return record

    def register_feed(self, queue: asyncio.Queue) -> None:
        """Attach a console client; it first receives a full replay."""
        queue.put_nowait(self._hello_record())
        queue.put_nowait({"kind": "state", "state": self._turns.state.value})
        for record in self._transcript:
            queue.put_nowait({"kind": "transcript", "record": record.to_dict()})
        queue.put_nowait({"kind": "world", "snapshot": self._controller.snapshot()})
        for sample in self._latency_samples:
            queue.put_nowait({"kind": "latency", "sample": sample.to_dict()})
        self._feed_clients.append(queue)

    def unregister_feed(self, queue: asyncio.Queue) -> None:
        if queue in self._feed_clients:
            self._feed_clients.remove(queue)

    def _hello_record(self) -> dict:
        return {
            "kind": "hello",
            "input_mode": self._input_mode.value,
            "tools": [schema.name for schema in self._registry.list_schemas()],
        }

    def _broadcast(self, record: dict) -> None:
        for queue in self._feed_clients:
            queue.put_nowait(record)

    # -- inbound handling -----------------------------------------------------

    async def _on_inbound(self, event: SessionEvent) -> None:
        now = self._now_rel_ms()
        if isinstance(event, ModelTurnStart):
            self._turn_meta[event.turn_id] = {
                "anchor": self._latency_anchor,
                "first_text": None,
                "first_audio": None,
            }
            self._append("model", "state-change", {"turn": "start", "turn_id": event.turn_id})
        elif isinstance(event, ModelTextDelta):
            dropped = event.turn_id in self._cancelled_turns
            meta = self._turn_meta.get(event.turn_id)
            if meta is not None and not dropped and meta["first_text"] is None:
                meta["first_text"] = now
            body = {"turn_id": event.turn_id, "text": event.text}
            if dropped:
                body["dropped"] = True
            self._append("model", "text", body)
        elif isinstance(event, ModelAudioDelta):
            dropped = event.turn_id in self._cancelled_turns
            meta = self._turn_meta.get(event.turn_id)
            if meta is not None and not dropped and meta["first_audio"] is None:
                meta["first_audio"] = now
            if not dropped:
                self._buffered_audio_ms += event.duration_ms
            body = {"turn_id": event.turn_id, "duration_ms": event.duration_ms}
            if dropped:
                body["dropped"] = True
            self._append("model", "audio-ms", body)
        elif isinstance(event, ModelTurnEnd):
            self._append("model", "state-change", {"turn": "end", "turn_id": event.turn_id})
            self._finish_latency_sample(event.turn_id)
            self._cancelled_turns.discard(event.turn_id)
        elif isinstance(event, ToolCallRequest):
            self._append(
                "model",
                "function-card",
                {
                    "phase": "call",
                    "call_id": event.call_id,
                    "name": event.name,
                    "arguments": event.arguments,
                },
            )
        elif isinstance(event, SessionConfig):
            self._append(
                "system", "state-change",
                {"config_echo": True, "input_mode": event.input_mode.value},
            )
        else:
            self._append("system", "state-change", {"event": type(event).__name__})
        await self._apply_actions(self._turns.feed_inbound(event))
        if isinstance(event, ToolCallRequest):
            await self._apply_actions(self._turns.feed(TurnEvent.TOOL_EXECUTION_STARTED))
            self._spawn_tool(
                ToolCall(call_id=event.call_id, name=event.name, arguments=dict(event.arguments)),
                self_initiated=False,
            )

    def _finish_latency_sample(self, turn_id: str) -> None:
        meta = self._turn_meta.pop(turn_id, None)
        if meta is None:
            return
        t_first = meta["first_audio"] if meta["first_audio"] is not None else meta["first_text"]
        if meta["anchor"] is None or t_first is None:
            return
        sample = TurnLatencySample(
            turn_index=len(self._latency_samples) + 1,
            t_user_end=meta["anchor"],
            t_first_delta=max(t_first, meta["anchor"]),
        )
        self._latency_samples.append(sample)
        self._broadcast({"kind": "latency", "sample": sample.to_dict()})

    # -- outbound handling ----------------------------------------------------

    def _record_sent(self, event: SessionEvent) -> None:
        if isinstance(event, AudioInputChunk):
            body = {"seq": event.seq, "duration_ms": event.duration_ms}
            if event.payload_ref:
                body["payload_ref"] = event.payload_ref
            self._append("user", "audio-ms", body)
        elif isinstance(event, TextInput):
            self._append("user", "text", {"text": event.text, "confidence": event.confidence})
        elif isinstance(event, ContextInjection):
            self._append(
                "system", "context",
                {"message": event.message, "request_response": event.request_response},
            )
        elif isinstance(event, InterruptRequest):
            self._append("user", "state-change", {"interrupt": True, "turn_id": event.turn_id})
        elif isinstance(event, SessionConfig):
            self._append(
                "system", "state-change",
                {"input_mode": event.input_mode.value, "tools": len(event.tool_schemas)},
            )

    async def _send_client_event(self, event: SessionEvent) -> bool:
        """Gate, send, record, and run post-send bookkeeping. False = gated."""
        actions = self._turns.feed_outbound(event)
        if not any(a.kind is TurnActionKind.FORWARD_TO_SESSION for a in actions):
            logger.debug("gated while %s: %r", self._turns.state.value, event)
            return False
        for action in actions:
            if action.kind is not TurnActionKind.FORWARD_TO_SESSION:
                await self._apply_actions([action])
                continue
            await self._session.send(action.event)
            self._record_sent(action.event)
            await self._after_send(action.event)
        return True

    async def _after_send(self, event: SessionEvent) -> None:
        ends_input = (
            (isinstance(event, AudioInputChunk) and event.duration_ms == 0)
            or isinstance(event, TextInput)
            or (isinstance(event, ContextInjection) and event.request_response)
        )
        if ends_input:
            self._latency_anchor = self._now_rel_ms()
            await self._apply_actions(self._turns.feed(TurnEvent.USER_INPUT_END))
        elif isinstance(event, ToolResultEvent):
            self._latency_anchor = self._now_rel_ms()

    async def _apply_actions(self, actions) -> None:
        for action in actions:
            kind = action.kind
            if kind is TurnActionKind.EMIT_STATE_CHANGE:
                self._append("system", "state-change", {"state": action.state.value})
                self._broadcast({"kind": "state", "state": action.state.value})
            elif kind is TurnActionKind.DROP_BUFFERED_AUDIO:
                self._buffered_audio_ms = 0
            elif kind is TurnActionKind.CANCEL_MODEL_TURN:
                turn_id = self._turns.current_turn_id
                if turn_id is not None:
                    self._cancelled_turns.add(turn_id)
                    await self._session.send(InterruptRequest(turn_id=turn_id))
                    self._record_sent(InterruptRequest(turn_id=turn_id))
            # OPEN_MIC/CLOSE_MIC need no side effect here: gating reads state

    # -- tools ----------------------------------------------------------------

    def _spawn_tool(self, call: ToolCall, *, self_initiated: bool) -> None:
        if self_initiated:
            self._self_call_ids.add(call.call_id)

        def on_card(card):
            self._loop.call_soon_threadsafe(
                self._queue.put_nowait, ("card", card, self_initiated)
            )

        def send_context(message: str, request_response: bool) -> None:
            self._loop.call_soon_threadsafe(
                self._queue.put_nowait,
                ("outbound", ContextInjection(message=message, request_response=request_response)),
            )

        context = ExecutionContext(
            robot=self._controller,
            external_clients=self._external,
            send_context=send_context,
            on_card=on_card,
            extras=self._tool_extras,
        )
        task = asyncio.ensure_future(
            asyncio.to_thread(self._registry.execute, call, context)
        )
        self._tool_tasks.add(task)
        task.add_done_callback(self._tool_tasks.discard)

    async def _on_card(self, card, self_initiated: bool) -> None:
        self._append(
            "system",
            "function-card",
            {
                "call_id": card.call_id,
                "name": card.name,
                "arguments": card.arguments,
                "payload": card.payload,
                "is_error": card.is_error,
                "elapsed_ms": card.elapsed_ms,
                "self_initiated": self_initiated,
            },
        )
        result = ToolResultEvent(call_id=card.call_id, payload=card.payload, is_error=card.is_error)
        await self._session.send(result)
        await self._after_send(result)
        await self._apply_actions(self._turns.feed(TurnEvent.TOOL_EXECUTION_ENDED))

    # -- robot & perception ----------------------------------------------------

    async def _on_robot_event(self, event) -> None:
        now = self._clock.now_ms()
        if isinstance(event, TouchSensor):
            await self._send_client_event(inject_touch(event.sensor))
            firings = self._rules.feed(
                PerceptionEvent(kind=EventKind.TOUCH, timestamp_ms=now, sensor=event.sensor)
            )
            await self._dispatch_firings(firings)
        elif isinstance(event, MovementBlocked):
            await self._send_client_event(
                ContextInjection(message=blockage_message(event), request_response=False)
            )
            self._spawn_tool(blocked_reflex(event), self_initiated=True)
        elif isinstance(event, HardwareChanged):
            message = f"[Hardware update: {event.field} = {event.value}]"
            await self._send_client_event(
                ContextInjection(message=message, request_response=False)
            )

    async def _on_tick(self) -> None:
        now = self._clock.now_ms()
        for kind_name, fields in self._controller.perception_tick():
            event = PerceptionEvent(
                kind=EventKind(kind_name),
                timestamp_ms=now,
                person_id=fields.get("person_id", ""),
                identity=fields.get("identity", ""),
                meters=fields.get("meters", -1.0),
            )
            await self._dispatch_firings(self._rules.feed(event))
        self._broadcast({"kind": "world", "snapshot": self._controller.snapshot()})

    async def _dispatch_firings(self, firings) -> None:
        for firing in firings:
            self._broadcast({"kind": "info", "message": f"rule {firing.rule_id} fired"})
            await self._send_client_event(firing_to_injection(firing))

    # -- console commands -------------------------------------------------------

    async def _on_command(self, cmd: dict, reply: Optional[Callable[[dict], None]]) -> None:
        def fail(message: str) -> None:
            logger.warning("bad console command: %s", message)
            if reply is not None:
                reply({"kind": "error", "message": message})

        def info(message: str) -> None:
            if reply is not None:
                reply({"kind": "info", "message": message})

        if not isinstance(cmd, dict) or "cmd" not in cmd:
            fail("commands must be objects with a 'cmd' field")
            return
        name = cmd["cmd"]
        try:
            if name == "send_text":
                text = cmd.get("text")
                if not isinstance(text, str) or not text.strip():
                    fail("send_text needs non-empty 'text'")
                    return
                await self._send_utterance(Utterance(text=text, duration_ms=text_duration_ms(text)))
            elif name == "simulate_audio":
                duration = cmd.get("duration_ms")
                if not isinstance(duration, int) or isinstance(duration, bool) or duration <= 0:
                    fail("simulate_audio needs positive integer 'duration_ms'")
                    return
                label = cmd.get("text", "")
                if not isinstance(label, str):
                    fail("simulate_audio 'text' must be a string")
                    return
                await self._send_utterance(Utterance(text=label, duration_ms=duration))
            elif name == "tap":
                if self._turns.state is TurnState.SPEAKING and self._turns.current_turn_id:
                    await self._apply_actions(self._turns.feed(TurnEvent.INTERRUPT_TAPPED))
                else:
                    info("nothing to interrupt")
            elif name == "touch":
                sensor = cmd.get("sensor")
                if not isinstance(sensor, str):
                    fail("touch needs 'sensor'")
                    return
                self._controller.touch(sensor)  # listener re-enters via the queue
            elif name == "set_input_mode":
                mode_name = cmd.get("mode")
                try:
                    mode = InputMode(mode_name)
                except ValueError:
                    fail(f"unknown input mode: {mode_name!r}")
                    return
                self._input_mode = mode
                await self._send_client_event(self.session_config())
                info(f"input mode is now {mode.value}")
            elif name == "move_person":
                person_id = cmd.get("id")
                x, y = cmd.get("x"), cmd.get("y")
                if not isinstance(person_id, str) or not isinstance(x, (int, float)) or not isinstance(y, (int, float)):
                    fail("move_person needs 'id', 'x', 'y'")
                    return
                self._controller.move_person(person_id, float(x), float(y))
                self._broadcast({"kind": "world", "snapshot": self._controller.snapshot()})
            else:
                fail(f"unknown command: {name!r}")
        except SimError as exc:
            fail(str(exc))

    async def _send_utterance(self, utterance: Utterance) -> None:
        events = input_mode_transform(
            self._input_mode,
            utterance,
            start_seq=self._audio_seq,
            confidence=self.config.stt_confidence,
        )
        self._audio_seq += sum(1 for e in events if isinstance(e, AudioInputChunk))
        for event in events:
            await self._send_client_event(event)


async def run_gateway(config: GatewayConfig, *, controller=None, registry=None) -> GatewayService:
    service = GatewayService(config, controller=controller, registry=registry)
    await service.start()
    return service
