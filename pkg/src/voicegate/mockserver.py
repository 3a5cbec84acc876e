"""Scriptable stand-in for a speech-to-speech model backend.

Replays a scenario script per connected session: waits for user inputs,
streams back text/audio deltas with configurable stage latencies (cascaded
STT+LLM+TTS sums versus a single S2S first-token delay), issues tool calls,
and blocks on their results. Audio deltas are paced in real time so a client
can barge in mid-turn.
"""

from __future__ import annotations

import asyncio
import json
import logging
import shlex
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Union

from .protocol import (
    AudioInputChunk,
    ContextInjection,
    InterruptRequest,
    InvariantViolation,
    ModelAudioDelta,
    ModelTextDelta,
    ModelTurnEnd,
    ModelTurnStart,
    SessionConfig,
    SessionEvent,
    TextInput,
    ToolCallRequest,
    ToolResultEvent,
    decode_event,
    encode_event,
    validate_event,
)

logger = logging.getLogger(__name__)

AUDIO_DELTA_CHUNK_MS = 200
TEXT_DELTA_CHUNK_CHARS = 40


class ScenarioError(Exception):
    pass


class ParseError(ScenarioError):
    pass


class ValidationError(ScenarioError):
    pass


class BindFailed(Exception):
    pass


class LatencyMode(Enum):
    CASCADED = "cascaded"
    S2S = "s2s"


@dataclass(frozen=True)
class LatencyModel:
    """Stage delays applied before a scripted turn's first deltas.

    Cascaded mode sums STT+LLM before the first text delta and adds TTS
    before the first audio delta; S2S mode applies one first-token delay to
    both.
    """

    mode: LatencyMode = LatencyMode.S2S
    stt_ms: int = 0
    llm_ms: int = 0
    tts_ms: int = 0
    first_token_ms: int = 0

    def __post_init__(self):
        for name in ("stt_ms", "llm_ms", "tts_ms", "first_token_ms"):
            if getattr(self, name) < 0:
                raise ValidationError(f"latency {name} must be >= 0")

    def text_delay_ms(self) -> int:
        if self.mode is LatencyMode.CASCADED:
            return self.stt_ms + self.llm_ms
        return self.first_token_ms

    def audio_delay_ms(self) -> int:
        if self.mode is LatencyMode.CASCADED:
            return self.stt_ms + self.llm_ms + self.tts_ms
        return self.first_token_ms


@dataclass(frozen=True)
class OnUserInput:
    """Block until a completed user input whose text contains ``match``
    (case-insensitive); '*' matches anything. Non-matching inputs are
    consumed and skipped."""

    match: str = "*"


@dataclass(frozen=True)
class EmitTurn:
    text: str
    audio_ms: int = 0


@dataclass(frozen=True)
class EmitToolCall:
    label: str
    name: str
    arguments: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AwaitToolResult:
    label: str


@dataclass(frozen=True)
class EmitContextAck:
    """Consume the next context injection without responding."""


ScriptStep = Union[OnUserInput, EmitTurn, EmitToolCall, AwaitToolResult, EmitContextAck]


@dataclass(frozen=True)
class Scenario:
    steps: tuple[ScriptStep, ...] = ()
    latency: LatencyModel = LatencyModel()

    def validate(self) -> None:
        labels: set[str] = set()
        emitted: set[str] = set()
        for i, step in enumerate(self.steps):
            if isinstance(step, EmitToolCall):
                if step.label in labels:
                    raise ValidationError(f"step {i}: duplicate tool call label {step.label!r}")
                labels.add(step.label)
                emitted.add(step.label)
            elif isinstance(step, AwaitToolResult):
                if step.label not in emitted:
                    raise ValidationError(
                        f"step {i}: await_tool_result {step.label!r} has no preceding emit_tool_call"
                    )


# ---------------------------------------------------------------------------
# Scenario file parsing (one step per line; grammar in scenarios/README.md)
# ---------------------------------------------------------------------------


def _parse_kv(tokens: list[str], lineno: int, allowed: tuple[str, ...]) -> dict[str, str]:
    out: dict[str, str] = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or not key:
            raise ParseError(f"line {lineno}: expected key=value, got {tok!r}")
        if key not in allowed:
            raise ParseError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _kv_int(kv: dict[str, str], key: str, lineno: int, default: int | None = None) -> int:
    if key not in kv:
        if default is None:
            raise ParseError(f"line {lineno}: missing {key}=")
        return default
    try:
        return int(kv[key])
    except ValueError:
        raise ParseError(f"line {lineno}: {key} must be an integer") from None


def parse_scenario(text: str) -> Scenario:
    steps: list[ScriptStep] = []
    latency = LatencyModel()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            tokens = shlex.split(line, comments=True)
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
        if not tokens:
            continue
        directive, rest = tokens[0], tokens[1:]
        if directive == "latency":
            if not rest:
                raise ParseError(f"line {lineno}: latency needs a mode")
            mode_name, kv = rest[0], _parse_kv(
                rest[1:], lineno, ("stt_ms", "llm_ms", "tts_ms", "first_token_ms")
            )
            try:
                mode = LatencyMode(mode_name)
            except ValueError:
                raise ParseError(f"line {lineno}: unknown latency mode {mode_name!r}") from None
            try:
                latency = LatencyModel(
                    mode=mode,
                    stt_ms=_kv_int(kv, "stt_ms", lineno, 0),
                    llm_ms=_kv_int(kv, "llm_ms", lineno, 0),
                    tts_ms=_kv_int(kv, "tts_ms", lineno, 0),
                    first_token_ms=_kv_int(kv, "first_token_ms", lineno, 0),
                )
            except ValidationError as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
        elif directive == "on_user_input":
            kv = _parse_kv(rest, lineno, ("match",))
            steps.append(OnUserInput(match=kv.get("match", "*")))
        elif directive == "emit_turn":
            kv = _parse_kv(rest, lineno, ("text", "audio_ms"))
            if "text" not in kv:
                raise ParseError(f"line {lineno}: emit_turn needs text=")
            steps.append(EmitTurn(text=kv["text"], audio_ms=_kv_int(kv, "audio_ms", lineno, 0)))
        elif directive == "emit_tool_call":
            kv = _parse_kv(rest, lineno, ("label", "name", "args"))
            for need in ("label", "name"):
                if need not in kv:
                    raise ParseError(f"line {lineno}: emit_tool_call needs {need}=")
            arguments: dict = {}
            if "args" in kv:
                try:
                    arguments = json.loads(kv["args"])
                except ValueError as exc:
                    raise ParseError(f"line {lineno}: args is not valid JSON: {exc}") from exc
                if not isinstance(arguments, dict):
                    raise ParseError(f"line {lineno}: args must be a JSON object")
            try:
                validate_event(ToolCallRequest(call_id="probe", name=kv["name"], arguments=arguments))
            except InvariantViolation as exc:
                raise ParseError(f"line {lineno}: {exc}") from None
            steps.append(EmitToolCall(label=kv["label"], name=kv["name"], arguments=arguments))
        elif directive == "await_tool_result":
            kv = _parse_kv(rest, lineno, ("label",))
            if "label" not in kv:
                raise ParseError(f"line {lineno}: await_tool_result needs label=")
            steps.append(AwaitToolResult(label=kv["label"]))
        elif directive == "emit_context_ack":
            steps.append(EmitContextAck())
        else:
            raise ParseError(f"line {lineno}: unknown directive {directive!r}")
    scenario = Scenario(steps=tuple(steps), latency=latency)
    scenario.validate()
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Server
# ---------------------------------------------------------------------------


@dataclass
class ReceiptEntry:
    """One inbound event as the server saw it."""

    session_id: int
    t_ms: float
    event: SessionEvent
    note: str = ""  # "" | "unsolicited_result" | "seq_regression" | "protocol_error"


@dataclass
class _UserInput:
    text: str
    t_done_ms: float


class _SessionScript:
    """Independent script interpreter for one connected session."""

    def __init__(self, server: "MockS2SServer", session_id: int,
                 reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self.server = server
        self.session_id = session_id
        self.reader = reader
        self.writer = writer
        self.scenario = server.scenario
        self.inputs: asyncio.Queue[_UserInput] = asyncio.Queue()
        self.contexts: asyncio.Queue[ContextInjection] = asyncio.Queue()
        self.tool_results: asyncio.Queue[ToolResultEvent] = asyncio.Queue()
        self.interrupted = asyncio.Event()
        self.interrupted_turn: str | None = None
        self.issued_calls: dict[str, str] = {}  # label -> call_id
        self.issued_ids: set[str] = set()
        self.last_seq: int | None = None
        self.audio_labels: list[str] = []
        self.anchor_ms: float | None = None  # latency reference point
        self.turn_counter = 0
        self.call_counter = 0
        self.current_turn: str | None = None
        self.configured = False
        self.send_lock = asyncio.Lock()

    def now_ms(self) -> float:
        return time.monotonic() * 1000.0

    async def emit(self, event: SessionEvent) -> None:
        frame = encode_event(event)
        async with self.send_lock:
            self.writer.write(frame.encode("utf-8") + b"\n")
            await self.writer.drain()
        self.server._emitted(self.session_id, event)

    # -- inbound ------------------------------------------------------------

    def _log(self, event: SessionEvent, note: str = "") -> None:
        self.server._received(self.session_id, event, note)

    async def handle_inbound(self, event: SessionEvent) -> None:
        note = ""
        if isinstance(event, SessionConfig):
            self._log(event)
            self.configured = True
            await self.emit(event)  # ack-by-echo
            return
        if not self.configured:
            self._log(event, "before_config")
            logger.warning("session %d: event before config", self.session_id)
            return
        if isinstance(event, AudioInputChunk):
            if self.last_seq is not None and event.seq <= self.last_seq:
                note = "seq_regression"
            self.last_seq = event.seq
            self._log(event, note)
            if event.duration_ms == 0:
                # end-of-utterance sentinel: close out the buffered labels
                text = " ".join(lbl for lbl in self.audio_labels if lbl)
                self.audio_labels = []
                self.anchor_ms = self.now_ms()
                await self.inputs.put(_UserInput(text=text, t_done_ms=self.anchor_ms))
            else:
                self.audio_labels.append(event.payload_ref)
            return
        if isinstance(event, TextInput):
            self._log(event)
            self.anchor_ms = self.now_ms()
            await self.inputs.put(_UserInput(text=event.text, t_done_ms=self.anchor_ms))
            return
        if isinstance(event, ContextInjection):
            self._log(event)
            await self.contexts.put(event)
            if event.request_response:
                # A response-soliciting injection competes with spoken input.
                self.anchor_ms = self.now_ms()
                await self.inputs.put(_UserInput(text=event.message, t_done_ms=self.anchor_ms))
            return
        if isinstance(event, ToolResultEvent):
            if event.call_id not in self.issued_ids:
                note = "unsolicited_result"
            self._log(event, note)
            self.anchor_ms = self.now_ms()
            await self.tool_results.put(event)
            return
        if isinstance(event, InterruptRequest):
            self._log(event)
            if self.current_turn is not None and event.turn_id == self.current_turn:
                self.interrupted_turn = event.turn_id
                self.interrupted.set()
            return
        self._log(event, "unexpected_variant")

    async def read_loop(self) -> None:
        while True:
            line = await self.reader.readline()
            if not line:
                return
            text = line.decode("utf-8", errors="replace").rstrip("\r\n")
            if not text:
                continue
            try:
                event = decode_event(text)
            except Exception as exc:
                logger.warning("session %d: undecodable frame: %s", self.session_id, exc)
                self.server._received_raw(self.session_id, text, "protocol_error")
                continue
            await self.handle_inbound(event)

    # -- script execution ---------------------------------------------------

    async def _sleep_until_anchor_offset(self, offset_ms: int) -> None:
        if self.anchor_ms is None:
            return
        remaining = (self.anchor_ms + offset_ms) - self.now_ms()
        if remaining > 0:
            await asyncio.sleep(remaining / 1000.0)

    async def _interruptible_sleep(self, seconds: float) -> bool:
        """Sleep; True if an interrupt for the current turn arrived."""
        if self.interrupted.is_set():
            return True
        waiter = asyncio.ensure_future(self.interrupted.wait())
        done, pending = await asyncio.wait({waiter}, timeout=seconds)
        for task in pending:
            task.cancel()
        return waiter in done

    async def run_emit_turn(self, step: EmitTurn) -> None:
        self.turn_counter += 1
        turn_id = f"turn-{self.session_id}-{self.turn_counter}"
        self.current_turn = turn_id
        self.interrupted.clear()
        latency = self.scenario.latency

        await self._sleep_until_anchor_offset(latency.text_delay_ms())
        await self.emit(ModelTurnStart(turn_id=turn_id))
        aborted = False
        for i in range(0, len(step.text), TEXT_DELTA_CHUNK_CHARS):
            if self.interrupted.is_set():
                aborted = True
                break
            await self.emit(ModelTextDelta(turn_id=turn_id, text=step.text[i : i + TEXT_DELTA_CHUNK_CHARS]))
        if step.audio_ms > 0 and not aborted:
            await self._sleep_until_anchor_offset(latency.audio_delay_ms())
            remaining = step.audio_ms
            while remaining > 0:
                if self.interrupted.is_set():
                    aborted = True
                    break
                chunk = min(AUDIO_DELTA_CHUNK_MS, remaining)
                await self.emit(ModelAudioDelta(turn_id=turn_id, duration_ms=chunk))
                remaining -= chunk
                # real-time pacing: the chunk "plays" before the next one streams
                if remaining > 0 and await self._interruptible_sleep(chunk / 1000.0):
                    aborted = True
                    break
        await self.emit(ModelTurnEnd(turn_id=turn_id))
        self.current_turn = None
        if aborted:
            logger.info("session %d: turn %s aborted by interrupt", self.session_id, turn_id)

    async def run_script(self) -> None:
        for step in self.scenario.steps:
            if isinstance(step, OnUserInput):
                while True:
                    user_input = await self.inputs.get()
                    if step.match == "*" or step.match.lower() in user_input.text.lower():
                        break
                    logger.info(
                        "session %d: input %r does not match %r; skipped",
                        self.session_id, user_input.text, step.match,
                    )
            elif isinstance(step, EmitTurn):
                await self.run_emit_turn(step)
            elif isinstance(step, EmitToolCall):
                self.call_counter += 1
                call_id = f"call-{self.session_id}-{self.call_counter}"
                self.issued_calls[step.label] = call_id
                self.issued_ids.add(call_id)
                await self.emit(ToolCallRequest(call_id=call_id, name=step.name, arguments=dict(step.arguments)))
            elif isinstance(step, AwaitToolResult):
                want = self.issued_calls[step.label]
                while True:
                    result = await self.tool_results.get()
                    if result.call_id == want:
                        break
                    logger.info("session %d: result %s while awaiting %s", self.session_id, result.call_id, want)
            elif isinstance(step, EmitContextAck):
                await self.contexts.get()
        # script exhausted; stay connected but respond to nothing further

    async def run(self) -> None:
        reader_task = asyncio.ensure_future(self.read_loop())
        script_task = asyncio.ensure_future(self.run_script())
        try:
            done, _ = await asyncio.wait(
                {reader_task, script_task}, return_when=asyncio.FIRST_COMPLETED
            )
            if script_task in done and script_task.exception() is not None:
                logger.error(
                    "session %d: script failed: %s", self.session_id, script_task.exception()
                )
            if reader_task in done:
                script_task.cancel()
            else:
                await reader_task  # keep logging inbound after script end
        except asyncio.CancelledError:
            pass
        finally:
            for t in (reader_task, script_task):
                t.cancel()
            try:
                self.writer.close()
                await self.writer.wait_closed()
            except (ConnectionError, OSError):
                pass


class MockS2SServer:
    """Serves one scenario to any number of independent sessions."""

    def __init__(self, scenario: Scenario, host: str = "127.0.0.1", port: int = 0):
        self.scenario = scenario
        self.host = host
        self.port = port
        self._server: asyncio.AbstractServer | None = None
        self._sessions: list[_SessionScript] = []
        self._session_tasks: set[asyncio.Task] = set()
        self._next_session_id = 0
        self._receipts: list[ReceiptEntry] = []
        self._emissions: list[tuple[int, SessionEvent]] = []
        self._t0 = time.monotonic()

    def _rel_ms(self) -> float:
        return (time.monotonic() - self._t0) * 1000.0

    def _received(self, session_id: int, event: SessionEvent, note: str = "") -> None:
        self._receipts.append(ReceiptEntry(session_id, self._rel_ms(), event, note))

    def _received_raw(self, session_id: int, raw: str, note: str) -> None:
        self._receipts.append(ReceiptEntry(session_id, self._rel_ms(), TextInput(text=raw), note))

    def _emitted(self, session_id: int, event: SessionEvent) -> None:
        self._emissions.append((session_id, event))

    async def _on_connect(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        self._next_session_id += 1
        session = _SessionScript(self, self._next_session_id, reader, writer)
        self._sessions.append(session)
        task = asyncio.ensure_future(session.run())
        self._session_tasks.add(task)
        task.add_done_callback(self._session_tasks.discard)

    async def start(self) -> None:
        try:
            self._server = await asyncio.start_server(self._on_connect, self.host, self.port)
        except OSError as exc:
            raise BindFailed(f"cannot bind {self.host}:{self.port}: {exc}") from exc
        sock = self._server.sockets[0]
        self.port = sock.getsockname()[1]
        logger.info("mock backend listening on %s:%d", self.host, self.port)

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None
        for task in list(self._session_tasks):
            task.cancel()
        if self._session_tasks:
            await asyncio.gather(*self._session_tasks, return_exceptions=True)

    def receipt_log(self) -> list[ReceiptEntry]:
        """Every inbound event across sessions, in exact arrival order."""
        return list(self._receipts)

    def emission_log(self) -> list[tuple[int, SessionEvent]]:
        """Every emitted event, in send order (timestamps excluded)."""
        return list(self._emissions)


async def serve(scenario: Scenario, bind_address: str) -> MockS2SServer:
    """Start a mock backend on ``host:port`` (port 0 picks a free one)."""
    host, _, port = bind_address.rpartition(":")
    if not host:
        raise BindFailed(f"bind address must be host:port, got {bind_address!r}")
    try:
        server = MockS2SServer(scenario, host, int(port))
    except ValueError:
        raise BindFailed(f"bad port in {bind_address!r}") from None
    await server.start()
    return server
