"""Canonical wire protocol for duplex voice-agent sessions.

Frames are single-line JSON objects with a mandatory ``kind`` field; one
frame per line. Unknown extra fields are ignored on decode so older peers
tolerate newer frames. The exact field names are documented in protocol.md
at the repository root.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Union

Scalar = Union[str, int, float, bool]

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

PARAM_TYPES = ("string", "number", "integer", "boolean", "enum")


class ProtocolError(Exception):
    """Base class for wire protocol failures."""


class MalformedFrame(ProtocolError):
    """Frame is not parseable as a flat JSON object with the required fields."""


class UnknownKind(ProtocolError):
    """Frame parsed but its ``kind`` tag is not a known event variant."""


class InvariantViolation(ProtocolError):
    """Frame parsed into a known variant but a field value breaks an invariant."""


class InputMode(Enum):
    DIRECT_AUDIO = "direct_audio"
    STT = "stt"


# ---------------------------------------------------------------------------
# Event variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AudioInputChunk:
    """One opaque chunk of captured user audio. A zero-duration chunk marks
    end of utterance (see protocol.md)."""

    seq: int
    duration_ms: int
    payload_ref: str = ""


@dataclass(frozen=True)
class TextInput:
    text: str
    confidence: float | None = None


@dataclass(frozen=True)
class ContextInjection:
    """Non-spoken message grounding the model in an event; the flag says
    whether the backend should produce a turn in response."""

    message: str
    request_response: bool


@dataclass(frozen=True)
class ModelTextDelta:
    turn_id: str
    text: str


@dataclass(frozen=True)
class ModelAudioDelta:
    turn_id: str
    duration_ms: int


@dataclass(frozen=True)
class ModelTurnStart:
    turn_id: str


@dataclass(frozen=True)
class ModelTurnEnd:
    turn_id: str


@dataclass(frozen=True)
class ToolCallRequest:
    call_id: str
    name: str
    arguments: dict[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True)
class ToolResultEvent:
    call_id: str
    payload: str
    is_error: bool = False


@dataclass(frozen=True)
class InterruptRequest:
    turn_id: str


@dataclass(frozen=True)
class ToolParam:
    name: str
    type: str
    required: bool = False
    enum_values: tuple[str, ...] | None = None


@dataclass(frozen=True)
class ToolSchema:
    name: str
    description: str
    parameters: tuple[ToolParam, ...] = ()


@dataclass(frozen=True)
class SessionConfig:
    tool_schemas: tuple[ToolSchema, ...] = ()
    input_mode: InputMode = InputMode.DIRECT_AUDIO
    system_prompt: str = ""


SessionEvent = Union[
    AudioInputChunk,
    TextInput,
    ContextInjection,
    ModelTextDelta,
    ModelAudioDelta,
    ModelTurnStart,
    ModelTurnEnd,
    ToolCallRequest,
    ToolResultEvent,
    InterruptRequest,
    SessionConfig,
]

# Variants a client may originate (everything else flows server -> client).
CLIENT_EVENT_TYPES = (
    AudioInputChunk,
    TextInput,
    ContextInjection,
    ToolResultEvent,
    InterruptRequest,
    SessionConfig,
)


# ---------------------------------------------------------------------------
# Invariant checks
# ---------------------------------------------------------------------------


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise InvariantViolation(msg)


def _is_scalar(value: Any) -> bool:
    if isinstance(value, bool):
        return True
    if isinstance(value, (int, str)):
        return True
    if isinstance(value, float):
        return math.isfinite(value)
    return False


def validate_schema(schema: ToolSchema) -> None:
    """Raise InvariantViolation unless the tool schema is well-formed."""
    _check(bool(_NAME_RE.match(schema.name)), f"bad tool name {schema.name!r}")
    _check(isinstance(schema.description, str), "description must be a string")
    seen: set[str] = set()
    for p in schema.parameters:
        _check(bool(_NAME_RE.match(p.name)), f"bad parameter name {p.name!r}")
        _check(p.name not in seen, f"duplicate parameter {p.name!r}")
        seen.add(p.name)
        _check(p.type in PARAM_TYPES, f"unknown parameter type {p.type!r}")
        if p.type == "enum":
            _check(
                p.enum_values is not None and len(p.enum_values) > 0,
                f"enum parameter {p.name!r} needs enum_values",
            )
            for v in p.enum_values or ():
                _check(isinstance(v, str), "enum_values must be strings")


def validate_event(event: SessionEvent) -> None:
    """Raise InvariantViolation if a per-frame invariant does not hold.

    Session-scoped invariants (seq monotonicity, call_id and turn_id
    correlation) are checked by the parties that hold session state, not here.
    """
    if isinstance(event, AudioInputChunk):
        _check(isinstance(event.seq, int) and not isinstance(event.seq, bool), "seq must be an integer")
        _check(event.seq >= 0, "seq must be >= 0")
        _check(
            isinstance(event.duration_ms, int) and not isinstance(event.duration_ms, bool),
            "duration_ms must be an integer",
        )
        _check(event.duration_ms >= 0, "duration_ms must be >= 0")
        _check(isinstance(event.payload_ref, str), "payload_ref must be a string")
    elif isinstance(event, TextInput):
        _check(isinstance(event.text, str), "text must be a string")
        if event.confidence is not None:
            _check(
                isinstance(event.confidence, (int, float)) and not isinstance(event.confidence, bool),
                "confidence must be a number",
            )
            _check(0.0 <= event.confidence <= 1.0, "confidence must be in [0, 1]")
    elif isinstance(event, ContextInjection):
        _check(isinstance(event.message, str), "message must be a string")
        _check(isinstance(event.request_response, bool), "request_response must be a boolean")
    elif isinstance(event, ModelTextDelta):
        _check(isinstance(event.turn_id, str) and event.turn_id != "", "turn_id must be a non-empty string")
        _check(isinstance(event.text, str), "text must be a string")
    elif isinstance(event, ModelAudioDelta):
        _check(isinstance(event.turn_id, str) and event.turn_id != "", "turn_id must be a non-empty string")
        _check(
            isinstance(event.duration_ms, int) and not isinstance(event.duration_ms, bool),
            "duration_ms must be an integer",
        )
        _check(event.duration_ms >= 0, "duration_ms must be >= 0")
    elif isinstance(event, (ModelTurnStart, ModelTurnEnd, InterruptRequest)):
        _check(isinstance(event.turn_id, str) and event.turn_id != "", "turn_id must be a non-empty string")
    elif isinstance(event, ToolCallRequest):
        _check(isinstance(event.call_id, str) and event.call_id != "", "call_id must be a non-empty string")
        _check(bool(_NAME_RE.match(event.name)), f"bad tool name {event.name!r}")
        _check(isinstance(event.arguments, dict), "arguments must be a map")
        for k, v in event.arguments.items():
            _check(isinstance(k, str), "argument names must be strings")
            _check(_is_scalar(v), f"argument {k!r} must be a scalar")
    elif isinstance(event, ToolResultEvent):
        _check(isinstance(event.call_id, str) and event.call_id != "", "call_id must be a non-empty string")
        _check(isinstance(event.payload, str), "payload must be a string")
        _check(isinstance(event.is_error, bool), "is_error must be a boolean")
    elif isinstance(event, SessionConfig):
        _check(isinstance(event.input_mode, InputMode), "input_mode must be an InputMode")
        _check(isinstance(event.system_prompt, str), "system_prompt must be a string")
        names: set[str] = set()
        for schema in event.tool_schemas:
            validate_schema(schema)
            _check(schema.name not in names, f"duplicate tool schema {schema.name!r}")
            names.add(schema.name)
    else:
        raise InvariantViolation(f"not a session event: {event!r}")


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------


def _schema_to_fields(schema: ToolSchema) -> dict:
    params = []
    for p in schema.parameters:
        entry: dict[str, Any] = {"name": p.name, "type": p.type, "required": p.required}
        if p.enum_values is not None:
            entry["enum_values"] = list(p.enum_values)
        params.append(entry)
    return {"name": schema.name, "description": schema.description, "parameters": params}


def encode_event(event: SessionEvent) -> str:
    """Encode a valid event as one wire frame (a single line, no newline).

    Deterministic: equal events encode to identical frames.
    """
    validate_event(event)
    if isinstance(event, AudioInputChunk):
        obj: dict[str, Any] = {
            "kind": "audio_chunk",
            "seq": event.seq,
            "duration_ms": event.duration_ms,
            "payload_ref": event.payload_ref,
        }
    elif isinstance(event, TextInput):
        obj = {"kind": "text_input", "text": event.text}
        if event.confidence is not None:
            obj["confidence"] = event.confidence
    elif isinstance(event, ContextInjection):
        obj = {
            "kind": "context",
            "message": event.message,
            "request_response": event.request_response,
        }
    elif isinstance(event, ModelTextDelta):
        obj = {"kind": "text_delta", "turn_id": event.turn_id, "text": event.text}
    elif isinstance(event, ModelAudioDelta):
        obj = {"kind": "audio_delta", "turn_id": event.turn_id, "duration_ms": event.duration_ms}
    elif isinstance(event, ModelTurnStart):
        obj = {"kind": "turn_start", "turn_id": event.turn_id}
    elif isinstance(event, ModelTurnEnd):
        obj = {"kind": "turn_end", "turn_id": event.turn_id}
    elif isinstance(event, ToolCallRequest):
        obj = {
            "kind": "tool_call",
            "call_id": event.call_id,
            "name": event.name,
            "arguments": dict(event.arguments),
        }
    elif isinstance(event, ToolResultEvent):
        obj = {
            "kind": "tool_result",
            "call_id": event.call_id,
            "payload": event.payload,
            "is_error": event.is_error,
        }
    elif isinstance(event, InterruptRequest):
        obj = {"kind": "interrupt", "turn_id": event.turn_id}
    elif isinstance(event, SessionConfig):
        obj = {
            "kind": "session_config",
            "tool_schemas": [_schema_to_fields(s) for s in event.tool_schemas],
            "input_mode": event.input_mode.value,
            "system_prompt": event.system_prompt,
        }
    else:  # pragma: no cover - validate_event already rejected it
        raise InvariantViolation(f"not a session event: {event!r}")
    return json.dumps(obj, sort_keys=True, allow_nan=False, ensure_ascii=False)


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


def _reject_constant(value: str) -> None:
    raise ValueError(f"non-finite number {value!r}")


def _get(obj: dict, key: str, types: tuple[type, ...], *, where: str) -> Any:
    if key not in obj:
        raise MalformedFrame(f"{where}: missing field {key!r}")
    value = obj[key]
    # bool is an int subclass; only accept it where bool is explicitly wanted
    if isinstance(value, bool) and bool not in types:
        raise MalformedFrame(f"{where}: field {key!r} has wrong type")
    if not isinstance(value, types):
        raise MalformedFrame(f"{where}: field {key!r} has wrong type")
    return value


def _opt(obj: dict, key: str, types: tuple[type, ...], *, where: str) -> Any:
    if key not in obj or obj[key] is None:
        return None
    return _get(obj, key, types, where=where)


def _decode_schema(entry: Any) -> ToolSchema:
    if not isinstance(entry, dict):
        raise MalformedFrame("session_config: tool schema entries must be objects")
    name = _get(entry, "name", (str,), where="tool_schema")
    description = _get(entry, "description", (str,), where="tool_schema")
    raw_params = entry.get("parameters", [])
    if not isinstance(raw_params, list):
        raise MalformedFrame("tool_schema: parameters must be a list")
    params = []
    for rp in raw_params:
        if not isinstance(rp, dict):
            raise MalformedFrame("tool_schema: parameter entries must be objects")
        p_name = _get(rp, "name", (str,), where="tool_param")
        p_type = _get(rp, "type", (str,), where="tool_param")
        required = rp.get("required", False)
        if not isinstance(required, bool):
            raise MalformedFrame("tool_param: required must be a boolean")
        enum_values = rp.get("enum_values")
        if enum_values is not None:
            if not isinstance(enum_values, list) or not all(isinstance(v, str) for v in enum_values):
                raise MalformedFrame("tool_param: enum_values must be a list of strings")
            enum_values = tuple(enum_values)
        params.append(ToolParam(name=p_name, type=p_type, required=required, enum_values=enum_values))
    return ToolSchema(name=name, description=description, parameters=tuple(params))


def decode_event(frame: str) -> SessionEvent:
    """Decode one wire frame back into an event.

    Round-trip law: ``decode_event(encode_event(e)) == e`` for every valid
    event. Raises MalformedFrame on syntax problems, UnknownKind for an
    unrecognized variant tag, and InvariantViolation for well-typed frames
    whose values break an invariant.
    """
    try:
        obj = json.loads(frame, parse_constant=_reject_constant)
    except ValueError as exc:
        raise MalformedFrame(f"frame is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedFrame("frame must be a JSON object")
    kind = obj.get("kind")
    if kind is None:
        raise MalformedFrame("frame has no kind field")
    if not isinstance(kind, str):
        raise MalformedFrame("kind must be a string")

    if kind == "audio_chunk":
        event: SessionEvent = AudioInputChunk(
            seq=_get(obj, "seq", (int,), where=kind),
            duration_ms=_get(obj, "duration_ms", (int,), where=kind),
            payload_ref=_get(obj, "payload_ref", (str,), where=kind),
        )
    elif kind == "text_input":
        event = TextInput(
            text=_get(obj, "text", (str,), where=kind),
            confidence=_opt(obj, "confidence", (int, float), where=kind),
        )
    elif kind == "context":
        event = ContextInjection(
            message=_get(obj, "message", (str,), where=kind),
            request_response=_get(obj, "request_response", (bool,), where=kind),
        )
    elif kind == "text_delta":
        event = ModelTextDelta(
            turn_id=_get(obj, "turn_id", (str,), where=kind),
            text=_get(obj, "text", (str,), where=kind),
        )
    elif kind == "audio_delta":
        event = ModelAudioDelta(
            turn_id=_get(obj, "turn_id", (str,), where=kind),
            duration_ms=_get(obj, "duration_ms", (int,), where=kind),
        )
    elif kind == "turn_start":
        event = ModelTurnStart(turn_id=_get(obj, "turn_id", (str,), where=kind))
    elif kind == "turn_end":
        event = ModelTurnEnd(turn_id=_get(obj, "turn_id", (str,), where=kind))
    elif kind == "tool_call":
        arguments = _get(obj, "arguments", (dict,), where=kind)
        event = ToolCallRequest(
            call_id=_get(obj, "call_id", (str,), where=kind),
            name=_get(obj, "name", (str,), where=kind),
            arguments=dict(arguments),
        )
    elif kind == "tool_result":
        event = ToolResultEvent(
            call_id=_get(obj, "call_id", (str,), where=kind),
            payload=_get(obj, "payload", (str,), where=kind),
            is_error=_get(obj, "is_error", (bool,), where=kind),
        )
    elif kind == "interrupt":
        event = InterruptRequest(turn_id=_get(obj, "turn_id", (str,), where=kind))
    elif kind == "session_config":
        raw_schemas = _get(obj, "tool_schemas", (list,), where=kind)
        mode_raw = _get(obj, "input_mode", (str,), where=kind)
        try:
            mode = InputMode(mode_raw)
        except ValueError as exc:
            raise InvariantViolation(f"unknown input_mode {mode_raw!r}") from exc
        event = SessionConfig(
            tool_schemas=tuple(_decode_schema(s) for s in raw_schemas),
            input_mode=mode,
            system_prompt=_get(obj, "system_prompt", (str,), where=kind),
        )
    else:
        raise UnknownKind(f"unknown frame kind {kind!r}")

    validate_event(event)
    return event


def is_client_event(event: SessionEvent) -> bool:
    """True for variants a client is allowed to send."""
    return isinstance(event, CLIENT_EVENT_TYPES)
