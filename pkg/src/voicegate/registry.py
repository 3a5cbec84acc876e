"""Function-call registry: registration, validation, execution.

Handlers take normalized arguments plus an ExecutionContext and return a
string payload. Every failure mode (unknown tool, bad arguments, missing
capability, handler exception) is folded into an is_error ToolResult so the
model always sees exactly one result per call and can reason about failures.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

from .protocol import ToolSchema, validate_schema

logger = logging.getLogger(__name__)


class Capability(Enum):
    ROBOT = "robot"
    NETWORK = "network"


class RegistryError(Exception):
    pass


class DuplicateName(RegistryError):
    pass


class ValidationFailure(RegistryError):
    """Base for argument validation errors; message is model-facing."""


class UnknownTool(ValidationFailure):
    def __init__(self, name: str):
        super().__init__(f"unknown tool: {name}")
        self.name = name


class MissingParam(ValidationFailure):
    def __init__(self, param: str):
        super().__init__(f"missing required parameter: {param}")
        self.param = param


class TypeMismatch(ValidationFailure):
    def __init__(self, param: str, detail: str = ""):
        msg = f"parameter {param} has the wrong type"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.param = param


class ToolError(Exception):
    """Raised by handlers to report a declared, expected failure."""


@dataclass
class ExecutionContext:
    """Per-call view of the runtime a handler is allowed to touch.

    robot/external_clients are capability-gated: execute() refuses the call
    before the handler runs if the required one is absent.
    """

    robot: Any = None
    external_clients: Any = None
    send_context: Optional[Callable[[str, bool], None]] = None
    on_card: Optional[Callable[["FunctionCard"], None]] = None
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ToolCall:
    call_id: str
    name: str
    arguments: dict


@dataclass(frozen=True)
class ValidatedCall:
    call_id: str
    name: str
    arguments: dict  # normalized per schema


@dataclass(frozen=True)
class ToolResult:
    call_id: str
    payload: str
    is_error: bool
    elapsed_ms: int


@dataclass(frozen=True)
class FunctionCard:
    """Feed record describing one tool execution end to end."""

    call_id: str
    name: str
    arguments: dict
    payload: str
    is_error: bool
    elapsed_ms: int


@dataclass(frozen=True)
class ToolDescriptor:
    schema: ToolSchema
    handler: Callable[[dict, ExecutionContext], str]
    required_capability: Optional[Capability] = None


def _normalize_value(param_type: str, enum_values, value: Any, name: str) -> Any:
    if param_type == "string":
        if not isinstance(value, str):
            raise TypeMismatch(name, f"expected string, got {type(value).__name__}")
        return value
    if param_type == "number":
        if isinstance(value, bool):
            raise TypeMismatch(name, "expected number, got boolean")
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                raise TypeMismatch(name, f"expected number, got {value!r}") from None
        raise TypeMismatch(name, f"expected number, got {type(value).__name__}")
    if param_type == "integer":
        if isinstance(value, bool):
            raise TypeMismatch(name, "expected integer, got boolean")
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                raise TypeMismatch(name, f"expected integer, got {value!r}") from None
        raise TypeMismatch(name, f"expected integer, got {type(value).__name__}")
    if param_type == "boolean":
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise TypeMismatch(name, f"expected boolean, got {value!r}")
    if param_type == "enum":
        text = str(value)
        if enum_values and text in enum_values:
            return text
        raise TypeMismatch(name, f"expected one of {list(enum_values or ())}, got {value!r}")
    raise TypeMismatch(name, f"unsupported parameter type {param_type!r}")


class ToolRegistry:
    """Holds descriptors; read-mostly and shareable once populated."""

    def __init__(self):
        self._tools: dict[str, ToolDescriptor] = {}
        self._order: list[str] = []

    def register(self, descriptor: ToolDescriptor) -> None:
        validate_schema(descriptor.schema)
        name = descriptor.schema.name
        if name in self._tools:
            raise DuplicateName(f"tool already registered: {name}")
        self._tools[name] = descriptor
        self._order.append(name)

    def get(self, name: str) -> ToolDescriptor:
        try:
            return self._tools[name]
        except KeyError:
            raise UnknownTool(name) from None

    def list_schemas(self) -> list[ToolSchema]:
        return [self._tools[name].schema for name in self._order]

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def validate_call(self, call: ToolCall) -> ValidatedCall:
        descriptor = self.get(call.name)
        params = {p.name: p for p in descriptor.schema.parameters}
        normalized: dict[str, Any] = {}
        for key, value in call.arguments.items():
            param = params.get(key)
            if param is None:
                # tolerated: providers sometimes pass extras; dropped here
                logger.debug("call %s: dropping unknown argument %r", call.call_id, key)
                continue
            normalized[key] = _normalize_value(param.type, param.enum_values, value, key)
        for param in descriptor.schema.parameters:
            if not param.required:
                continue
            value = normalized.get(param.name)
            if value is None:
                raise MissingParam(param.name)
            if param.type == "string" and not value.strip():
                raise MissingParam(param.name)
        return ValidatedCall(call_id=call.call_id, name=call.name, arguments=normalized)

    def execute(self, call: ToolCall, context: ExecutionContext) -> ToolResult:
        """Run one call to completion. Never raises; always one result."""
        start = time.monotonic()

        def finish(payload: str, is_error: bool) -> ToolResult:
            elapsed = max(0, int((time.monotonic() - start) * 1000))
            result = ToolResult(call.call_id, payload, is_error, elapsed)
            if context.on_card is not None:
                card = FunctionCard(
                    call_id=call.call_id,
                    name=call.name,
                    arguments=dict(call.arguments),
                    payload=payload,
                    is_error=is_error,
                    elapsed_ms=elapsed,
                )
                try:
                    context.on_card(card)
                except Exception:
                    logger.exception("on_card callback failed for %s", call.call_id)
            return result

        try:
            validated = self.validate_call(call)
        except ValidationFailure as exc:
            return finish(str(exc), True)

        descriptor = self._tools[call.name]
        if descriptor.required_capability is Capability.ROBOT and context.robot is None:
            return finish(f"{call.name} requires a robot, and none is connected", True)
        if descriptor.required_capability is Capability.NETWORK and context.external_clients is None:
            return finish(f"{call.name} requires network access, and none is configured", True)

        try:
            payload = descriptor.handler(validated.arguments, context)
        except ToolError as exc:
            return finish(str(exc), True)
        except Exception as exc:
            logger.exception("tool %s raised", call.name)
            return finish(f"{call.name} failed: {exc}", True)
        if not isinstance(payload, str):
            payload = str(payload)
        return finish(payload, False)
