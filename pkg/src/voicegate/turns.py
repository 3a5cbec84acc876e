"""Conversational turn-taking state machine with mic gating and barge-in.

The core ``transition`` function is pure and total: every (state, event)
pair maps to a next state and a fixed action list. Events that a state does
not react to are explicit no-ops. ``TurnLoop`` layers the bookkeeping a live
session needs on top: state-change telemetry, first-delta detection per model
turn, and input gating.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import AsyncIterator, Union

from .protocol import (
    AudioInputChunk,
    ContextInjection,
    ModelAudioDelta,
    ModelTextDelta,
    ModelTurnEnd,
    ModelTurnStart,
    SessionEvent,
    ToolResultEvent,
    is_client_event,
)


class TurnState(Enum):
    IDLE = "idle"
    LISTENING = "listening"
    THINKING = "thinking"
    SPEAKING = "speaking"


class TurnEvent(Enum):
    SESSION_OPENED = "session_opened"
    USER_INPUT_START = "user_input_start"
    USER_INPUT_END = "user_input_end"
    MODEL_TURN_STARTED = "model_turn_started"
    FIRST_MODEL_DELTA = "first_model_delta"
    MODEL_TURN_ENDED = "model_turn_ended"
    INTERRUPT_TAPPED = "interrupt_tapped"
    TOOL_EXECUTION_STARTED = "tool_execution_started"
    TOOL_EXECUTION_ENDED = "tool_execution_ended"
    SESSION_CLOSED = "session_closed"


class TurnActionKind(Enum):
    OPEN_MIC = "open_mic"
    CLOSE_MIC = "close_mic"
    FORWARD_TO_SESSION = "forward_to_session"
    CANCEL_MODEL_TURN = "cancel_model_turn"
    DROP_BUFFERED_AUDIO = "drop_buffered_audio"
    EMIT_STATE_CHANGE = "emit_state_change"


@dataclass(frozen=True)
class TurnAction:
    kind: TurnActionKind
    event: SessionEvent | None = None  # FORWARD_TO_SESSION payload
    state: TurnState | None = None  # EMIT_STATE_CHANGE payload


OPEN_MIC = TurnAction(TurnActionKind.OPEN_MIC)
CLOSE_MIC = TurnAction(TurnActionKind.CLOSE_MIC)
CANCEL_MODEL_TURN = TurnAction(TurnActionKind.CANCEL_MODEL_TURN)
DROP_BUFFERED_AUDIO = TurnAction(TurnActionKind.DROP_BUFFERED_AUDIO)


def emit_state_change(state: TurnState) -> TurnAction:
    return TurnAction(TurnActionKind.EMIT_STATE_CHANGE, state=state)


def forward_to_session(event: SessionEvent) -> TurnAction:
    return TurnAction(TurnActionKind.FORWARD_TO_SESSION, event=event)


# Transition table. Pairs not listed are no-ops (same state, no actions).
# The table is deliberately small: the mic is closed on entry to SPEAKING,
# reopened whenever control returns to LISTENING, and a tap during SPEAKING
# cancels the model turn and flushes whatever audio was queued for playback.
_TABLE: dict[tuple[TurnState, TurnEvent], tuple[TurnState, tuple[TurnAction, ...]]] = {
    (TurnState.IDLE, TurnEvent.SESSION_OPENED): (TurnState.LISTENING, (OPEN_MIC,)),
    (TurnState.LISTENING, TurnEvent.USER_INPUT_END): (TurnState.THINKING, ()),
    (TurnState.THINKING, TurnEvent.FIRST_MODEL_DELTA): (TurnState.SPEAKING, (CLOSE_MIC,)),
    (TurnState.SPEAKING, TurnEvent.MODEL_TURN_ENDED): (TurnState.LISTENING, (OPEN_MIC,)),
    (TurnState.SPEAKING, TurnEvent.INTERRUPT_TAPPED): (
        TurnState.LISTENING,
        (CANCEL_MODEL_TURN, DROP_BUFFERED_AUDIO, OPEN_MIC),
    ),
}


def transition(state: TurnState, event: TurnEvent) -> tuple[TurnState, list[TurnAction]]:
    """Pure transition function over the full (state, event) space."""
    if event is TurnEvent.SESSION_CLOSED:
        return TurnState.IDLE, [CLOSE_MIC]
    nxt = _TABLE.get((state, event))
    if nxt is None:
        return state, []
    new_state, actions = nxt
    return new_state, list(actions)


class GateDecision(Enum):
    FORWARD = "forward"
    BLOCK = "block"


def gate_input(
    state: TurnState,
    event: SessionEvent,
    *,
    gate_during_thinking: bool = True,
) -> GateDecision:
    """Decide whether a client-originated event may reach the session.

    Audio chunks are dropped while the robot is speaking (no echo
    cancellation) and, by default, while the model is thinking. Non-auditory
    inputs -- context injections, tool results, text, interrupts -- always
    pass so the duplex channel stays useful during speech output.
    """
    if not is_client_event(event):
        raise ValueError(f"not a client-originated event: {event!r}")
    if isinstance(event, AudioInputChunk):
        if state is TurnState.SPEAKING:
            return GateDecision.BLOCK
        if state is TurnState.THINKING and gate_during_thinking:
            return GateDecision.BLOCK
    return GateDecision.FORWARD


class TurnLoop:
    """Serialized driver around the pure state machine.

    All events must be fed from a single logical consumer; the loop keeps the
    current state, appends EMIT_STATE_CHANGE telemetry whenever the state
    actually changes (and, as pure telemetry, on tool execution start/end),
    and derives turn events from inbound model traffic.
    """

    def __init__(self, *, gate_during_thinking: bool = True):
        self._state = TurnState.IDLE
        self._gate_during_thinking = gate_during_thinking
        self._current_turn: str | None = None
        self._turn_had_delta = False

    @property
    def state(self) -> TurnState:
        return self._state

    @property
    def current_turn_id(self) -> str | None:
        return self._current_turn

    def feed(self, event: TurnEvent) -> list[TurnAction]:
        """Apply one local turn event; returns actions plus telemetry."""
        old = self._state
        new_state, actions = transition(old, event)
        self._state = new_state
        if new_state is not old:
            actions.append(emit_state_change(new_state))
        elif event in (TurnEvent.TOOL_EXECUTION_STARTED, TurnEvent.TOOL_EXECUTION_ENDED):
            # No state change; still worth a capsule refresh on the feed.
            actions.append(emit_state_change(new_state))
        return actions

    def feed_inbound(self, event: SessionEvent) -> list[TurnAction]:
        """Derive and apply turn events from an inbound session event."""
        actions: list[TurnAction] = []
        if isinstance(event, ModelTurnStart):
            self._current_turn = event.turn_id
            self._turn_had_delta = False
            actions += self.feed(TurnEvent.MODEL_TURN_STARTED)
        elif isinstance(event, (ModelTextDelta, ModelAudioDelta)):
            if not self._turn_had_delta:
                self._turn_had_delta = True
                actions += self.feed(TurnEvent.FIRST_MODEL_DELTA)
        elif isinstance(event, ModelTurnEnd):
            if self._current_turn == event.turn_id:
                self._current_turn = None
            actions += self.feed(TurnEvent.MODEL_TURN_ENDED)
        return actions

    def feed_outbound(self, event: SessionEvent) -> list[TurnAction]:
        """Gate a client-originated event; forwarded events become actions."""
        decision = gate_input(self._state, event, gate_during_thinking=self._gate_during_thinking)
        if decision is GateDecision.FORWARD:
            return [forward_to_session(event)]
        return []


LoopInput = Union[TurnEvent, SessionEvent]


async def run_loop(session, inputs: AsyncIterator[LoopInput]) -> AsyncIterator[TurnAction]:
    """Drive a session from a merged stream of local and client events.

    ``inputs`` may yield TurnEvents (local) or client-originated
    SessionEvents (to be gated and forwarded). Inbound traffic from the
    session is consumed concurrently with each step. Actions are yielded in
    emission order; FORWARD_TO_SESSION actions are executed (sent) before
    being yielded. When the session closes the loop emits a final
    EMIT_STATE_CHANGE(IDLE) and stops.
    """
    import asyncio

    from .session import SessionClosed

    loop_state = TurnLoop()
    queue: asyncio.Queue = asyncio.Queue()

    async def pump_inbound():
        try:
            async for ev in session.events():
                await queue.put(("inbound", ev))
        finally:
            await queue.put(("closed", None))

    async def pump_inputs():
        async for item in inputs:
            await queue.put(("input", item))

    inbound_task = asyncio.ensure_future(pump_inbound())
    inputs_task = asyncio.ensure_future(pump_inputs())
    try:
        while True:
            source, item = await queue.get()
            if source == "closed":
                for action in loop_state.feed(TurnEvent.SESSION_CLOSED):
                    yield action
                yield emit_state_change(TurnState.IDLE)
                return
            if source == "inbound":
                for action in loop_state.feed_inbound(item):
                    yield action
                continue
            if isinstance(item, TurnEvent):
                actions = loop_state.feed(item)
            else:
                actions = loop_state.feed_outbound(item)
            for action in actions:
                if action.kind is TurnActionKind.FORWARD_TO_SESSION:
                    try:
                        await session.send(action.event)
                    except SessionClosed:
                        continue
                yield action
    finally:
        inbound_task.cancel()
        inputs_task.cancel()


__all__ = [
    "TurnState",
    "TurnEvent",
    "TurnAction",
    "TurnActionKind",
    "GateDecision",
    "transition",
    "gate_input",
    "TurnLoop",
    "run_loop",
    "emit_state_change",
    "forward_to_session",
    "OPEN_MIC",
    "CLOSE_MIC",
    "CANCEL_MODEL_TURN",
    "DROP_BUFFERED_AUDIO",
]
