"""Perception rule engine: conditions, cooldowns, response/context actions.

Events from the simulation (person sightings, distances, touch) are matched
against declarative rules. A firing either asks the model to respond or
silently updates its context, mirroring how grounding messages reach an LLM
without always soliciting speech.
"""

from __future__ import annotations

import logging
import shlex
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

from .protocol import ContextInjection

logger = logging.getLogger(__name__)


class ParseError(Exception):
    pass


class DuplicateRuleId(Exception):
    pass


class EventKind(Enum):
    PERSON_APPEARED = "PersonAppeared"
    PERSON_RECOGNIZED = "PersonRecognized"
    PERSON_DISTANCE = "PersonDistance"
    TOUCH = "Touch"


@dataclass(frozen=True)
class PerceptionEvent:
    kind: EventKind
    timestamp_ms: float
    person_id: str = ""
    identity: str = ""  # PersonRecognized
    meters: float = -1.0  # PersonDistance; negative = not applicable
    sensor: str = ""  # Touch


@dataclass(frozen=True)
class Condition:
    kind: EventKind
    distance_below: Optional[float] = None
    identity_equals: Optional[str] = None

    def matches(self, event: PerceptionEvent) -> bool:
        if event.kind is not self.kind:
            return False
        if self.distance_below is not None:
            if event.meters < 0 or event.meters >= self.distance_below:
                return False
        if self.identity_equals is not None and event.identity != self.identity_equals:
            return False
        return True


@dataclass(frozen=True)
class ImmediateResponse:
    template: str


@dataclass(frozen=True)
class ContextUpdate:
    template: str


RuleAction = Union[ImmediateResponse, ContextUpdate]


@dataclass(frozen=True)
class Rule:
    id: str
    condition: Condition
    action: RuleAction
    cooldown_ms: int = 0


@dataclass(frozen=True)
class RuleFiring:
    rule_id: str
    event: PerceptionEvent
    message: str
    request_response: bool


def render_template(template: str, event: PerceptionEvent) -> str:
    identity = event.identity or event.person_id or "someone"
    out = template.replace("{identity}", identity)
    if event.meters >= 0:
        out = out.replace("{distance}", f"{event.meters:.1f}")
    out = out.replace("{sensor}", event.sensor.replace("_", " "))
    return out


def evaluate(
    rules: list[Rule], event: PerceptionEvent, last_fired: dict
) -> tuple[list[RuleFiring], dict]:
    """Pure single-event evaluation.

    A rule fires when its condition matches and the event is at least
    cooldown_ms after its previous firing (boundary inclusive; a rule that
    has never fired always passes). Firings come out ordered by rule id.
    """
    updated = dict(last_fired)
    firings: list[RuleFiring] = []
    for rule in sorted(rules, key=lambda r: r.id):
        if not rule.condition.matches(event):
            continue
        previous = updated.get(rule.id)
        if previous is not None and event.timestamp_ms - previous < rule.cooldown_ms:
            continue
        assert rule.condition.matches(event)  # selector soundness
        firings.append(
            RuleFiring(
                rule_id=rule.id,
                event=event,
                message=render_template(rule.action.template, event),
                request_response=isinstance(rule.action, ImmediateResponse),
            )
        )
        updated[rule.id] = event.timestamp_ms
    return firings, updated


def firing_to_injection(firing: RuleFiring) -> ContextInjection:
    return ContextInjection(message=firing.message, request_response=firing.request_response)


async def dispatch(firing: RuleFiring, session) -> None:
    """Send one firing into an open session. Raises SessionClosed after close."""
    await session.send(firing_to_injection(firing))


class RuleEngine:
    """Owns the per-rule cooldown clocks for one live session."""

    def __init__(self, rules: list[Rule]):
        ids = [r.id for r in rules]
        if len(ids) != len(set(ids)):
            raise DuplicateRuleId("rule ids must be unique")
        for rule in rules:
            if not rule.action.template:
                raise ParseError(f"rule {rule.id}: empty template")
            if rule.cooldown_ms < 0:
                raise ParseError(f"rule {rule.id}: negative cooldown")
        self.rules = list(rules)
        self._last_fired: dict = {}
        self._last_ts: float = float("-inf")

    def feed(self, event: PerceptionEvent) -> list[RuleFiring]:
        if event.timestamp_ms < self._last_ts:
            logger.warning(
                "perception timestamp went backwards: %s < %s",
                event.timestamp_ms, self._last_ts,
            )
        self._last_ts = max(self._last_ts, event.timestamp_ms)
        firings, self._last_fired = evaluate(self.rules, event, self._last_fired)
        return firings


# ---------------------------------------------------------------------------
# Rule files: one `rule` record per line
# ---------------------------------------------------------------------------

_ACTIONS = {"respond", "context"}


def parse_rules(text: str) -> list[Rule]:
    rules: list[Rule] = []
    seen: set[str] = set()
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
        if tokens[0] != "rule":
            raise ParseError(f"line {lineno}: expected 'rule', got {tokens[0]!r}")
        kv = {}
        for tok in tokens[1:]:
            key, sep, value = tok.partition("=")
            if not sep or not key:
                raise ParseError(f"line {lineno}: expected key=value, got {tok!r}")
            kv[key] = value
        for need in ("id", "on", "action", "template"):
            if need not in kv:
                raise ParseError(f"line {lineno}: rule needs {need}=")
        if kv["id"] in seen:
            raise DuplicateRuleId(f"line {lineno}: duplicate rule id {kv['id']!r}")
        seen.add(kv["id"])
        try:
            kind = EventKind(kv["on"])
        except ValueError:
            raise ParseError(f"line {lineno}: unknown event kind {kv['on']!r}") from None
        if kv["action"] not in _ACTIONS:
            raise ParseError(f"line {lineno}: action must be one of {sorted(_ACTIONS)}")
        if not kv["template"]:
            raise ParseError(f"line {lineno}: empty template")
        distance_below = None
        if "distance_below" in kv:
            try:
                distance_below = float(kv["distance_below"])
            except ValueError:
                raise ParseError(f"line {lineno}: distance_below must be a number") from None
        cooldown = 0
        if "cooldown_ms" in kv:
            try:
                cooldown = int(kv["cooldown_ms"])
            except ValueError:
                raise ParseError(f"line {lineno}: cooldown_ms must be an integer") from None
            if cooldown < 0:
                raise ParseError(f"line {lineno}: cooldown_ms must be >= 0")
        condition = Condition(
            kind=kind,
            distance_below=distance_below,
            identity_equals=kv.get("identity_equals"),
        )
        action: RuleAction
        if kv["action"] == "respond":
            action = ImmediateResponse(template=kv["template"])
        else:
            action = ContextUpdate(template=kv["template"])
        rules.append(Rule(id=kv["id"], condition=condition, action=action, cooldown_ms=cooldown))
    return rules


def load_rules(path: Union[str, Path]) -> list[Rule]:
    return parse_rules(Path(path).read_text(encoding="utf-8"))
