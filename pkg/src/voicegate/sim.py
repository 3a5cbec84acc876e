"""2D robot world: pose, gaze, obstacles, persons, touch, simulated vision.

The simulation backs the hardware-agnostic controller contract. Movement is
straight-line with segment/rectangle blocking, vision is a deterministic
textual scene description of what falls inside the gaze cone, and touch
sensors turn into grounding context messages.
"""

from __future__ import annotations

import itertools
import logging
import math
import shlex
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Union

from .protocol import ContextInjection
from .registry import ToolCall

logger = logging.getLogger(__name__)

STOP_MARGIN_M = 0.1
VISION_CONE_DEG = 60.0  # full aperture; half-angle applies each side of gaze
INTERACTION_DISTANCE_M = 2.0

TOUCH_SENSORS = ("head", "left_hand", "right_hand", "left_bumper", "right_bumper")


class SimError(Exception):
    pass


class UnknownLocation(SimError):
    def __init__(self, name: str):
        super().__init__(f"unknown location: {name}")
        self.name = name


class WorldParseError(SimError):
    pass


def normalize_theta(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    return math.pi - ((math.pi - theta) % (2.0 * math.pi))


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def normalized(self) -> "Pose":
        return replace(self, theta=normalize_theta(self.theta))


@dataclass(frozen=True)
class Gaze:
    """Gaze target in the robot frame: x forward, y left, z up."""

    x: float
    y: float
    z: float


FORWARD_GAZE = Gaze(1.0, 0.0, 0.0)


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned rectangle. elevation is the z of its center; anything
    above ground (elevation > 0) is overhead and never blocks movement."""

    x0: float
    y0: float
    x1: float
    y1: float
    name: str = ""
    elevation: float = 0.0

    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    @property
    def blocks(self) -> bool:
        return self.elevation == 0.0

    def contains(self, x: float, y: float) -> bool:
        return self.x0 < x < self.x1 and self.y0 < y < self.y1


@dataclass(frozen=True)
class Person:
    id: str
    x: float
    y: float
    name: Optional[str] = None  # None = not recognized


@dataclass(frozen=True)
class Hardware:
    charging_flap_open: bool = False
    battery_pct: int = 100


@dataclass(frozen=True)
class SimWorld:
    robot: Pose = Pose(0.0, 0.0, 0.0)
    gaze: Gaze = FORWARD_GAZE
    obstacles: tuple[Obstacle, ...] = ()
    persons: tuple[Person, ...] = ()
    named_locations: dict = field(default_factory=dict)  # name -> Pose
    hardware: Hardware = Hardware()


def validate_world(world: SimWorld) -> None:
    for obstacle in world.obstacles:
        if not (obstacle.x0 < obstacle.x1 and obstacle.y0 < obstacle.y1):
            raise SimError(f"degenerate obstacle rectangle {obstacle}")
        if obstacle.blocks and obstacle.contains(world.robot.x, world.robot.y):
            raise SimError("robot starts inside an obstacle")
    if not 0 <= world.hardware.battery_pct <= 100:
        raise SimError(f"battery_pct out of range: {world.hardware.battery_pct}")
    ids = [p.id for p in world.persons]
    if len(ids) != len(set(ids)):
        raise SimError("duplicate person ids")


# ---------------------------------------------------------------------------
# Commands and events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MoveTo:
    x: Optional[float] = None
    y: Optional[float] = None
    location: Optional[str] = None  # named location; overrides x/y


@dataclass(frozen=True)
class LookAt:
    gaze: Gaze


@dataclass(frozen=True)
class CaptureImage:
    pass


@dataclass(frozen=True)
class SetPose:
    """Teleport; simulation only."""

    pose: Pose


RobotCommand = Union[MoveTo, LookAt, CaptureImage, SetPose]


@dataclass(frozen=True)
class MovementComplete:
    pass


@dataclass(frozen=True)
class MovementBlocked:
    at: tuple[float, float]


@dataclass(frozen=True)
class TouchSensor:
    sensor: str


@dataclass(frozen=True)
class HardwareChanged:
    field: str
    value: object


RobotEvent = Union[MovementComplete, MovementBlocked, TouchSensor, HardwareChanged]


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def segment_rect_entry(
    p0: tuple[float, float], p1: tuple[float, float], rect: Obstacle
) -> Optional[float]:
    """Parameter t in [0, 1) where segment p0->p1 enters rect, else None.

    Slab method. Touching an edge tangentially does not count as entry.
    """
    dx = p1[0] - p0[0]
    dy = p1[1] - p0[1]
    t_near = -math.inf
    t_far = math.inf
    for p, d, lo, hi in ((p0[0], dx, rect.x0, rect.x1), (p0[1], dy, rect.y0, rect.y1)):
        if d == 0.0:
            if p <= lo or p >= hi:
                return None
        else:
            t1 = (lo - p) / d
            t2 = (hi - p) / d
            if t1 > t2:
                t1, t2 = t2, t1
            t_near = max(t_near, t1)
            t_far = min(t_far, t2)
    if t_near >= t_far:
        return None
    entry = max(t_near, 0.0)
    if entry >= 1.0 or t_far <= 0.0:
        return None
    return entry


def _rotate_to_world(gaze: Gaze, theta: float) -> tuple[float, float, float]:
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    return (gaze.x * cos_t - gaze.y * sin_t, gaze.x * sin_t + gaze.y * cos_t, gaze.z)


def _in_cone(direction: tuple[float, float, float], offset: tuple[float, float, float]) -> bool:
    dir_len = math.sqrt(sum(c * c for c in direction))
    off_len = math.sqrt(sum(c * c for c in offset))
    if dir_len < 1e-9:
        return False
    if off_len < 1e-9:
        return True  # at the cone apex
    dot = sum(a * b for a, b in zip(direction, offset))
    cos_angle = max(-1.0, min(1.0, dot / (dir_len * off_len)))
    return math.degrees(math.acos(cos_angle)) <= VISION_CONE_DEG / 2.0


# ---------------------------------------------------------------------------
# Pure world operations
# ---------------------------------------------------------------------------


def apply_command(world: SimWorld, cmd: RobotCommand) -> tuple[SimWorld, list[RobotEvent]]:
    if isinstance(cmd, LookAt):
        for coord in (cmd.gaze.x, cmd.gaze.y, cmd.gaze.z):
            if not math.isfinite(coord):
                raise SimError("gaze coordinates must be finite")
        return replace(world, gaze=cmd.gaze), []

    if isinstance(cmd, CaptureImage):
        return world, []

    if isinstance(cmd, SetPose):
        pose = cmd.pose.normalized()
        for obstacle in world.obstacles:
            if obstacle.blocks and obstacle.contains(pose.x, pose.y):
                raise SimError("cannot teleport into an obstacle")
        return replace(world, robot=pose), []

    if isinstance(cmd, MoveTo):
        arrival_theta: Optional[float] = None
        if cmd.location is not None:
            target = world.named_locations.get(cmd.location)
            if target is None:
                raise UnknownLocation(cmd.location)
            tx, ty = target.x, target.y
            arrival_theta = target.theta
        else:
            if cmd.x is None or cmd.y is None:
                raise SimError("MoveTo needs either coordinates or a location name")
            tx, ty = cmd.x, cmd.y

        p0 = (world.robot.x, world.robot.y)
        dx = tx - p0[0]
        dy = ty - p0[1]
        seg_len = math.hypot(dx, dy)
        if seg_len == 0.0:
            return world, [MovementComplete()]
        heading = math.atan2(dy, dx)

        hit_t: Optional[float] = None
        for obstacle in world.obstacles:
            if not obstacle.blocks:
                continue
            entry = segment_rect_entry(p0, (tx, ty), obstacle)
            if entry is not None and (hit_t is None or entry < hit_t):
                hit_t = entry

        if hit_t is None:
            theta = heading if arrival_theta is None else arrival_theta
            pose = Pose(tx, ty, theta).normalized()
            # the robot turns to face its motion; gaze follows
            return replace(world, robot=pose, gaze=FORWARD_GAZE), [MovementComplete()]

        t_stop = max(0.0, hit_t - STOP_MARGIN_M / seg_len)
        pose = Pose(p0[0] + t_stop * dx, p0[1] + t_stop * dy, heading).normalized()
        hit_at = (p0[0] + hit_t * dx, p0[1] + hit_t * dy)
        return replace(world, robot=pose, gaze=FORWARD_GAZE), [MovementBlocked(at=hit_at)]

    raise SimError(f"unsupported command {cmd!r}")


@dataclass(frozen=True)
class SimImage:
    description: str
    gaze: Gaze
    timestamp: datetime


def scene_description(world: SimWorld) -> str:
    """What the robot sees: persons and obstacles inside the gaze cone,
    nearest first. Deterministic given (world, gaze)."""
    direction = _rotate_to_world(world.gaze, world.robot.theta)
    rx, ry = world.robot.x, world.robot.y
    entries: list[tuple[float, str]] = []
    for person in world.persons:
        offset = (person.x - rx, person.y - ry, 0.0)
        if not _in_cone(direction, offset):
            continue
        distance = math.sqrt(sum(c * c for c in offset))
        who = f"person {person.name}" if person.name else "unknown person"
        entries.append((distance, f"{who} at {distance:.1f} m"))
    for obstacle in world.obstacles:
        cx, cy = obstacle.center()
        offset = (cx - rx, cy - ry, obstacle.elevation)
        if not _in_cone(direction, offset):
            continue
        distance = math.sqrt(sum(c * c for c in offset))
        label = obstacle.name if obstacle.name else "obstacle"
        entries.append((distance, f"{label} at {distance:.1f} m"))
    if not entries:
        return "nothing notable"
    entries.sort(key=lambda e: e[0])
    return "; ".join(text for _, text in entries)


def capture_image(world: SimWorld, timestamp: Optional[datetime] = None) -> SimImage:
    if timestamp is None:
        timestamp = datetime.now(timezone.utc)
    return SimImage(description=scene_description(world), gaze=world.gaze, timestamp=timestamp)


def inject_touch(sensor: str) -> ContextInjection:
    if sensor not in TOUCH_SENSORS:
        raise SimError(f"unknown touch sensor {sensor!r}")
    readable = sensor.replace("_", " ")
    return ContextInjection(message=f"[User touched my {readable}]", request_response=True)


_self_call_counter = itertools.count(1)


def blocked_reflex(event: MovementBlocked) -> ToolCall:
    """Self-initiated vision check after a blocked move."""
    call_id = f"self-{next(_self_call_counter)}"
    return ToolCall(call_id=call_id, name="analyze_vision", arguments={})


def blockage_message(event: MovementBlocked) -> str:
    x, y = event.at
    return f"[Movement blocked at ({x:.2f}, {y:.2f}); checking what is in the way]"


# ---------------------------------------------------------------------------
# Controller contract
# ---------------------------------------------------------------------------


class RobotController(ABC):
    """Hardware abstraction: the gateway only ever talks to this."""

    @abstractmethod
    def execute(self, cmd: RobotCommand) -> list[RobotEvent]:
        """Run a command to completion; returns the events it produced."""

    @abstractmethod
    def capture(self) -> SimImage:
        """Capture what the robot currently sees."""

    @abstractmethod
    def capabilities(self) -> frozenset:
        """Feature probe, e.g. {'motion', 'vision', 'touch'}."""

    @abstractmethod
    def add_listener(self, callback: Callable[[RobotEvent], None]) -> None:
        """Subscribe to events not caused by execute (touch, hardware)."""


class SimulatedRobotController(RobotController):
    """Owns a SimWorld; safe to call from worker threads."""

    def __init__(self, world: Optional[SimWorld] = None):
        self._world = world if world is not None else SimWorld()
        validate_world(self._world)
        self._lock = threading.Lock()
        self._listeners: list[Callable[[RobotEvent], None]] = []
        self._seen_persons: set[str] = set()
        self._near_persons: set[str] = set()

    @property
    def world(self) -> SimWorld:
        with self._lock:
            return self._world

    def execute(self, cmd: RobotCommand) -> list[RobotEvent]:
        with self._lock:
            self._world, events = apply_command(self._world, cmd)
        for event in events:  # notify outside the lock; listeners may query
            self._notify(event)
        return events

    def capture(self) -> SimImage:
        with self._lock:
            return capture_image(self._world)

    def capabilities(self) -> frozenset:
        return frozenset({"motion", "vision", "touch"})

    def add_listener(self, callback: Callable[[RobotEvent], None]) -> None:
        self._listeners.append(callback)

    def _notify(self, event: RobotEvent) -> None:
        for callback in self._listeners:
            try:
                callback(event)
            except Exception:
                logger.exception("robot event listener failed")

    def touch(self, sensor: str) -> TouchSensor:
        if sensor not in TOUCH_SENSORS:
            raise SimError(f"unknown touch sensor {sensor!r}")
        event = TouchSensor(sensor=sensor)
        self._notify(event)
        return event

    def set_hardware(self, **changes) -> list[HardwareChanged]:
        events = []
        with self._lock:
            hardware = self._world.hardware
            for name, value in changes.items():
                if not hasattr(hardware, name):
                    raise SimError(f"unknown hardware field {name!r}")
                hardware = replace(hardware, **{name: value})
                events.append(HardwareChanged(field=name, value=value))
            updated = replace(self._world, hardware=hardware)
            validate_world(updated)
            self._world = updated
        for event in events:
            self._notify(event)
        return events

    def move_person(self, person_id: str, x: float, y: float) -> None:
        with self._lock:
            persons = list(self._world.persons)
            for i, person in enumerate(persons):
                if person.id == person_id:
                    persons[i] = replace(person, x=x, y=y)
                    break
            else:
                raise SimError(f"no person with id {person_id!r}")
            self._world = replace(self._world, persons=tuple(persons))

    def person_distances(self) -> list[tuple[Person, float]]:
        with self._lock:
            world = self._world
        out = []
        for person in world.persons:
            distance = math.hypot(person.x - world.robot.x, person.y - world.robot.y)
            out.append((person, distance))
        return out

    def perception_tick(self) -> list[tuple[str, dict]]:
        """One simulation tick worth of perception observations.

        Returns (kind, fields) pairs: PersonAppeared on first sight,
        PersonRecognized when a named person first comes within interaction
        distance, and PersonDistance for every person every tick.
        """
        observations: list[tuple[str, dict]] = []
        for person, distance in self.person_distances():
            if person.id not in self._seen_persons:
                self._seen_persons.add(person.id)
                observations.append(("PersonAppeared", {"person_id": person.id}))
            near = distance <= INTERACTION_DISTANCE_M
            if near and person.id not in self._near_persons and person.name:
                observations.append(
                    ("PersonRecognized", {"person_id": person.id, "identity": person.name})
                )
            if near:
                self._near_persons.add(person.id)
            else:
                self._near_persons.discard(person.id)
            observations.append(
                ("PersonDistance", {"person_id": person.id, "meters": distance})
            )
        return observations

    def snapshot(self) -> dict:
        """JSON-friendly world view for the console."""
        with self._lock:
            world = self._world
        return {
            "robot": {"x": world.robot.x, "y": world.robot.y, "theta": world.robot.theta},
            "gaze": {"x": world.gaze.x, "y": world.gaze.y, "z": world.gaze.z},
            "obstacles": [
                {
                    "x0": o.x0, "y0": o.y0, "x1": o.x1, "y1": o.y1,
                    "name": o.name, "elevation": o.elevation,
                }
                for o in world.obstacles
            ],
            "persons": [
                {"id": p.id, "x": p.x, "y": p.y, "name": p.name} for p in world.persons
            ],
            "hardware": {
                "charging_flap_open": world.hardware.charging_flap_open,
                "battery_pct": world.hardware.battery_pct,
            },
        }


# ---------------------------------------------------------------------------
# World files
# ---------------------------------------------------------------------------


_WORLD_KEYS = {
    "pose": ("x", "y", "theta"),
    "gaze": ("x", "y", "z"),
    "obstacle": ("x0", "y0", "x1", "y1", "name", "z"),
    "person": ("id", "x", "y", "name"),
    "location": ("name", "x", "y", "theta"),
    "hardware": ("charging_flap_open", "battery_pct"),
}


def _world_kv(tokens: list[str], lineno: int, directive: str) -> dict[str, str]:
    allowed = _WORLD_KEYS[directive]
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or not key:
            raise WorldParseError(f"line {lineno}: expected key=value, got {tok!r}")
        if key not in allowed:
            raise WorldParseError(f"line {lineno}: unknown key {key!r} for {directive}")
        out[key] = value
    return out


def _world_float(kv: dict, key: str, lineno: int, default: Optional[float] = None) -> float:
    if key not in kv:
        if default is None:
            raise WorldParseError(f"line {lineno}: missing {key}=")
        return default
    try:
        return float(kv[key])
    except ValueError:
        raise WorldParseError(f"line {lineno}: {key} must be a number") from None


def parse_world(text: str) -> SimWorld:
    robot = Pose(0.0, 0.0, 0.0)
    gaze = FORWARD_GAZE
    obstacles: list[Obstacle] = []
    persons: list[Person] = []
    locations: dict = {}
    hardware = Hardware()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            tokens = shlex.split(line, comments=True)
        except ValueError as exc:
            raise WorldParseError(f"line {lineno}: {exc}") from exc
        if not tokens:
            continue
        directive, rest = tokens[0], tokens[1:]
        if directive not in _WORLD_KEYS:
            raise WorldParseError(f"line {lineno}: unknown directive {directive!r}")
        kv = _world_kv(rest, lineno, directive)
        if directive == "pose":
            robot = Pose(
                _world_float(kv, "x", lineno),
                _world_float(kv, "y", lineno),
                _world_float(kv, "theta", lineno, 0.0),
            ).normalized()
        elif directive == "gaze":
            gaze = Gaze(
                _world_float(kv, "x", lineno),
                _world_float(kv, "y", lineno),
                _world_float(kv, "z", lineno),
            )
        elif directive == "obstacle":
            obstacles.append(
                Obstacle(
                    x0=_world_float(kv, "x0", lineno),
                    y0=_world_float(kv, "y0", lineno),
                    x1=_world_float(kv, "x1", lineno),
                    y1=_world_float(kv, "y1", lineno),
                    name=kv.get("name", ""),
                    elevation=_world_float(kv, "z", lineno, 0.0),
                )
            )
        elif directive == "person":
            if "id" not in kv:
                raise WorldParseError(f"line {lineno}: person needs id=")
            persons.append(
                Person(
                    id=kv["id"],
                    x=_world_float(kv, "x", lineno),
                    y=_world_float(kv, "y", lineno),
                    name=kv.get("name"),
                )
            )
        elif directive == "location":
            if "name" not in kv:
                raise WorldParseError(f"line {lineno}: location needs name=")
            if kv["name"] in locations:
                raise WorldParseError(f"line {lineno}: duplicate location {kv['name']!r}")
            locations[kv["name"]] = Pose(
                _world_float(kv, "x", lineno),
                _world_float(kv, "y", lineno),
                _world_float(kv, "theta", lineno, 0.0),
            ).normalized()
        elif directive == "hardware":
            flap = kv.get("charging_flap_open", "false").lower() == "true"
            try:
                battery = int(kv.get("battery_pct", "100"))
            except ValueError:
                raise WorldParseError(f"line {lineno}: battery_pct must be an integer") from None
            hardware = Hardware(charging_flap_open=flap, battery_pct=battery)
    world = SimWorld(
        robot=robot,
        gaze=gaze,
        obstacles=tuple(obstacles),
        persons=tuple(persons),
        named_locations=locations,
        hardware=hardware,
    )
    try:
        validate_world(world)
    except SimError as exc:
        raise WorldParseError(str(exc)) from exc
    return world


def load_world(path: Union[str, Path]) -> SimWorld:
    return parse_world(Path(path).read_text(encoding="utf-8"))
