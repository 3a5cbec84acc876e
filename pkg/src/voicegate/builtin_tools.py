"""Builtin tool descriptors: gaze, vision, navigation, info retrieval, game.

Information tools run against stub fixtures by default so everything works
with zero API keys; live mode is opt-in per service and degrades to error
results when the key or the network is missing.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from typing import Optional

import requests

from .protocol import ToolParam, ToolSchema
from .registry import Capability, ExecutionContext, ToolDescriptor, ToolError, ToolRegistry
from .sim import Gaze, LookAt, MoveTo, MovementBlocked, MovementComplete, SimError

logger = logging.getLogger(__name__)

WEATHER_KEY_ENV = "WEATHER_KEY"
SEARCH_KEY_ENV = "SEARCH_KEY"
DEFAULT_WEATHER_ENDPOINT = "https://api.openweathermap.org/data/2.5/weather"
DEFAULT_SEARCH_ENDPOINT = "https://api.tavily.com/search"


# ---------------------------------------------------------------------------
# External services: stub/live duality
# ---------------------------------------------------------------------------


class ServiceMode(Enum):
    STUB = "stub"
    LIVE = "live"


@dataclass(frozen=True)
class ServiceConfig:
    mode: ServiceMode = ServiceMode.STUB
    endpoint: str = ""
    key_env: str = ""


@dataclass(frozen=True)
class ExternalClientConfig:
    weather: ServiceConfig = ServiceConfig(
        endpoint=DEFAULT_WEATHER_ENDPOINT, key_env=WEATHER_KEY_ENV
    )
    search: ServiceConfig = ServiceConfig(
        endpoint=DEFAULT_SEARCH_ENDPOINT, key_env=SEARCH_KEY_ENV
    )


def _load_fixture(name: str) -> dict:
    path = resources.files("voicegate").joinpath("data").joinpath(name)
    return json.loads(path.read_text(encoding="utf-8"))


class StubWeatherClient:
    """Canned weather: fixture maps lowercase place name to payload."""

    def __init__(self, fixtures: Optional[dict] = None):
        self._fixtures = fixtures if fixtures is not None else _load_fixture("stub_weather.json")

    def lookup(self, location: str) -> str:
        payload = self._fixtures.get(location.strip().lower())
        if payload is None:
            raise ToolError(f"no weather data for {location}")
        return payload


class LiveWeatherClient:
    def __init__(self, config: ServiceConfig):
        self.key_env = config.key_env or WEATHER_KEY_ENV
        self.endpoint = config.endpoint or DEFAULT_WEATHER_ENDPOINT

    def lookup(self, location: str) -> str:
        key = os.environ.get(self.key_env, "")
        if not key:
            raise ToolError(f"missing key: set {self.key_env} to use live weather")
        try:
            response = requests.get(
                self.endpoint,
                params={"q": location, "appid": key, "units": "metric"},
                timeout=10,
            )
            response.raise_for_status()
            data = response.json()
        except requests.RequestException as exc:
            raise ToolError(f"weather service error: {exc}") from exc
        try:
            summary = data["weather"][0]["description"]
            temp = data["main"]["temp"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ToolError(f"weather service returned an unexpected shape: {exc}") from exc
        return f"{location}: {summary}, {temp:.0f} C"


class StubSearchClient:
    """Canned search: fixture maps lowercase query to payload."""

    def __init__(self, fixtures: Optional[dict] = None):
        self._fixtures = fixtures if fixtures is not None else _load_fixture("stub_search.json")

    def lookup(self, query: str) -> str:
        payload = self._fixtures.get(query.strip().lower())
        if payload is None:
            return f"no results for: {query}"
        return payload


class LiveSearchClient:
    def __init__(self, config: ServiceConfig):
        self.key_env = config.key_env or SEARCH_KEY_ENV
        self.endpoint = config.endpoint or DEFAULT_SEARCH_ENDPOINT

    def lookup(self, query: str) -> str:
        key = os.environ.get(self.key_env, "")
        if not key:
            raise ToolError(f"missing key: set {self.key_env} to use live search")
        try:
            response = requests.post(
                self.endpoint,
                json={"api_key": key, "query": query, "max_results": 3},
                timeout=10,
            )
            response.raise_for_status()
            data = response.json()
        except requests.RequestException as exc:
            raise ToolError(f"search service error: {exc}") from exc
        results = data.get("results") or []
        if not results:
            return f"no results for: {query}"
        lines = []
        for item in results:
            title = item.get("title", "untitled")
            url = item.get("url", "")
            lines.append(f"{title} ({url})" if url else title)
        return "; ".join(lines)


@dataclass
class ExternalClients:
    weather: object
    search: object


def make_external_clients(config: Optional[ExternalClientConfig] = None) -> ExternalClients:
    if config is None:
        config = ExternalClientConfig()
    weather = (
        StubWeatherClient() if config.weather.mode is ServiceMode.STUB
        else LiveWeatherClient(config.weather)
    )
    search = (
        StubSearchClient() if config.search.mode is ServiceMode.STUB
        else LiveSearchClient(config.search)
    )
    return ExternalClients(weather=weather, search=search)


# ---------------------------------------------------------------------------
# Tic-tac-toe
# ---------------------------------------------------------------------------

EMPTY = "."
WIN_LINES = ((0, 1, 2), (3, 4, 5), (6, 7, 8), (0, 3, 6), (1, 4, 7), (2, 5, 8), (0, 4, 8), (2, 4, 6))


@dataclass(frozen=True)
class TicTacToeState:
    board: tuple = (EMPTY,) * 9
    next_player: str = "X"


def winner(board) -> Optional[str]:
    for a, b, c in WIN_LINES:
        if board[a] != EMPTY and board[a] == board[b] == board[c]:
            return board[a]
    return None


def game_status(board) -> str:
    who = winner(board)
    if who is not None:
        return f"{who} wins"
    if EMPTY not in board:
        return "draw"
    return "ongoing"


def first_empty(board) -> Optional[int]:
    for i, cell in enumerate(board):
        if cell == EMPTY:
            return i
    return None


def place(state: TicTacToeState, cell: int) -> TicTacToeState:
    if state.board[cell] != EMPTY:
        raise ToolError(f"cell {cell} is occupied")
    board = list(state.board)
    board[cell] = state.next_player
    other = "O" if state.next_player == "X" else "X"
    return TicTacToeState(board=tuple(board), next_player=other)


def render_board(board) -> str:
    return "\n".join("|".join(board[row * 3 : row * 3 + 3]) for row in range(3))


def board_summary(state: TicTacToeState) -> str:
    flat = "".join(state.board)
    return f"[Tic-tac-toe board {flat}; status: {game_status(state.board)}]"


# ---------------------------------------------------------------------------
# Handlers
# ---------------------------------------------------------------------------


def _require_robot(ctx: ExecutionContext):
    # execute() already gates on capability; this is for direct handler calls
    if ctx.robot is None:
        raise ToolError("no robot connected")
    return ctx.robot


def handle_look_at_position(args: dict, ctx: ExecutionContext) -> str:
    x, y, z = args["x"], args["y"], args["z"]
    for value in (x, y, z):
        if not math.isfinite(value):
            raise ToolError("coordinates must be finite")
    robot = _require_robot(ctx)
    try:
        robot.execute(LookAt(gaze=Gaze(x, y, z)))
    except SimError as exc:
        raise ToolError(str(exc)) from exc
    return f"gaze set to ({x:.2f}, {y:.2f}, {z:.2f})"


def handle_analyze_vision(args: dict, ctx: ExecutionContext) -> str:
    robot = _require_robot(ctx)
    image = robot.capture()
    return image.description


def handle_move_to(args: dict, ctx: ExecutionContext) -> str:
    robot = _require_robot(ctx)
    location = args.get("location")
    if location:
        cmd = MoveTo(location=location)
        destination = location
    else:
        if "x" not in args or "y" not in args:
            raise ToolError("move_to needs either location or both x and y")
        cmd = MoveTo(x=args["x"], y=args["y"])
        destination = f"({args['x']:.2f}, {args['y']:.2f})"
    try:
        events = robot.execute(cmd)
    except SimError as exc:
        raise ToolError(str(exc)) from exc
    for event in events:
        if isinstance(event, MovementBlocked):
            bx, by = event.at
            raise ToolError(f"movement blocked at ({bx:.2f}, {by:.2f})")
        if isinstance(event, MovementComplete):
            return f"arrived at {destination}"
    return f"arrived at {destination}"


def handle_get_datetime(args: dict, ctx: ExecutionContext) -> str:
    now_fn = ctx.extras.get("wall_clock")
    now = now_fn() if now_fn is not None else datetime.now(timezone.utc)
    return now.isoformat(sep=" ", timespec="seconds")


def handle_get_weather(args: dict, ctx: ExecutionContext) -> str:
    if ctx.external_clients is None:
        raise ToolError("no external services configured")
    return ctx.external_clients.weather.lookup(args["location"])


def handle_web_search(args: dict, ctx: ExecutionContext) -> str:
    if ctx.external_clients is None:
        raise ToolError("no external services configured")
    return ctx.external_clients.search.lookup(args["query"])


def handle_tictactoe_move(args: dict, ctx: ExecutionContext) -> str:
    cell = int(args["cell"])
    games = ctx.extras.setdefault("games", {})
    state = games.get("tictactoe", TicTacToeState())
    if game_status(state.board) != "ongoing":
        state = TicTacToeState()  # previous game over; a new move starts fresh
    state = place(state, cell)
    reply_line = ""
    if game_status(state.board) == "ongoing":
        reply = first_empty(state.board)
        state = place(state, reply)
        reply_line = f"O played cell {reply}\n"
    games["tictactoe"] = state
    if ctx.send_context is not None:
        ctx.send_context(board_summary(state), False)
    return f"{render_board(state.board)}\n{reply_line}status: {game_status(state.board)}"


# ---------------------------------------------------------------------------
# Descriptors
# ---------------------------------------------------------------------------


def _number(name: str) -> ToolParam:
    return ToolParam(name=name, type="number", required=True)


def builtin_descriptors() -> list[ToolDescriptor]:
    return [
        ToolDescriptor(
            schema=ToolSchema(
                name="look_at_position",
                description="Point the robot's gaze at a 3D position in the robot frame (x forward, y left, z up), in meters.",
                parameters=(_number("x"), _number("y"), _number("z")),
            ),
            handler=handle_look_at_position,
            required_capability=Capability.ROBOT,
        ),
        ToolDescriptor(
            schema=ToolSchema(
                name="analyze_vision",
                description="Capture an image from the robot camera and describe what is visible.",
                parameters=(ToolParam(name="prompt", type="string", required=False),),
            ),
            handler=handle_analyze_vision,
            required_capability=Capability.ROBOT,
        ),
        ToolDescriptor(
            schema=ToolSchema(
                name="move_to",
                description="Drive the robot to a named location or to coordinates x,y in meters.",
                parameters=(
                    ToolParam(name="location", type="string", required=False),
                    ToolParam(name="x", type="number", required=False),
                    ToolParam(name="y", type="number", required=False),
                ),
            ),
            handler=handle_move_to,
            required_capability=Capability.ROBOT,
        ),
        ToolDescriptor(
            schema=ToolSchema(
                name="get_datetime",
                description="Current date and time.",
                parameters=(),
            ),
            handler=handle_get_datetime,
        ),
        ToolDescriptor(
            schema=ToolSchema(
                name="get_weather",
                description="Current weather for a place name.",
                parameters=(ToolParam(name="location", type="string", required=True),),
            ),
            handler=handle_get_weather,
            required_capability=Capability.NETWORK,
        ),
        ToolDescriptor(
            schema=ToolSchema(
                name="web_search",
                description="Search the web and return a short digest of results.",
                parameters=(ToolParam(name="query", type="string", required=True),),
            ),
            handler=handle_web_search,
            required_capability=Capability.NETWORK,
        ),
        ToolDescriptor(
            schema=ToolSchema(
                name="tictactoe_move",
                description="Play tic-tac-toe as X: place your mark on a cell (0-8, row major). The opponent replies automatically.",
                parameters=(
                    ToolParam(
                        name="cell",
                        type="enum",
                        required=True,
                        enum_values=tuple(str(i) for i in range(9)),
                    ),
                ),
            ),
            handler=handle_tictactoe_move,
        ),
    ]


def build_registry() -> ToolRegistry:
    registry = ToolRegistry()
    for descriptor in builtin_descriptors():
        registry.register(descriptor)
    return registry
