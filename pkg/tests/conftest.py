"""Shared test harness: in-process mock backend + gateway pairs."""

from __future__ import annotations

import asyncio
from typing import Callable, Optional

from voicegate.gateway import GatewayConfig, GatewayService
from voicegate.mockserver import MockS2SServer, parse_scenario
from voicegate.protocol import InputMode
from voicegate.sim import SimulatedRobotController, parse_world


def run(coro, timeout: float = 60.0):
    """Run an async test body under a hard timeout."""
    return asyncio.run(asyncio.wait_for(coro, timeout))


class LivePair:
    """One mock backend plus one gateway wired to it, all in-process.

    Tests drive the gateway through console commands and poll the transcript,
    which is the system's total event order.
    """

    def __init__(
        self,
        scenario: str,
        *,
        world: Optional[str] = None,
        mode: InputMode = InputMode.STT,
        **config_kw,
    ):
        self.scenario_text = scenario
        self.world_text = world
        self.mode = mode
        self.config_kw = config_kw
        self.server: Optional[MockS2SServer] = None
        self.service: Optional[GatewayService] = None

    async def __aenter__(self) -> "LivePair":
        self.server = MockS2SServer(parse_scenario(self.scenario_text))
        await self.server.start()
        controller = None
        if self.world_text is not None:
            controller = SimulatedRobotController(parse_world(self.world_text))
        config = GatewayConfig(
            backend=self.server.endpoint, input_mode=self.mode, **self.config_kw
        )
        self.service = GatewayService(config, controller=controller)
        await self.service.start()
        return self

    async def __aexit__(self, *exc) -> None:
        if self.service is not None:
            await self.service.stop()
        if self.server is not None:
            await self.server.stop()

    @property
    def controller(self) -> SimulatedRobotController:
        return self.service.controller

    def send_text(self, text: str) -> None:
        self.service.submit_command({"cmd": "send_text", "text": text})

    def command(self, **cmd) -> None:
        self.service.submit_command(cmd)

    async def wait(self, predicate: Callable[[list], bool], timeout: float = 15.0) -> list:
        """Poll the transcript until predicate(records) holds."""
        loop = asyncio.get_running_loop()
        deadline = loop.time() + timeout
        while True:
            records = self.service.transcript()
            if predicate(records):
                return records
            if loop.time() > deadline:
                tail = [(r.seq, r.direction, r.kind, r.body) for r in records[-12:]]
                raise AssertionError(f"timed out; transcript tail: {tail}")
            await asyncio.sleep(0.02)

    async def wait_turn_end(self, n: int = 1, timeout: float = 15.0) -> list:
        return await self.wait(
            lambda rs: sum(1 for r in rs if r.body.get("turn") == "end") >= n, timeout
        )


def cards(records, *, completed: bool = True) -> list:
    """Function-card records; completed ones carry payloads."""
    want_direction = "system" if completed else "model"
    return [r for r in records if r.kind == "function-card" and r.direction == want_direction]


def model_text(records) -> str:
    return "".join(r.body["text"] for r in records if r.direction == "model" and r.kind == "text")
