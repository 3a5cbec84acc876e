"""WebSocket feed for operator consoles.

Each client gets the full replay (hello, state, transcript, world, latency)
followed by live records, and may send JSON command objects back. Commands
are funneled into the gateway's single consumer loop; errors go back to the
sender only, and the connection survives them.
"""

from __future__ import annotations

import asyncio
import json
import logging

from websockets.asyncio.server import serve
from websockets.exceptions import ConnectionClosed

logger = logging.getLogger(__name__)


class ConsoleBindFailed(Exception):
    pass


class ConsoleServer:
    def __init__(self, gateway, host: str = "127.0.0.1", port: int = 0):
        self.gateway = gateway
        self.host = host
        self.port = port
        self._server = None

    async def start(self) -> None:
        try:
            self._server = await serve(self._handler, self.host, self.port)
        except OSError as exc:
            raise ConsoleBindFailed(f"cannot bind console on {self.host}:{self.port}: {exc}") from exc
        self.port = next(iter(self._server.sockets)).getsockname()[1]
        logger.info("console feed on ws://%s:%d", self.host, self.port)

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None

    @property
    def endpoint(self) -> str:
        return f"ws://{self.host}:{self.port}"

    async def _handler(self, websocket) -> None:
        queue: asyncio.Queue = asyncio.Queue()
        self.gateway.register_feed(queue)
        sender = asyncio.ensure_future(self._relay(websocket, queue))
        try:
            async for raw in websocket:
                try:
                    cmd = json.loads(raw)
                except ValueError:
                    queue.put_nowait({"kind": "error", "message": "commands must be JSON"})
                    continue
                self.gateway.submit_command(cmd, reply=queue.put_nowait)
        except ConnectionClosed:
            pass
        finally:
            self.gateway.unregister_feed(queue)
            sender.cancel()

    async def _relay(self, websocket, queue: asyncio.Queue) -> None:
        try:
            while True:
                record = await queue.get()
                await websocket.send(json.dumps(record, sort_keys=True, default=str))
        except (ConnectionClosed, asyncio.CancelledError):
            pass


def parse_bind(address: str) -> tuple[str, int]:
    host, _, port = address.rpartition(":")
    if not host:
        raise ConsoleBindFailed(f"console bind must be host:port, got {address!r}")
    try:
        return host, int(port)
    except ValueError:
        raise ConsoleBindFailed(f"bad port in {address!r}") from None
