"""Client-side duplex session management.

A session is a newline-framed stream to an S2S backend. Provider adapters
translate between provider frames and the canonical event vocabulary; only
the canonical adapter (identity translation) is functional offline, the
cloud providers are selectable stubs.
"""

from __future__ import annotations

import asyncio
import logging
from typing import AsyncIterator

from .protocol import (
    SessionConfig,
    SessionEvent,
    decode_event,
    encode_event,
    is_client_event,
)

logger = logging.getLogger(__name__)

HANDSHAKE_TIMEOUT_S = 5.0
_MAX_FRAME_BYTES = 1 << 20


class SessionError(Exception):
    pass


class ConnectFailed(SessionError):
    pass


class ConfigRejected(SessionError):
    pass


class SessionClosed(SessionError):
    pass


class AdapterUnavailable(SessionError):
    """Raised when a stub provider adapter is asked to do real work."""


class ProviderAdapter:
    """Translates provider frames to/from canonical session events.

    Capability flags describe what the provider supports; the canonical
    adapter is the identity translation and supports everything.
    """

    name = "abstract"
    supports_audio_in = True
    supports_interrupt = True
    is_stub = False

    def encode_frame(self, event: SessionEvent) -> str:
        raise NotImplementedError

    def decode_frame(self, line: str) -> SessionEvent:
        raise NotImplementedError


class CanonicalAdapter(ProviderAdapter):
    """Identity translation: wire frames are the canonical encoding."""

    name = "canonical"

    def encode_frame(self, event: SessionEvent) -> str:
        return encode_event(event)

    def decode_frame(self, line: str) -> SessionEvent:
        return decode_event(line)


class _StubAdapter(ProviderAdapter):
    """Placeholder for a live cloud provider; fails loudly if used."""

    is_stub = True

    def encode_frame(self, event: SessionEvent) -> str:
        raise AdapterUnavailable(
            f"provider adapter {self.name!r} is a stub; use 'canonical' against the mock backend"
        )

    decode_frame = encode_frame  # type: ignore[assignment]


class OpenAIRealtimeAdapter(_StubAdapter):
    name = "openai"


class AzureRealtimeAdapter(_StubAdapter):
    name = "azure"


class XAIVoiceAdapter(_StubAdapter):
    name = "xai"


class GeminiLiveAdapter(_StubAdapter):
    name = "gemini"


ADAPTERS: dict[str, type[ProviderAdapter]] = {
    "canonical": CanonicalAdapter,
    "openai": OpenAIRealtimeAdapter,
    "azure": AzureRealtimeAdapter,
    "xai": XAIVoiceAdapter,
    "gemini": GeminiLiveAdapter,
}


def make_adapter(name: str) -> ProviderAdapter:
    try:
        return ADAPTERS[name]()
    except KeyError:
        raise ConnectFailed(f"unknown adapter {name!r}; available: {sorted(ADAPTERS)}") from None


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    """Accepts 'host:port' or 'tcp://host:port'."""
    ep = endpoint
    if "://" in ep:
        scheme, _, rest = ep.partition("://")
        if scheme != "tcp":
            raise ConnectFailed(f"unsupported endpoint scheme {scheme!r}")
        ep = rest
    host, sep, port = ep.rpartition(":")
    if not sep or not host:
        raise ConnectFailed(f"endpoint must be host:port, got {endpoint!r}")
    try:
        port_num = int(port)
    except ValueError:
        raise ConnectFailed(f"bad port in endpoint {endpoint!r}") from None
    if not 1 <= port_num <= 65535:
        raise ConnectFailed(f"port out of range in endpoint {endpoint!r}")
    return host, port_num


class SessionHandle:
    """One open duplex session.

    Sends are serialized internally so concurrent tasks observe per-session
    FIFO delivery. The inbound stream has exactly one consumer: events().
    """

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter, adapter: ProviderAdapter):
        self._reader = reader
        self._writer = writer
        self._adapter = adapter
        self._send_lock = asyncio.Lock()
        self._inbound: asyncio.Queue[SessionEvent | None] = asyncio.Queue()
        self._reader_task: asyncio.Task | None = None
        self._closed = False
        self._seq_guard = -1

    @property
    def closed(self) -> bool:
        return self._closed

    def _start_reader(self) -> None:
        self._reader_task = asyncio.ensure_future(self._read_loop())

    async def _read_loop(self) -> None:
        try:
            while True:
                line = await self._reader.readline()
                if not line:
                    break
                text = line.decode("utf-8", errors="replace").rstrip("\r\n")
                if not text:
                    continue
                try:
                    event = self._adapter.decode_frame(text)
                except Exception as exc:
                    logger.warning("dropping undecodable inbound frame: %s", exc)
                    continue
                await self._inbound.put(event)
        except (ConnectionError, asyncio.CancelledError):
            pass
        finally:
            self._closed = True
            await self._inbound.put(None)

    async def send(self, event: SessionEvent) -> None:
        """Send one client-originated event; completes once handed to the OS
        in FIFO order relative to every other send on this handle."""
        if not is_client_event(event):
            raise ValueError(f"not a client-originated event: {event!r}")
        from .protocol import AudioInputChunk

        if isinstance(event, AudioInputChunk):
            if event.seq <= self._seq_guard:
                raise ValueError(
                    f"audio seq must be strictly increasing (last {self._seq_guard}, got {event.seq})"
                )
            self._seq_guard = event.seq
        frame = self._adapter.encode_frame(event)
        async with self._send_lock:
            if self._closed:
                raise SessionClosed("session is closed")
            try:
                self._writer.write(frame.encode("utf-8") + b"\n")
                await self._writer.drain()
            except ConnectionError as exc:
                self._closed = True
                raise SessionClosed(str(exc)) from exc

    async def events(self) -> AsyncIterator[SessionEvent]:
        """Yield inbound events until the session closes."""
        while True:
            event = await self._inbound.get()
            if event is None:
                return
            yield event

    async def close(self) -> None:
        """Terminate the session; idempotent."""
        if self._closed:
            return
        self._closed = True
        if self._reader_task is not None:
            self._reader_task.cancel()
        try:
            self._writer.close()
            await self._writer.wait_closed()
        except (ConnectionError, OSError):
            pass
        await self._inbound.put(None)


async def open_session(
    config: SessionConfig,
    endpoint: str,
    adapter: ProviderAdapter | None = None,
    *,
    handshake_timeout: float = HANDSHAKE_TIMEOUT_S,
) -> SessionHandle:
    """Connect, deliver the session config, and wait for the backend's ack.

    The config frame is always the first frame on the wire. The backend
    acknowledges a valid config by echoing it (the same convention realtime
    APIs use when they answer a session update with the applied session
    state). A close or a non-config first reply means the config was
    rejected.
    """
    adapter = adapter or CanonicalAdapter()
    if adapter.is_stub:
        raise ConnectFailed(
            f"adapter {adapter.name!r} is a stub; only 'canonical' connects in this build"
        )
    host, port = parse_endpoint(endpoint)
    try:
        reader, writer = await asyncio.open_connection(host, port, limit=_MAX_FRAME_BYTES)
    except OSError as exc:
        raise ConnectFailed(f"cannot connect to {endpoint}: {exc}") from exc

    handle = SessionHandle(reader, writer, adapter)
    try:
        frame = adapter.encode_frame(config)
        writer.write(frame.encode("utf-8") + b"\n")
        await writer.drain()
        line = await asyncio.wait_for(reader.readline(), timeout=handshake_timeout)
    except (asyncio.TimeoutError, ConnectionError, OSError) as exc:
        writer.close()
        raise ConfigRejected(f"no config acknowledgment from backend: {exc}") from exc
    if not line:
        writer.close()
        raise ConfigRejected("backend closed the connection during handshake")
    try:
        ack = adapter.decode_frame(line.decode("utf-8").rstrip("\r\n"))
    except Exception as exc:
        writer.close()
        raise ConfigRejected(f"undecodable handshake reply: {exc}") from exc
    if not isinstance(ack, SessionConfig):
        writer.close()
        raise ConfigRejected(f"backend replied with {type(ack).__name__}, not a config ack")
    handle._start_reader()
    return handle


async def close_session(handle: SessionHandle) -> None:
    """Module-level close, idempotent; mirrors open_session."""
    await handle.close()
