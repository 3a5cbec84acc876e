"""Command-line entry points for the gateway and the mock backend."""

from __future__ import annotations

import argparse
import asyncio
import logging
import sys

from .console import ConsoleServer, parse_bind
from .gateway import GatewayConfig, GatewayError, GatewayService
from .mockserver import ScenarioError, load_scenario, serve
from .protocol import InputMode
from .session import SessionError

logger = logging.getLogger(__name__)

_MODES = {"audio": InputMode.DIRECT_AUDIO, "stt": InputMode.STT}


def build_gateway_config(argv: list[str]) -> tuple[GatewayConfig, str | None]:
    parser = argparse.ArgumentParser(
        prog="voicegate",
        description="Run the interaction gateway against a speech-to-speech backend.",
    )
    parser.add_argument("--backend", required=True, help="backend endpoint, host:port")
    parser.add_argument("--adapter", default="canonical", help="provider adapter name")
    parser.add_argument("--world", default=None, help="world file for the robot simulation")
    parser.add_argument("--rules", default=None, help="perception rules file")
    parser.add_argument("--mode", choices=sorted(_MODES), default="audio", help="input mode")
    parser.add_argument("--console", default=None, help="console feed bind address, host:port")
    parser.add_argument("--transcript", default=None, help="append transcript records to this file")
    parser.add_argument("--latency-report", default=None, help="write a latency table on exit")
    parser.add_argument(
        "--no-gate-thinking", action="store_true",
        help="forward microphone audio while the model is thinking",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    config = GatewayConfig(
        backend=args.backend,
        adapter=args.adapter,
        input_mode=_MODES[args.mode],
        world_path=args.world,
        rules_path=args.rules,
        gate_during_thinking=not args.no_gate_thinking,
        console_bind=args.console,
        transcript_path=args.transcript,
        latency_report_path=args.latency_report,
    )
    return config, args.console


async def _run_gateway(config: GatewayConfig, console_bind: str | None) -> None:
    service = GatewayService(config)
    await service.start()
    console = None
    if console_bind:
        host, port = parse_bind(console_bind)
        console = ConsoleServer(service, host, port)
        await console.start()
        logger.info("console clients may connect to %s", console.endpoint)
    try:
        await service.wait_closed()
    finally:
        if console is not None:
            await console.stop()
        await service.stop()


def main_gateway(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        config, console_bind = build_gateway_config(argv)
    except GatewayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        asyncio.run(_run_gateway(config, console_bind))
    except KeyboardInterrupt:
        pass
    except (GatewayError, SessionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


async def _run_mock(scenario_path: str, bind: str) -> None:
    scenario = load_scenario(scenario_path)
    server = await serve(scenario, bind)
    print(f"mock backend listening on {server.endpoint}", flush=True)
    try:
        await asyncio.Event().wait()
    finally:
        await server.stop()


def main_mock(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="voicegate-mock",
        description="Serve a scripted speech-to-speech backend for offline runs.",
    )
    parser.add_argument("--scenario", required=True, help="scenario script to replay")
    parser.add_argument("--bind", default="127.0.0.1:0", help="listen address, host:port")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv if argv is not None else sys.argv[1:])
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        asyncio.run(_run_mock(args.scenario, args.bind))
    except KeyboardInterrupt:
        pass
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0
