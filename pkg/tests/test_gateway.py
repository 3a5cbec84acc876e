"""Gateway tests: input transforms, transcript mapping, commands, feeds."""

import asyncio
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LivePair, cards, model_text, run
from voicegate.console import ConsoleBindFailed, ConsoleServer, parse_bind
from voicegate.gateway import (
    AUDIO_CHUNK_MS,
    GatewayConfig,
    GatewayError,
    Utterance,
    input_mode_transform,
    text_duration_ms,
)
from voicegate.protocol import AudioInputChunk, InputMode, TextInput, ToolResultEvent
from voicegate.turns import TurnState

FAST = 'latency s2s first_token_ms=10\n'


async def command_reply(pair: LivePair, cmd: dict, timeout: float = 5.0) -> dict:
    """Submit a console command and wait for its reply record."""
    replies: list = []
    pair.service.submit_command(cmd, reply=replies.append)
    loop = asyncio.get_running_loop()
    deadline = loop.time() + timeout
    while not replies:
        if loop.time() > deadline:
            raise AssertionError(f"no reply to {cmd!r}")
        await asyncio.sleep(0.01)
    return replies[0]


def state_changes(records) -> list[str]:
    return [r.body["state"] for r in records if r.kind == "state-change" and "state" in r.body]


# -- input mode transform ------------------------------------------------------


def test_text_duration_has_floor():
    assert text_duration_ms("") == 300
    assert text_duration_ms("abcde") == 300  # 5 chars * 60 hits the floor exactly
    assert text_duration_ms("x" * 10) == 600


def test_stt_transform_is_one_text_input():
    events = input_mode_transform(InputMode.STT, Utterance(text="hello", duration_ms=900))
    assert events == [TextInput(text="hello", confidence=0.92)]
    custom = input_mode_transform(
        InputMode.STT, Utterance(text="hi"), confidence=0.5
    )
    assert custom == [TextInput(text="hi", confidence=0.5)]


def test_stt_transform_empty_text_becomes_inaudible():
    (event,) = input_mode_transform(InputMode.STT, Utterance(text="", duration_ms=400))
    assert event.text == "(inaudible)"


def test_direct_audio_transform_chunks_and_sentinel():
    events = input_mode_transform(
        InputMode.DIRECT_AUDIO, Utterance(text="label", duration_ms=1200), start_seq=7
    )
    assert [(e.seq, e.duration_ms, e.payload_ref) for e in events] == [
        (7, 500, "label"),
        (8, 500, ""),
        (9, 200, ""),
        (10, 0, ""),
    ]


def test_direct_audio_exact_multiple_of_chunk():
    events = input_mode_transform(InputMode.DIRECT_AUDIO, Utterance(duration_ms=1000))
    assert [e.duration_ms for e in events] == [500, 500, 0]


def test_direct_audio_zero_duration_is_just_the_end_marker():
    events = input_mode_transform(InputMode.DIRECT_AUDIO, Utterance(duration_ms=0))
    assert [e.duration_ms for e in events] == [0]


@settings(max_examples=200)
@given(duration=st.integers(min_value=1, max_value=10_000), start=st.integers(1, 1000))
def test_direct_audio_conserves_duration(duration, start):
    events = input_mode_transform(
        InputMode.DIRECT_AUDIO, Utterance(text="t", duration_ms=duration), start_seq=start
    )
    assert all(isinstance(e, AudioInputChunk) for e in events)
    assert sum(e.duration_ms for e in events) == duration
    assert events[-1].duration_ms == 0  # exactly one end marker, last
    assert all(0 < e.duration_ms <= AUDIO_CHUNK_MS for e in events[:-1])
    assert [e.seq for e in events] == list(range(start, start + len(events)))
    assert [e.payload_ref for e in events[1:]] == [""] * (len(events) - 1)


# -- config validation ---------------------------------------------------------


def test_config_requires_backend():
    with pytest.raises(GatewayError):
        GatewayConfig(backend="").validate()


def test_config_rejects_missing_world_file(tmp_path):
    config = GatewayConfig(backend="localhost:1", world_path=str(tmp_path / "nope.world"))
    with pytest.raises(GatewayError, match="no such file"):
        config.validate()


# -- scripted turns over a live pair -------------------------------------------


def test_text_turn_transcript_order():
    scenario = FAST + 'on_user_input match=hello\nemit_turn text="hi there"\n'

    async def main():
        async with LivePair(scenario) as pair:
            assert pair.service.state is TurnState.LISTENING
            pair.send_text("hello")
            records = await pair.wait_turn_end()

            assert records[0].body == {"input_mode": "stt", "tools": 7}
            assert records[0].direction == "system"
            assert state_changes(records)[:1] == ["listening"]

            kinds = [(r.direction, r.kind) for r in records]
            user_at = kinds.index(("user", "text"))
            assert records[user_at].body == {"text": "hello", "confidence": 0.92}
            start_at = next(
                i for i, r in enumerate(records) if r.body.get("turn") == "start"
            )
            first_delta_at = kinds.index(("model", "text"))
            end_at = next(i for i, r in enumerate(records) if r.body.get("turn") == "end")
            assert user_at < start_at < first_delta_at < end_at
            assert model_text(records) == "hi there"

            # one actual state change each: listening, thinking, speaking, listening
            assert state_changes(records) == ["listening", "thinking", "speaking", "listening"]
            # the handshake config echo is consumed inside the session, not surfaced
            assert not any(r.body.get("config_echo") for r in records)

    run(main())


def test_latency_sample_per_scripted_turn():
    scenario = 'latency s2s first_token_ms=40\non_user_input match=*\nemit_turn text=ok\n'

    async def main():
        async with LivePair(scenario) as pair:
            pair.send_text("ping")
            await pair.wait_turn_end()
            samples = pair.service.record_latency()
            assert len(samples) == 1
            sample = samples[0]
            assert sample.turn_index == 1
            assert sample.t_first_delta >= sample.t_user_end
            assert 30 <= sample.latency_ms <= 2000

    run(main())


def test_direct_audio_turn_round_trip():
    scenario = FAST + 'on_user_input match=weather\nemit_turn text=sunny\n'

    async def main():
        async with LivePair(scenario, mode=InputMode.DIRECT_AUDIO) as pair:
            pair.command(cmd="simulate_audio", duration_ms=700, text="what is the weather")
            records = await pair.wait_turn_end()
            sent = [r.body for r in records if r.direction == "user" and r.kind == "audio-ms"]
            assert [b["duration_ms"] for b in sent] == [500, 200, 0]
            assert sent[0]["payload_ref"] == "what is the weather"
            assert all("payload_ref" not in b for b in sent[1:])
            assert model_text(records) == "sunny"

    run(main())


def test_tool_call_round_trip_cards():
    scenario = (
        FAST
        + "on_user_input match=time\n"
        + "emit_tool_call label=t name=get_datetime args={}\n"
        + "await_tool_result label=t\n"
        + 'emit_turn text="it is late"\n'
    )

    async def main():
        async with LivePair(scenario) as pair:
            pair.send_text("what time is it")
            records = await pair.wait_turn_end()

            (call,) = cards(records, completed=False)
            (done,) = cards(records, completed=True)
            assert call.body["phase"] == "call"
            assert call.body["name"] == done.body["name"] == "get_datetime"
            assert call.body["call_id"] == done.body["call_id"] == "call-1-1"
            assert done.body["is_error"] is False
            assert done.body["self_initiated"] is False
            assert done.body["payload"]
            assert done.body["elapsed_ms"] >= 0

            # thinking is re-announced when tool execution starts and ends
            assert state_changes(records).count("thinking") == 3
            assert model_text(records) == "it is late"

    run(main())


# -- barge-in -------------------------------------------------------------------


def test_tap_interrupts_speaking_turn():
    scenario = FAST + 'on_user_input match=story\nemit_turn text="Once upon a time." audio_ms=6000\n'

    async def main():
        async with LivePair(scenario) as pair:
            pair.send_text("tell me a story")
            await pair.wait(
                lambda rs: any(
                    r.direction == "model" and r.kind == "audio-ms" for r in rs
                )
            )
            pair.command(cmd="tap")
            records = await pair.wait_turn_end(timeout=5.0)

            tap_at = next(
                i for i, r in enumerate(records) if r.body.get("interrupt") is True
            )
            assert records[tap_at].direction == "user"
            late_audio = [
                r.body
                for r in records[tap_at + 1 :]
                if r.direction == "model" and r.kind == "audio-ms"
            ]
            assert all(b.get("dropped") is True for b in late_audio)
            kept_ms = sum(
                r.body["duration_ms"]
                for r in records
                if r.direction == "model"
                and r.kind == "audio-ms"
                and not r.body.get("dropped")
            )
            assert kept_ms < 6000
            assert "listening" in state_changes(records[tap_at:])
            assert pair.service.state is TurnState.LISTENING

    run(main())


def test_tap_when_idle_is_informational():
    async def main():
        async with LivePair(FAST) as pair:
            reply = await command_reply(pair, {"cmd": "tap"})
            assert reply == {"kind": "info", "message": "nothing to interrupt"}
            assert not any(r.body.get("interrupt") for r in pair.service.transcript())

    run(main())


def test_audio_is_gated_while_speaking():
    scenario = (
        FAST
        + 'on_user_input match=story\nemit_turn text="a long tale" audio_ms=2000\n'
        + 'on_user_input match=*\nemit_turn text=done\n'
    )

    async def main():
        async with LivePair(scenario, mode=InputMode.DIRECT_AUDIO) as pair:
            pair.command(cmd="simulate_audio", duration_ms=400, text="story")
            await pair.wait(lambda rs: "speaking" in state_changes(rs))
            pair.command(cmd="simulate_audio", duration_ms=400, text="barge noise")
            records = await pair.wait_turn_end()
            refs = [
                r.body.get("payload_ref")
                for r in records
                if r.direction == "user" and r.kind == "audio-ms"
            ]
            assert "barge noise" not in refs  # every chunk of the probe was gated

            # mic reopens after the turn, so a fresh utterance goes through
            pair.command(cmd="simulate_audio", duration_ms=400, text="hi again")
            records = await pair.wait_turn_end(2)
            assert "done" in model_text(records)

    run(main())


# -- robot events --------------------------------------------------------------


def test_touch_command_injects_and_prompts_reply():
    scenario = FAST + 'on_user_input match=touched\nemit_turn text="I felt that"\n'

    async def main():
        async with LivePair(scenario) as pair:
            pair.command(cmd="touch", sensor="right_hand")
            records = await pair.wait_turn_end()
            (ctx,) = [r for r in records if r.kind == "context"]
            assert ctx.direction == "system"
            assert ctx.body == {
                "message": "[User touched my right hand]",
                "request_response": True,
            }
            assert model_text(records) == "I felt that"

    run(main())


def test_touch_unknown_sensor_fails():
    async def main():
        async with LivePair(FAST) as pair:
            reply = await command_reply(pair, {"cmd": "touch", "sensor": "tail"})
            assert reply["kind"] == "error"
            assert "unknown touch sensor" in reply["message"]

    run(main())


def test_hardware_change_becomes_context():
    async def main():
        async with LivePair(FAST) as pair:
            pair.controller.set_hardware(charging_flap_open=True)
            records = await pair.wait(
                lambda rs: any(r.kind == "context" for r in rs)
            )
            (ctx,) = [r for r in records if r.kind == "context"]
            assert ctx.body["message"] == "[Hardware update: charging_flap_open = True]"
            assert ctx.body["request_response"] is False

    run(main())


def test_blocked_move_triggers_reflex_inspection():
    world = (
        "pose x=0 y=0 theta=0\n"
        "obstacle x0=0.9 y0=-0.5 x1=1.1 y1=0.5 name=crate\n"
    )
    scenario = (
        FAST
        + "on_user_input match=go\n"
        + 'emit_tool_call label=mv name=move_to args=\'{"x": 1.8, "y": 0.0}\'\n'
        + "await_tool_result label=mv\n"
        + 'emit_turn text="hmm, blocked"\n'
    )

    async def main():
        async with LivePair(scenario, world=world) as pair:
            pair.send_text("go forward")
            records = await pair.wait(
                lambda rs: sum(1 for r in rs if r.kind == "function-card"
                               and r.direction == "system") >= 2
            )
            await pair.wait_turn_end()

            done = {c.body["name"]: c.body for c in cards(records)}
            assert done["move_to"]["is_error"] is True
            assert "movement blocked at (0.90, 0.00)" in done["move_to"]["payload"]
            assert done["analyze_vision"]["self_initiated"] is True
            assert done["analyze_vision"]["call_id"].startswith("self-")
            assert "crate" in done["analyze_vision"]["payload"]

            ctx = [r.body["message"] for r in records if r.kind == "context"]
            assert "[Movement blocked at (0.90, 0.00); checking what is in the way]" in ctx

            pose = pair.controller.world.robot
            assert (pose.x, pose.y) == pytest.approx((0.8, 0.0), abs=1e-9)

            # the inspection result reaches the backend even though it never asked
            notes = [
                r.note
                for r in pair.server.receipt_log()
                if isinstance(r.event, ToolResultEvent)
                and r.event.call_id.startswith("self-")
            ]
            assert notes == ["unsolicited_result"]

    run(main())


# -- perception rules -----------------------------------------------------------


def test_proximity_rules_fire_once_within_cooldown(tmp_path):
    rules_path = tmp_path / "prox.rules"
    rules_path.write_text(
        'rule id=greet on=PersonRecognized action=respond '
        'template="[{identity} is nearby]" cooldown_ms=60000\n'
        'rule id=track on=PersonDistance action=context '
        'template="[{identity} at {distance} m]" distance_below=1.5 cooldown_ms=60000\n'
    )
    world = "pose x=0 y=0 theta=0\nperson id=p1 x=10 y=0 name=Ada\n"
    scenario = FAST + 'on_user_input match=nearby\nemit_turn text="hello Ada"\n'

    async def main():
        async with LivePair(
            scenario, world=world, rules_path=str(rules_path), tick_interval_s=0.05
        ) as pair:
            await asyncio.sleep(0.2)  # a few ticks at 10 m: nothing within range
            assert not any(r.kind == "context" for r in pair.service.transcript())

            pair.command(cmd="move_person", id="p1", x=1.0, y=0.0)
            records = await pair.wait_turn_end()
            messages = [r.body["message"] for r in records if r.kind == "context"]
            assert "[Ada is nearby]" in messages
            assert "[p1 at 1.0 m]" in messages  # distance events carry no identity
            assert model_text(records) == "hello Ada"

            await asyncio.sleep(0.3)  # person stays close; cooldown holds both rules
            final = [
                r.body["message"]
                for r in pair.service.transcript()
                if r.kind == "context"
            ]
            assert len(final) == 2

    run(main())


def test_move_person_unknown_id_fails():
    async def main():
        async with LivePair(FAST, world="pose x=0 y=0 theta=0\n") as pair:
            reply = await command_reply(
                pair, {"cmd": "move_person", "id": "ghost", "x": 1, "y": 2}
            )
            assert reply["kind"] == "error"
            assert "ghost" in reply["message"]

    run(main())


# -- command validation ----------------------------------------------------------


def test_bad_commands_get_error_replies():
    bad = [
        {"cmd": "definitely_not_a_command"},
        {"no_cmd_key": 1},
        {"cmd": "send_text", "text": "   "},
        {"cmd": "send_text"},
        {"cmd": "simulate_audio", "duration_ms": 0},
        {"cmd": "simulate_audio", "duration_ms": -5},
        {"cmd": "simulate_audio", "duration_ms": True},
        {"cmd": "simulate_audio", "duration_ms": "500"},
        {"cmd": "simulate_audio", "duration_ms": 500, "text": 7},
        {"cmd": "set_input_mode", "mode": "telepathy"},
        {"cmd": "touch", "sensor": None},
        {"cmd": "move_person", "id": "p1", "x": "left", "y": 0},
    ]

    async def main():
        async with LivePair(FAST) as pair:
            for cmd in bad:
                reply = await command_reply(pair, cmd)
                assert reply["kind"] == "error", cmd
            assert len(pair.service.transcript()) == 2  # config sent + listening

    run(main())


def test_set_input_mode_switches_and_reconfigures():
    scenario = FAST + 'on_user_input match=*\nemit_turn text="heard you"\n'

    async def main():
        async with LivePair(scenario, mode=InputMode.STT) as pair:
            reply = await command_reply(pair, {"cmd": "set_input_mode", "mode": "direct_audio"})
            assert reply == {"kind": "info", "message": "input mode is now direct_audio"}

            # the config resend is recorded, and this time its echo is app-visible
            records = await pair.wait(
                lambda rs: any(r.body.get("config_echo") for r in rs)
            )
            resend = [
                r.body for r in records
                if r.kind == "state-change" and r.body.get("input_mode") == "direct_audio"
            ]
            assert {"input_mode": "direct_audio", "tools": 7} in resend

            pair.command(cmd="simulate_audio", duration_ms=300, text="hi")
            records = await pair.wait_turn_end()
            assert any(
                r.direction == "user" and r.kind == "audio-ms" for r in records
            )

    run(main())


# -- console feed ----------------------------------------------------------------


def drain(queue: asyncio.Queue) -> list[dict]:
    items = []
    while True:
        try:
            items.append(queue.get_nowait())
        except asyncio.QueueEmpty:
            return items


def test_feed_replays_then_streams():
    scenario = FAST + 'on_user_input match=*\nemit_turn text=ok\n' * 2

    async def main():
        async with LivePair(scenario) as pair:
            pair.send_text("ping")
            await pair.wait_turn_end()

            queue: asyncio.Queue = asyncio.Queue()
            pair.service.register_feed(queue)
            replay = drain(queue)

            assert replay[0]["kind"] == "hello"
            assert replay[0]["input_mode"] == "stt"
            assert len(replay[0]["tools"]) == 7
            assert replay[1] == {"kind": "state", "state": "listening"}
            transcript = [r for r in replay if r["kind"] == "transcript"]
            assert [t["record"]["seq"] for t in transcript] == [
                r.seq for r in pair.service.transcript()
            ]
            assert [r["kind"] for r in replay].count("world") == 1
            assert [r["kind"] for r in replay if r["kind"] == "latency"] == ["latency"]

            pair.send_text("again")
            await pair.wait_turn_end(2)
            live = drain(queue)
            assert any(r["kind"] == "transcript" for r in live)
            assert any(r["kind"] == "latency" for r in live)

            pair.service.unregister_feed(queue)
            pair.send_text("after detach")
            await asyncio.sleep(0.1)
            assert drain(queue) == []

    run(main())


def test_console_websocket_serves_replay_and_commands():
    from websockets.asyncio.client import connect

    scenario = FAST + 'on_user_input match=*\nemit_turn text="over the wire"\n'

    async def recv_record(ws):
        return json.loads(await asyncio.wait_for(ws.recv(), timeout=10))

    async def recv_until(ws, pred):
        for _ in range(500):
            record = await recv_record(ws)
            if pred(record):
                return record
        raise AssertionError("expected record never arrived")

    async def main():
        async with LivePair(scenario) as pair:
            console = ConsoleServer(pair.service, host="127.0.0.1", port=0)
            await console.start()
            try:
                async with connect(console.endpoint) as ws:
                    hello = await recv_record(ws)
                    assert hello["kind"] == "hello"
                    assert (await recv_record(ws))["kind"] == "state"
                    await recv_until(ws, lambda r: r["kind"] == "world")

                    await ws.send(json.dumps({"cmd": "send_text", "text": "hi"}))
                    record = await recv_until(
                        ws,
                        lambda r: r["kind"] == "transcript"
                        and r["record"]["kind"] == "text"
                        and r["record"]["direction"] == "model",
                    )
                    assert record["record"]["body"]["text"].startswith("over")

                    await ws.send("this is not json")
                    error = await recv_until(ws, lambda r: r["kind"] == "error")
                    assert error["message"] == "commands must be JSON"

                    await ws.send(json.dumps({"cmd": "bogus"}))
                    error = await recv_until(ws, lambda r: r["kind"] == "error")
                    assert "unknown command" in error["message"]
            finally:
                await console.stop()

    run(main())


def test_parse_bind():
    assert parse_bind("127.0.0.1:8765") == ("127.0.0.1", 8765)
    assert parse_bind("0.0.0.0:0") == ("0.0.0.0", 0)
    for bad in ("8765", "host:port", ""):
        with pytest.raises(ConsoleBindFailed):
            parse_bind(bad)


# -- artifacts -------------------------------------------------------------------


def test_transcript_and_latency_files(tmp_path):
    transcript_path = tmp_path / "run.jsonl"
    report_path = tmp_path / "latency.tsv"
    scenario = FAST + 'on_user_input match=*\nemit_turn text=ok\n'

    async def main():
        async with LivePair(
            scenario,
            transcript_path=str(transcript_path),
            latency_report_path=str(report_path),
        ) as pair:
            pair.send_text("ping")
            await pair.wait_turn_end()

    run(main())

    lines = transcript_path.read_text().splitlines()
    rows = [json.loads(line) for line in lines]
    assert [row["seq"] for row in rows] == list(range(1, len(rows) + 1))
    assert all(
        set(row) == {"seq", "t_ms", "direction", "kind", "body"} for row in rows
    )

    report = report_path.read_text().splitlines()
    assert report[0] == "turn\tlatency_ms"
    turn, latency = report[1].split("\t")
    assert turn == "1" and float(latency) > 0
