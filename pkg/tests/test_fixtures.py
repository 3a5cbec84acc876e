"""The files shipped under scenarios/, worlds/, and rules/ stay loadable
and the paired ones actually work together."""

from pathlib import Path

from conftest import LivePair, cards, model_text, run
from voicegate.mockserver import load_scenario
from voicegate.rules import load_rules
from voicegate.sim import load_world

ROOT = Path(__file__).parent.parent


def test_every_shipped_scenario_parses():
    paths = sorted((ROOT / "scenarios").glob("*.scenario"))
    assert len(paths) >= 6
    for path in paths:
        scenario = load_scenario(path)
        assert scenario.steps, path.name


def test_every_shipped_world_parses():
    paths = sorted((ROOT / "worlds").glob("*.world"))
    assert len(paths) >= 3
    for path in paths:
        load_world(path)
    demo = load_world(ROOT / "worlds" / "demo.world")
    assert [p.name for p in demo.persons] == ["Ada"]
    assert "dock" in demo.named_locations
    assert demo.hardware.battery_pct == 87


def test_default_rules_parse():
    rules = load_rules(ROOT / "rules" / "default.rules")
    assert [r.id for r in rules] == ["greet_arrival", "track_close"]
    assert all(r.cooldown_ms > 0 for r in rules)


def test_ceiling_fixture_pair_runs_end_to_end():
    scenario = (ROOT / "scenarios" / "ceiling.scenario").read_text()
    world = (ROOT / "worlds" / "ceiling.world").read_text()

    async def main():
        async with LivePair(scenario, world=world) as pair:
            pair.send_text("what is on the ceiling?")
            records = await pair.wait_turn_end()
            assert [c.body["name"] for c in cards(records)] == [
                "look_at_position",
                "analyze_vision",
            ]
            assert "red exit sign" in model_text(records)

    run(main())
