"""voicegate: a low-latency duplex voice-agent gateway.

Wires a realtime speech-to-speech session (real or mocked) to a turn-taking
state machine, a function-calling tool registry, a simulated robot backend,
and an event-driven perception rule engine, all operated live through a
companion console protocol.
"""

__version__ = "0.1.0"
