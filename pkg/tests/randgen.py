"""Random property and trace generation shared by monitor and acceptance tests."""

import random

from rospect.hpl import HplProperty, parse_property
from rospect.monitor import MessageEvent, Trace

CHANNELS = ["/a", "/b", "/c", "/noise"]
DOMAIN = (0, 3)  # payload field "data" ranges over a small domain


def random_event_text(rng: random.Random, channel: str | None = None) -> str:
    channel = channel or rng.choice(CHANNELS[:3])
    kind = rng.randrange(5)
    if kind == 0:
        return channel
    k = rng.randint(*DOMAIN)
    op = {1: "=", 2: "<", 3: ">", 4: "!="}[kind]
    return f"{channel} {{data {op} {k}}}"


def random_property_text(rng: random.Random, pattern: str | None = None,
                         scope: str | None = None, deadline: bool | None = None) -> str:
    scope = scope or rng.choice(["globally", "after", "until", "after_until"])
    pattern = pattern or rng.choice(
        ["absence", "existence", "response", "prevention", "requirement"]
    )
    if scope == "globally":
        scope_text = "globally"
    elif scope == "after":
        scope_text = f"after {random_event_text(rng)}"
    elif scope == "until":
        scope_text = f"until {random_event_text(rng)}"
    else:
        scope_text = f"after {random_event_text(rng)} until {random_event_text(rng)}"
    event_a = random_event_text(rng)
    if pattern == "absence":
        pattern_text = f"no {event_a}"
    elif pattern == "existence":
        pattern_text = f"some {event_a}"
    else:
        keyword = {"response": "causes", "prevention": "forbids", "requirement": "requires"}[pattern]
        pattern_text = f"{event_a} {keyword} {random_event_text(rng)}"
        use_deadline = rng.random() < 0.5 if deadline is None else deadline
        if use_deadline:
            pattern_text += f" within {rng.choice(['500 ms', '1 s', '2 s'])}"
    return f"{scope_text}: {pattern_text}"


def random_property(rng: random.Random, **kwargs) -> HplProperty:
    return parse_property(random_property_text(rng, **kwargs))


def random_trace(rng: random.Random, max_events: int = 12, closed: bool = True) -> Trace:
    n = rng.randint(0, max_events)
    events = []
    time = 0.0
    for _ in range(n):
        time += rng.choice([0.0, 0.5, 1.0])
        events.append(
            MessageEvent(
                time=time,
                channel=rng.choice(CHANNELS),
                payload={"data": rng.randint(*DOMAIN)},
            )
        )
    end_time = None
    if closed:
        end_time = time + rng.choice([0.0, 0.5, 1.5])
    return Trace(events=events, end_time=end_time)
