"""Shared test fixtures: a small synthetic schema and a state factory.

The schema is deliberately tiny (two feelings, two actions, two needs) so
hand-computed oracles stay readable; environment tests build their own
schemas through the board helpers instead.
"""

from __future__ import annotations

import time

from needagent.core import FeelingVar, StateSchema, StateVector

# Wall-clock origin for the whole pytest session; conftest is imported once
# at collection start, before any test runs.
SUITE_START = time.monotonic()

SCHEMA = StateSchema(
    feelings=(FeelingVar("pos", 4), FeelingVar("phase", 3)),
    actions=("go", "grab"),
    needs=("hunger", "rest"),
)


def make_state(
    pos: int = 0,
    phase: int = 0,
    go: bool = False,
    grab: bool = False,
    hunger: float = 0.0,
    rest: float = 0.0,
    tick: int = 0,
) -> StateVector:
    return StateVector(
        schema=SCHEMA,
        feelings=(pos, phase),
        actions=(go, grab),
        needs=(hunger, rest),
        tick=tick,
    )
