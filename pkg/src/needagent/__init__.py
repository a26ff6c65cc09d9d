"""Need-driven experiential learning agent.

An agent senses discrete states, acts under constraints, and learns a tabular
transition graph whose utilities are written by reinforcement derived from its
own need dynamics.  The package ships a small grid ping-pong world and a CLI
harness for reproducible runs, sweeps and replays.
"""

from needagent.core import (
    ActionCost,
    ConstraintMatrices,
    FeelingVar,
    MotivationVector,
    PriorityProfile,
    SchemaError,
    StateSchema,
    StateVector,
    UsageError,
    check_constraints,
    energy_spent,
    motivation,
    reinforcement,
    state_distance,
    state_key,
)

__all__ = [
    "ActionCost",
    "ConstraintMatrices",
    "FeelingVar",
    "MotivationVector",
    "PriorityProfile",
    "SchemaError",
    "StateSchema",
    "StateVector",
    "UsageError",
    "check_constraints",
    "energy_spent",
    "motivation",
    "reinforcement",
    "state_distance",
    "state_key",
]

__version__ = "0.1.0"
