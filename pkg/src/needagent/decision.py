"""Decision engine: choose the next action from the learned prospects.

The agent scores every recorded successor of its current history and commits
the action sub-vector of the best one.  Exploration is epsilon-style over the
constraint-satisfying action vectors; an unfamiliar history always explores,
because the model has nothing to rank yet.  All ties break deterministically
on the successor key, so a seeded run reproduces its decisions exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from random import Random

from needagent.core import (
    ConstraintMatrices,
    StateSchema,
    StateVector,
    check_constraints,
)
from needagent.memory import HistoryWindow
from needagent.model import Prospect, TransitionModel, predict_successors

MODE_PROSPECTED = "prospected"
MODE_UTILITY_ONLY = "utility-only"
MODE_LEXICOGRAPHIC = "lexicographic"
MODES = (MODE_PROSPECTED, MODE_UTILITY_ONLY, MODE_LEXICOGRAPHIC)


class DecisionError(RuntimeError):
    """No constraint-satisfying action exists."""


@dataclass(frozen=True)
class DecisionPolicy:
    """How prospects are ranked and how often the agent ignores them.

    ``prospected`` maximizes utility x probability, ``utility-only`` ignores
    probability, ``lexicographic`` ranks by utility and uses probability only
    to split utility ties.
    """

    mode: str = MODE_PROSPECTED
    exploration_rate: float = 0.1

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise DecisionError(f"unknown policy mode {self.mode!r}")
        if not 0.0 <= self.exploration_rate <= 1.0:
            raise DecisionError(
                f"exploration_rate must be in [0, 1], got {self.exploration_rate}"
            )


@dataclass(frozen=True)
class Decision:
    chosen_action: tuple[bool, ...]
    expected_state: StateVector | None
    score: float
    explored: bool


def score(utility: float, probability: float, policy: DecisionPolicy) -> float:
    """The scalar a prospect is ranked by under the policy mode.

    In lexicographic mode the scalar is the utility alone; probability acts
    as a tie key during selection, not as part of the score.
    """
    if policy.mode == MODE_PROSPECTED:
        return utility * probability
    return utility


def _rank(prospect: Prospect, policy: DecisionPolicy) -> tuple[float, ...]:
    if policy.mode == MODE_PROSPECTED:
        return (prospect.utility * prospect.probability,)
    if policy.mode == MODE_UTILITY_ONLY:
        return (prospect.utility,)
    return (prospect.utility, prospect.probability)


def _best(prospects: list[Prospect], policy: DecisionPolicy) -> Prospect:
    # Highest rank wins; equal ranks fall back to the smaller successor key.
    def order(p: Prospect):
        return tuple(-value for value in _rank(p, policy)) + (p.sort_key,)

    return min(prospects, key=order)


def action_candidates(
    schema: StateSchema, constraints: ConstraintMatrices
) -> list[tuple[bool, ...]]:
    """Every action vector satisfying the constraints, in canonical order.

    Only constraint pairs that lie entirely inside the action partition can
    be checked against a bare action vector; pairs involving sensor or need
    variables are resolved by the environment, not here.
    """
    offset = len(schema.feelings)
    n = len(schema.actions)
    action_range = range(offset, offset + n)
    candidates = []
    for bits in itertools.product((False, True), repeat=n):
        ok = True
        for i, j in constraints.exclusion:
            if i in action_range and j in action_range:
                if bits[i - offset] and bits[j - offset]:
                    ok = False
                    break
        if ok:
            for i, j in constraints.dependency:
                if i in action_range and j in action_range:
                    if bits[i - offset] and not bits[j - offset]:
                        ok = False
                        break
        if ok:
            candidates.append(bits)
    if not candidates:
        raise DecisionError("no action vector satisfies the constraints")
    return candidates


def decide(
    model: TransitionModel,
    history: HistoryWindow,
    constraints: ConstraintMatrices,
    policy: DecisionPolicy,
    rng: Random,
) -> Decision:
    """Pick the next action, exploring or exploiting the model.

    With probability ``exploration_rate`` (and always when the history has no
    recorded successors, or none that satisfy the constraints) a uniformly
    random legal action is taken.  Otherwise the constraint-satisfying
    prospect with the best score wins and its action sub-vector is committed.
    """
    if len(history) == 0:
        raise DecisionError("cannot decide on an empty history window")
    schema = history.states[-1].schema
    explore_draw = rng.random() < policy.exploration_rate
    prospects = predict_successors(model, history)
    valid = [p for p in prospects if check_constraints(p.state, constraints)]
    if explore_draw or not valid:
        candidates = action_candidates(schema, constraints)
        chosen = candidates[rng.randrange(len(candidates))]
        expected = next((p for p in valid if p.state.actions == chosen), None)
        expected_score = 0.0
        if expected is not None:
            expected_score = score(expected.utility, expected.probability, policy)
        return Decision(
            chosen_action=chosen,
            expected_state=None if expected is None else expected.state,
            score=expected_score,
            explored=True,
        )
    best = _best(valid, policy)
    return Decision(
        chosen_action=best.state.actions,
        expected_state=best.state,
        score=score(best.utility, best.probability, policy),
        explored=False,
    )
