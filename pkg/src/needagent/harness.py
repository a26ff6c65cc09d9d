"""Run harness: configuration, the sense-decide-act-learn loop, metrics, sweeps.

A run is fully determined by its configuration (including the seed): the
environment, exploration and learning all draw from streams derived from it.
Two runs with equal configurations produce byte-identical metrics and
snapshots.
"""

from __future__ import annotations

import hashlib
import json
import math
import statistics
from collections import deque
from dataclasses import dataclass, field, replace
from random import Random
from typing import Sequence

from needagent.core import PriorityProfile, SchemaError, StateSchema
from needagent.decision import DecisionPolicy, MODES, decide
from needagent.memory import (
    EpisodeLog,
    HistoryWindow,
    MemorySnapshot,
    TransitionRecord,
    garbage_collect,
)
from needagent.model import (
    LearningDriver,
    LearningParams,
    STRATEGIES,
    STRATEGY_TRANSITION_MAP,
    SUCCESSOR_KEYINGS,
    SUCCESSOR_KEYING_STATE,
    TransitionModel,
    novelty,
    rebuild_from_log,
    tables_equal,
)
from needagent.pingpong import BoardConfig, PingPong

ROLLING_WINDOW_EVENTS = 100


class ConfigError(ValueError):
    """A configuration value is missing, unknown or out of range."""


# ======================================================================
# configuration
# ======================================================================


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    ticks: int = 2000
    board: BoardConfig = field(default_factory=BoardConfig)
    profile: PriorityProfile = field(
        default_factory=lambda: PriorityProfile(weights=(1.0, 0.25, 0.1, 0.1))
    )
    strategy: str = STRATEGY_TRANSITION_MAP
    window_size: int = 1
    policy_mode: str = "prospected"
    exploration_rate: float = 0.1
    utility_step: float = 0.1
    predictability_weight: float = 0.0
    successor_keying: str = SUCCESSOR_KEYING_STATE
    gc_horizon: float | None = None
    gc_min_trust: int = 1
    gc_interval: int = 0
    out_dir: str | None = None

    def policy(self) -> DecisionPolicy:
        return DecisionPolicy(mode=self.policy_mode, exploration_rate=self.exploration_rate)

    def learning_params(self) -> LearningParams:
        return LearningParams(
            priority=self.profile,
            utility_step=self.utility_step,
            predictability_weight=self.predictability_weight,
            energy_weight=self.profile.energy_weight,
        )


def _check(condition: bool, fieldname: str, message: str) -> None:
    if not condition:
        raise ConfigError(f"{fieldname}: {message}")


def _number(value, fieldname: str) -> float:
    _check(isinstance(value, (int, float)) and not isinstance(value, bool), fieldname, "expected a number")
    return value


def _integer(value, fieldname: str) -> int:
    _check(isinstance(value, int) and not isinstance(value, bool), fieldname, "expected an integer")
    return value


def _section(data: dict, name: str, allowed: tuple[str, ...]) -> dict:
    section = data.get(name, {})
    _check(isinstance(section, dict), name, "expected an object")
    for key in section:
        _check(key in allowed, f"{name}.{key}", "unknown field")
    return section


def config_from_dict(data: dict) -> RunConfig:
    """Validate and build a run configuration; defaults fill absent fields.

    Raises :class:`ConfigError` naming the offending field.
    """
    if not isinstance(data, dict):
        raise ConfigError("config: expected an object")
    allowed_top = (
        "seed",
        "ticks",
        "board",
        "profile",
        "strategy",
        "window_size",
        "policy",
        "learning",
        "gc",
        "out_dir",
    )
    for key in data:
        _check(key in allowed_top, key, "unknown field")

    seed = _integer(data.get("seed", 0), "seed")
    ticks = _integer(data.get("ticks", 2000), "ticks")
    _check(ticks >= 0, "ticks", "must be >= 0")

    board_data = _section(
        data, "board", ("width", "height", "racket_width", "feedback_delay", "need_levels")
    )
    defaults = BoardConfig()
    try:
        board = BoardConfig(
            width=_integer(board_data.get("width", defaults.width), "board.width"),
            height=_integer(board_data.get("height", defaults.height), "board.height"),
            racket_width=_integer(
                board_data.get("racket_width", defaults.racket_width), "board.racket_width"
            ),
            feedback_delay=_integer(
                board_data.get("feedback_delay", defaults.feedback_delay),
                "board.feedback_delay",
            ),
            need_levels=_integer(
                board_data.get("need_levels", defaults.need_levels), "board.need_levels"
            ),
        )
    except SchemaError as exc:
        raise ConfigError(str(exc)) from exc

    profile_data = _section(data, "profile", ("weights", "energy_weight"))
    weights = profile_data.get("weights", [1.0, 0.25, 0.1, 0.1])
    _check(isinstance(weights, (list, tuple)), "profile.weights", "expected a list")
    _check(len(weights) == 4, "profile.weights", "expected exactly 4 weights")
    weights = tuple(
        float(_number(w, f"profile.weights[{i}]")) for i, w in enumerate(weights)
    )
    for i, w in enumerate(weights):
        _check(w >= 0, f"profile.weights[{i}]", "must be >= 0")
    energy_weight = float(_number(profile_data.get("energy_weight", 0.0), "profile.energy_weight"))
    _check(energy_weight >= 0, "profile.energy_weight", "must be >= 0")
    profile = PriorityProfile(weights=weights, energy_weight=energy_weight)

    strategy = data.get("strategy", STRATEGY_TRANSITION_MAP)
    _check(strategy in STRATEGIES, "strategy", f"expected one of {list(STRATEGIES)}")
    window_size = _integer(data.get("window_size", 1), "window_size")
    _check(window_size >= 1, "window_size", "must be >= 1")

    policy_data = _section(data, "policy", ("mode", "exploration_rate"))
    policy_mode = policy_data.get("mode", "prospected")
    _check(policy_mode in MODES, "policy.mode", f"expected one of {list(MODES)}")
    exploration_rate = float(
        _number(policy_data.get("exploration_rate", 0.1), "policy.exploration_rate")
    )
    _check(0.0 <= exploration_rate <= 1.0, "policy.exploration_rate", "must be in [0, 1]")

    learning_data = _section(
        data, "learning", ("utility_step", "predictability_weight", "successor_keying")
    )
    utility_step = float(_number(learning_data.get("utility_step", 0.1), "learning.utility_step"))
    _check(0.0 < utility_step <= 1.0, "learning.utility_step", "must be in (0, 1]")
    predictability_weight = float(
        _number(
            learning_data.get("predictability_weight", 0.0), "learning.predictability_weight"
        )
    )
    _check(predictability_weight >= 0, "learning.predictability_weight", "must be >= 0")
    successor_keying = learning_data.get("successor_keying", SUCCESSOR_KEYING_STATE)
    _check(
        successor_keying in SUCCESSOR_KEYINGS,
        "learning.successor_keying",
        f"expected one of {list(SUCCESSOR_KEYINGS)}",
    )

    gc_data = _section(data, "gc", ("horizon", "min_trust", "interval"))
    horizon = gc_data.get("horizon", None)
    if horizon is not None:
        horizon = float(_number(horizon, "gc.horizon"))
        _check(horizon >= 0, "gc.horizon", "must be >= 0")
    min_trust = _integer(gc_data.get("min_trust", 1), "gc.min_trust")
    _check(min_trust >= 0, "gc.min_trust", "must be >= 0")
    interval = _integer(gc_data.get("interval", 0), "gc.interval")
    _check(interval >= 0, "gc.interval", "must be >= 0")

    out_dir = data.get("out_dir", None)
    _check(out_dir is None or isinstance(out_dir, str), "out_dir", "expected a string or null")

    return RunConfig(
        seed=seed,
        ticks=ticks,
        board=board,
        profile=profile,
        strategy=strategy,
        window_size=window_size,
        policy_mode=policy_mode,
        exploration_rate=exploration_rate,
        utility_step=utility_step,
        predictability_weight=predictability_weight,
        successor_keying=successor_keying,
        gc_horizon=horizon,
        gc_min_trust=min_trust,
        gc_interval=interval,
        out_dir=out_dir,
    )


def config_to_dict(config: RunConfig) -> dict:
    return {
        "seed": config.seed,
        "ticks": config.ticks,
        "board": {
            "width": config.board.width,
            "height": config.board.height,
            "racket_width": config.board.racket_width,
            "feedback_delay": config.board.feedback_delay,
            "need_levels": config.board.need_levels,
        },
        "profile": {
            "weights": list(config.profile.weights),
            "energy_weight": config.profile.energy_weight,
        },
        "strategy": config.strategy,
        "window_size": config.window_size,
        "policy": {
            "mode": config.policy_mode,
            "exploration_rate": config.exploration_rate,
        },
        "learning": {
            "utility_step": config.utility_step,
            "predictability_weight": config.predictability_weight,
            "successor_keying": config.successor_keying,
        },
        "gc": {
            "horizon": config.gc_horizon,
            "min_trust": config.gc_min_trust,
            "interval": config.gc_interval,
        },
        "out_dir": config.out_dir,
    }


def config_fingerprint(config: RunConfig) -> str:
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def derive_seed(seed: int, stream: str) -> int:
    """Independent deterministic seed for a named random stream."""
    digest = hashlib.sha256(f"{stream}:{seed}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


# ======================================================================
# run loop
# ======================================================================


@dataclass(frozen=True)
class MetricsRow:
    tick: int
    happy: float
    sad: float
    novelty: float
    expectedness: float
    feedback: float
    cumulative_hits: int
    cumulative_misses: int
    rolling_hit_rate: float
    explored: bool
    energy: float


@dataclass
class RunResult:
    config: RunConfig
    schema: StateSchema
    log: EpisodeLog
    model: TransitionModel
    metrics: list[MetricsRow]

    @property
    def final_rolling_hit_rate(self) -> float:
        return self.metrics[-1].rolling_hit_rate if self.metrics else 0.0


def run(config: RunConfig) -> RunResult:
    """Execute one seeded episode: sense, decide, act, learn, repeat."""
    env = PingPong(config.board)
    state = env.reset(derive_seed(config.seed, "env"))
    rng = Random(derive_seed(config.seed, "agent"))
    schema = env.schema()
    constraints = env.constraints()
    policy = config.policy()
    params = config.learning_params()
    model = TransitionModel(
        window_size=config.window_size, successor_keying=config.successor_keying
    )
    driver = LearningDriver(model, params, config.strategy)
    log = EpisodeLog()
    window = driver.window.push(state)  # decision window; the driver keeps its own

    metrics: list[MetricsRow] = []
    cumulative_hits = 0
    cumulative_misses = 0
    recent_events: deque[int] = deque(maxlen=ROLLING_WINDOW_EVENTS)
    rolling = 0.0

    for tick in range(config.ticks):
        decision = decide(model, window, constraints, policy, rng)
        outcome = env.step(
            decision.chosen_action,
            predicted=decision.expected_state,
            novelty=lambda s: novelty(model, s),
        )
        record = TransitionRecord(
            tick=tick,
            state=state,
            chosen_action=decision.chosen_action,
            predicted_next=decision.expected_state,
            reinforcement_observed=outcome.feedback,
            energy=outcome.energy,
            next_state=outcome.state,
        )
        log.append(record)
        driver.ingest(record)

        if outcome.feedback > 0:
            cumulative_hits += 1
            recent_events.append(1)
        elif outcome.feedback < 0:
            cumulative_misses += 1
            recent_events.append(0)
        if recent_events:
            rolling = sum(recent_events) / len(recent_events)
        needs = outcome.state.needs
        metrics.append(
            MetricsRow(
                tick=tick + 1,
                happy=needs[0],
                sad=needs[1],
                novelty=needs[2],
                expectedness=needs[3],
                feedback=outcome.feedback,
                cumulative_hits=cumulative_hits,
                cumulative_misses=cumulative_misses,
                rolling_hit_rate=rolling,
                explored=decision.explored,
                energy=outcome.energy,
            )
        )

        state = outcome.state
        window = window.push(state)
        if (
            config.gc_horizon is not None
            and config.gc_interval > 0
            and (tick + 1) % config.gc_interval == 0
        ):
            log = run_garbage_collection(log, model, config)

    return RunResult(config=config, schema=schema, log=log, model=model, metrics=metrics)


def evidence_by_tick(log: EpisodeLog, model: TransitionModel) -> dict[int, int]:
    """Model evidence for each record's transition, keyed by tick.

    Windows are reconstructed the same way learning built them, resetting at
    tick gaps, so the lookup matches what the tables actually hold.
    """
    counts: dict[int, int] = {}
    window = HistoryWindow(model.window_size)
    previous = None
    for rec in log:
        if previous is not None and rec.tick != previous + 1:
            window = HistoryWindow(model.window_size)
        previous = rec.tick
        window = window.push(rec.state)
        counts[rec.tick] = model.transition_evidence(window, rec.next_state)
    return counts


def run_garbage_collection(log: EpisodeLog, model: TransitionModel, config: RunConfig) -> EpisodeLog:
    counts = evidence_by_tick(log, model)
    horizon = math.inf if config.gc_horizon is None else config.gc_horizon
    return garbage_collect(
        log,
        retention_horizon=horizon,
        min_trust=config.gc_min_trust,
        evidence=lambda rec: counts[rec.tick],
    )


# ======================================================================
# persistence and verification
# ======================================================================


def snapshot_from_run(result: RunResult) -> MemorySnapshot:
    return MemorySnapshot(
        schema=result.schema,
        log=result.log,
        model_tables=result.model.to_tables(),
        config=config_to_dict(result.config),
        config_fingerprint=config_fingerprint(result.config),
    )


def verify_snapshot(snapshot: MemorySnapshot, utility_tolerance: float = 1e-12) -> list[str]:
    """Replay the snapshot's log and diff the rebuilt model against the stored
    tables.  Returns human-readable problems; empty means verified."""
    problems: list[str] = []
    config = config_from_dict(snapshot.config)
    if config_fingerprint(config) != snapshot.config_fingerprint:
        problems.append("config_fingerprint does not match the embedded config")
    rebuilt = rebuild_from_log(
        snapshot.log,
        config.learning_params(),
        strategy=config.strategy,
        window_size=config.window_size,
        successor_keying=config.successor_keying,
    )
    problems.extend(
        tables_equal(snapshot.model_tables, rebuilt.to_tables(), utility_tolerance)
    )
    return problems


# ======================================================================
# metrics serialization
# ======================================================================

CSV_COLUMNS = (
    "tick",
    "happy",
    "sad",
    "novelty",
    "expectedness",
    "feedback",
    "cumulative_hits",
    "cumulative_misses",
    "rolling_hit_rate",
    "explored",
    "energy",
)

_FLOAT_COLUMNS = {"happy", "sad", "novelty", "expectedness", "feedback", "rolling_hit_rate", "energy"}


def metrics_to_csv(rows: Sequence[MetricsRow]) -> str:
    """Fixed six-decimal floats, integer counters, LF line endings."""
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        cells = []
        for column in CSV_COLUMNS:
            value = getattr(row, column)
            if column in _FLOAT_COLUMNS:
                cells.append(f"{value:.6f}")
            elif column == "explored":
                cells.append("1" if value else "0")
            else:
                cells.append(str(value))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def metrics_from_csv(text: str) -> list[MetricsRow]:
    lines = [line for line in text.split("\n") if line]
    if not lines or lines[0] != ",".join(CSV_COLUMNS):
        raise ConfigError("metrics csv: unexpected header")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != len(CSV_COLUMNS):
            raise ConfigError(f"metrics csv: expected {len(CSV_COLUMNS)} cells, got {len(cells)}")
        values = dict(zip(CSV_COLUMNS, cells))
        rows.append(
            MetricsRow(
                tick=int(values["tick"]),
                happy=float(values["happy"]),
                sad=float(values["sad"]),
                novelty=float(values["novelty"]),
                expectedness=float(values["expectedness"]),
                feedback=float(values["feedback"]),
                cumulative_hits=int(values["cumulative_hits"]),
                cumulative_misses=int(values["cumulative_misses"]),
                rolling_hit_rate=float(values["rolling_hit_rate"]),
                explored=values["explored"] == "1",
                energy=float(values["energy"]),
            )
        )
    return rows


def write_metrics(rows: Sequence[MetricsRow], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(metrics_to_csv(rows))


def read_metrics(path: str) -> list[MetricsRow]:
    with open(path, "r", encoding="utf-8") as fh:
        return metrics_from_csv(fh.read())


# ======================================================================
# sweeps
# ======================================================================


@dataclass(frozen=True)
class SweepRun:
    profile_label: str
    seed: int
    final_rolling_hit_rate: float
    hits: int
    misses: int


@dataclass(frozen=True)
class SweepSummary:
    profile_label: str
    runs: int
    mean_final_hit_rate: float
    stdev_final_hit_rate: float


def sweep(
    config: RunConfig,
    profiles: Sequence[tuple[str, PriorityProfile]],
    seeds: Sequence[int],
) -> tuple[list[SweepRun], list[SweepSummary]]:
    """Run every profile x seed combination.

    Aggregates are computed from the collected results per profile, so they
    do not depend on execution order; rows come back ordered by profile then
    seed.
    """
    if not profiles:
        raise ConfigError("profiles: expected at least one profile")
    if not seeds:
        raise ConfigError("seeds: expected at least one seed")
    labels = [label for label, _ in profiles]
    if len(set(labels)) != len(labels):
        raise ConfigError("profiles: labels must be unique")
    runs: list[SweepRun] = []
    for label, profile in profiles:
        for seed in sorted(seeds):
            variant = replace(config, seed=seed, profile=profile)
            result = run(variant)
            last = result.metrics[-1] if result.metrics else None
            runs.append(
                SweepRun(
                    profile_label=label,
                    seed=seed,
                    final_rolling_hit_rate=result.final_rolling_hit_rate,
                    hits=last.cumulative_hits if last else 0,
                    misses=last.cumulative_misses if last else 0,
                )
            )
    summaries = []
    for label, _ in profiles:
        rates = [r.final_rolling_hit_rate for r in runs if r.profile_label == label]
        summaries.append(
            SweepSummary(
                profile_label=label,
                runs=len(rates),
                mean_final_hit_rate=statistics.mean(rates),
                stdev_final_hit_rate=statistics.stdev(rates) if len(rates) > 1 else 0.0,
            )
        )
    return runs, summaries


def sweep_to_csv(runs: Sequence[SweepRun], summaries: Sequence[SweepSummary]) -> tuple[str, str]:
    run_lines = ["profile,seed,final_rolling_hit_rate,hits,misses"]
    for r in runs:
        run_lines.append(
            f"{r.profile_label},{r.seed},{r.final_rolling_hit_rate:.6f},{r.hits},{r.misses}"
        )
    summary_lines = ["profile,runs,mean_final_hit_rate,stdev_final_hit_rate"]
    for s in summaries:
        summary_lines.append(
            f"{s.profile_label},{s.runs},{s.mean_final_hit_rate:.6f},{s.stdev_final_hit_rate:.6f}"
        )
    return "\n".join(run_lines) + "\n", "\n".join(summary_lines) + "\n"
