"""Force-space MDPs over the analytic dynamics.

Observations are 6-vectors: [axis; contact displacement] for prismatic
joints and [axis; radial offset from the rotation axis] for revolute
joints, all in the world frame. The chi metric is the episode-mean cosine
between applied force and realized contact-point movement.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import dynamics
from .dynamics import JointKind, ObjectSpec, ObjectState

# Yaw randomization stages for revolute training, widened as alignment improves.
CURRICULUM_YAW_RANGES = (
    (-0.25, 0.25),
    (-math.pi / 2, 0.0),
    (-math.pi / 2, math.pi / 2),
    (-math.pi, 0.0),
    (-math.pi, math.pi),
)


@dataclass
class RewardParams:
    r_goal: float = 10.0

    def __post_init__(self):
        if not self.r_goal > 0:
            raise ValueError(f"r_goal must be > 0, got {self.r_goal}")


@dataclass
class EpisodeConfig:
    max_steps: int = 200
    goal_fraction: float = 0.8
    dt: float = 0.05

    def __post_init__(self):
        if not self.max_steps > 0:
            raise ValueError(f"max_steps must be > 0, got {self.max_steps}")


def build_state(spec: ObjectSpec, state: ObjectState, p_0=None) -> np.ndarray:
    """Assemble the 6-vector policy observation (world frame).

    p_0 is the episode-initial contact position; required for prismatic
    objects, ignored for revolute ones.
    """
    p_t = dynamics.point_position(spec, state.contact_anchor, state.q)
    h = spec.world_axis()
    if spec.joint.kind is JointKind.PRISMATIC:
        if p_0 is None:
            raise ValueError("prismatic observation needs the initial contact position p_0")
        tail = p_t - np.asarray(p_0, dtype=float)
    else:
        d = p_t - spec.world_origin()
        tail = d - (d @ h) * h
    return np.concatenate([h, tail])


def build_state_estimated(kind: JointKind, axis, origin, p_t, p_0=None) -> np.ndarray:
    """Same observation, but from externally supplied (estimated) parameters."""
    h = np.asarray(axis, dtype=float)
    p_t = np.asarray(p_t, dtype=float)
    if kind is JointKind.PRISMATIC:
        if p_0 is None:
            raise ValueError("prismatic observation needs p_0")
        tail = p_t - np.asarray(p_0, dtype=float)
    else:
        d = p_t - np.asarray(origin, dtype=float)
        tail = d - (d @ h) * h
    return np.concatenate([h, tail])


def cos_between(a, b) -> float:
    """Cosine of the angle between two vectors; 0 if either is zero."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def reward(a_t, delta_x, delta_q: float, reached_goal: bool, params: RewardParams) -> float:
    """Dense alignment reward plus a terminal goal bonus.

    Positive branch (joint opening): movement magnitude times alignment;
    negative branch (joint closing): the same term negated.
    """
    a_t = np.asarray(a_t, dtype=float)
    delta_x = np.asarray(delta_x, dtype=float)
    if not (np.all(np.isfinite(a_t)) and np.all(np.isfinite(delta_x))):
        raise ValueError("reward inputs must be finite")
    term = float(np.linalg.norm(delta_x)) * cos_between(a_t, delta_x)
    if delta_q >= 0:
        return term + (params.r_goal if reached_goal else 0.0)
    return -term


def goal_threshold(spec: ObjectSpec, goal_fraction: float) -> float:
    return spec.joint.q_min + goal_fraction * (spec.joint.q_max - spec.joint.q_min)


@dataclass
class EpisodeRecord:
    transitions: list = field(default_factory=list)  # (s, a, r, s_next, done)
    actions: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    chi: float = 0.0
    success: bool = False
    steps: int = 0
    total_reward: float = 0.0
    stage: int = 0


def chi_metric(record: EpisodeRecord) -> float:
    """Mean cos(angle between action and realized movement) over the episode."""
    if not record.actions:
        raise ValueError("chi is undefined for an empty episode")
    return float(np.mean([cos_between(a, dx) for a, dx in zip(record.actions, record.deltas)]))


def run_episode(spec: ObjectSpec, policy, config: EpisodeConfig,
                params: RewardParams, rng: np.random.Generator) -> EpisodeRecord:
    """Roll out one episode; policy maps a 6-vector observation to a force.

    The contact anchor is sampled once and held for the episode; the
    episode ends early when q reaches goal_fraction of the joint range.
    """
    anchor = dynamics.sample_contact_point(spec, rng)
    state = dynamics.initial_state(spec, anchor)
    p_0 = dynamics.point_position(spec, anchor, state.q)
    q_goal = goal_threshold(spec, config.goal_fraction)

    record = EpisodeRecord()
    for _ in range(config.max_steps):
        s = build_state(spec, state, p_0)
        a = np.asarray(policy(s), dtype=float)
        outcome = dynamics.step(spec, state, a, config.dt)
        reached = outcome.new_state.q >= q_goal
        r = reward(a, outcome.delta_x, outcome.delta_q, reached, params)
        s_next = build_state(spec, outcome.new_state, p_0)
        record.transitions.append((s, a, r, s_next, reached))
        record.actions.append(a)
        record.deltas.append(outcome.delta_x)
        record.total_reward += r
        record.steps += 1
        state = outcome.new_state
        if reached:
            record.success = True
            break
    record.chi = chi_metric(record)
    return record


@dataclass
class CurriculumSchedule:
    ranges: tuple = CURRICULUM_YAW_RANGES
    advance_threshold: float = 0.8
    window: int = 100

    def __post_init__(self):
        if not 0.0 < self.advance_threshold < 1.0:
            raise ValueError("advance_threshold must be in (0,1)")


class Curriculum:
    """Stage tracker: advances when the mean chi over a full window at the
    current stage reaches the threshold; never regresses."""

    def __init__(self, schedule: CurriculumSchedule | None = None):
        self.schedule = schedule or CurriculumSchedule()
        self.stage = 0
        self._chis = deque(maxlen=self.schedule.window)
        self._count_at_stage = 0

    @property
    def yaw_range(self):
        return self.schedule.ranges[self.stage]

    @property
    def at_final_stage(self) -> bool:
        return self.stage == len(self.schedule.ranges) - 1

    def record(self, chi: float):
        self._chis.append(chi)
        self._count_at_stage += 1
        full = self._count_at_stage >= self.schedule.window and len(self._chis) == self.schedule.window
        if full and not self.at_final_stage and np.mean(self._chis) >= self.schedule.advance_threshold:
            self.stage += 1
            self._chis.clear()
            self._count_at_stage = 0


class ConvergenceMonitor:
    """Convergence when mean chi over the last `window` episodes >= threshold."""

    def __init__(self, window: int = 100, threshold: float = 0.75):
        self.window = window
        self.threshold = threshold
        self._chis = deque(maxlen=window)
        self.episodes = 0

    def record(self, chi: float):
        if not -1.0 - 1e-9 <= chi <= 1.0 + 1e-9:
            raise ValueError(f"chi out of [-1, 1]: {chi}")
        self._chis.append(chi)
        self.episodes += 1

    def mean_chi(self) -> float:
        return float(np.mean(self._chis)) if self._chis else 0.0

    def converged(self) -> bool:
        return len(self._chis) == self.window and self.mean_chi() >= self.threshold
