"""Training, probing, and evaluation orchestration.

Workers are in-process vectorized environment streams stepped in lockstep;
per-worker RNG streams are spawned from the master seed, so ``workers=1``
is bit-exactly reproducible and larger worker counts amortize the actor
forward pass across a batch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics, mdp
from .corpus import CorpusManifest, RandomizationSpec, generate_instance
from .dynamics import JointKind, ObjectSpec
from .estimator import (JointEstimate, PrismaticFit, ProbeConfig, RevoluteFit,
                        Trajectory, classify, default_probe_directions, probe)
from .mdp import ConvergenceMonitor, Curriculum, CurriculumSchedule, EpisodeConfig, RewardParams
from .td3 import TD3Config, TD3Learner, clip_action_norm

PRISMATIC_YAW_RANGE = (-math.pi, math.pi)


class ConfigurationError(ValueError):
    pass


@dataclass
class TrainRunConfig:
    kind: JointKind
    manifest: CorpusManifest
    td3: TD3Config = field(default_factory=TD3Config)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    schedule: CurriculumSchedule = field(default_factory=CurriculumSchedule)
    reward: RewardParams = field(default_factory=RewardParams)
    seed: int = 0
    workers: int = 1
    step_budget: int = 500_000
    checkpoint_every: int = 100_000
    warmup_steps: int = 1_000
    update_every: int = 2  # env steps per gradient update

    def __post_init__(self):
        if self.step_budget < 0:
            raise ConfigurationError(f"step budget must be >= 0, got {self.step_budget}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")


@dataclass
class TrainResult:
    converged: bool
    env_steps: int
    episodes: int
    final_stage: int
    checkpoint_path: Path | None
    log_path: Path | None


class _EnvStream:
    """One training environment: current object instance and episode state."""

    def __init__(self, config: TrainRunConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.spec = None
        self.state = None
        self.p_0 = None
        self.q_goal = None
        self.record = None

    def reset(self, yaw_range):
        cfg = self.config
        bases = cfg.manifest.train_for_kind(cfg.kind)
        base = bases[int(self.rng.integers(len(bases)))]
        yaw = float(self.rng.uniform(*yaw_range))
        self.spec = base.with_yaw(yaw)
        anchor = dynamics.sample_contact_point(self.spec, self.rng)
        self.state = dynamics.initial_state(self.spec, anchor)
        self.p_0 = dynamics.point_position(self.spec, anchor, self.state.q)
        self.q_goal = mdp.goal_threshold(self.spec, cfg.episode.goal_fraction)
        self.record = mdp.EpisodeRecord()

    def observation(self):
        return mdp.build_state(self.spec, self.state, self.p_0)

    def step(self, action):
        """Returns (transition tuple, finished episode record or None)."""
        cfg = self.config
        outcome = dynamics.step(self.spec, self.state, action, cfg.episode.dt)
        reached = outcome.new_state.q >= self.q_goal
        r = mdp.reward(action, outcome.delta_x, outcome.delta_q, reached, cfg.reward)
        s = mdp.build_state(self.spec, self.state, self.p_0)
        self.state = outcome.new_state
        s_next = mdp.build_state(self.spec, self.state, self.p_0)
        rec = self.record
        rec.actions.append(action)
        rec.deltas.append(outcome.delta_x)
        rec.total_reward += r
        rec.steps += 1
        finished = None
        if reached:
            rec.success = True
            finished = rec
        elif rec.steps >= cfg.episode.max_steps:
            finished = rec
        if finished is not None:
            finished.chi = mdp.chi_metric(finished)
        return (s, action, r, s_next, reached), finished


def _random_action(rng: np.random.Generator, eta: float) -> np.ndarray:
    v = rng.normal(size=3)
    n = np.linalg.norm(v)
    direction = v / n if n > 0 else np.array([1.0, 0.0, 0.0])
    return direction * rng.uniform(0.0, 1.0) * eta


def train(config: TrainRunConfig, out_dir=None) -> TrainResult:
    """Run TD3 training until the chi convergence criterion or the budget.

    For revolute training, convergence additionally requires the curriculum
    to have reached its final yaw range.
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    log_path = checkpoint_path = None
    log_file = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / f"train_{config.kind.value}.jsonl"
        checkpoint_path = out_dir / f"policy_{config.kind.value}.ckpt"
        log_file = open(log_path, "w", encoding="utf-8")

    seq = np.random.SeedSequence(config.seed)
    learner_seed, *worker_seeds = seq.spawn(config.workers + 1)
    learner = TD3Learner(config.td3, np.random.default_rng(learner_seed))
    workers = [_EnvStream(config, np.random.default_rng(ws)) for ws in worker_seeds]

    revolute = config.kind is JointKind.REVOLUTE
    curriculum = Curriculum(config.schedule) if revolute else None
    monitor = ConvergenceMonitor(window=100, threshold=0.75)
    yaw_range = curriculum.yaw_range if revolute else PRISMATIC_YAW_RANGE
    for w in workers:
        w.reset(yaw_range)

    eta = config.td3.eta
    env_steps = 0
    episodes = 0
    pending_updates = 0.0
    converged = False
    last_checkpoint = 0
    # random-action warmup runs at the start and again after each curriculum
    # advance, so the buffer has coverage of the newly exposed yaw region
    random_until = config.warmup_steps

    try:
        while env_steps < config.step_budget and not converged:
            if env_steps < random_until:
                actions = [_random_action(w.rng, eta) for w in workers]
            else:
                obs = np.stack([w.observation() for w in workers])
                base = learner.actor.action(obs, eta)
                actions = []
                for i, w in enumerate(workers):
                    a = base[i] + w.rng.normal(0.0, config.td3.exploration_noise_sigma * eta, size=3)
                    actions.append(clip_action_norm(a, eta)[0])

            for w, a in zip(workers, actions):
                transition, finished = w.step(a)
                learner.buffer.add(*transition)
                env_steps += 1
                if finished is not None:
                    episodes += 1
                    monitor.record(finished.chi)
                    if revolute:
                        prev_stage = curriculum.stage
                        curriculum.record(finished.chi)
                        if curriculum.stage != prev_stage:
                            random_until = env_steps + config.warmup_steps
                    if log_file is not None:
                        log_file.write(json.dumps({
                            "episode": episodes,
                            "step": env_steps,
                            "steps": finished.steps,
                            "chi": finished.chi,
                            "success": finished.success,
                            "stage": curriculum.stage if revolute else 0,
                            "return": finished.total_reward,
                        }) + "\n")
                    yaw_range = curriculum.yaw_range if revolute else PRISMATIC_YAW_RANGE
                    w.reset(yaw_range)

            if env_steps >= config.warmup_steps and learner.buffer.size >= config.td3.batch_size:
                pending_updates += len(workers) / config.update_every
                while pending_updates >= 1.0:
                    learner.update()
                    pending_updates -= 1.0

            if monitor.converged() and (not revolute or curriculum.at_final_stage):
                converged = True

            if checkpoint_path is not None and env_steps - last_checkpoint >= config.checkpoint_every:
                learner.save(checkpoint_path)
                last_checkpoint = env_steps
    finally:
        if log_file is not None:
            log_file.close()

    if checkpoint_path is not None:
        learner.save(checkpoint_path)
    return TrainResult(converged=converged, env_steps=env_steps, episodes=episodes,
                       final_stage=curriculum.stage if revolute else 0,
                       checkpoint_path=checkpoint_path, log_path=log_path)


# ---- probing plant -------------------------------------------------------

class SimulatedPlant:
    """Force-application interface over the analytic dynamics, used by probe()
    and by evaluation rollouts."""

    def __init__(self, spec: ObjectSpec, anchor, dt: float = 0.05):
        self.spec = spec
        self.state = dynamics.initial_state(spec, anchor)
        self.dt = dt

    @property
    def q(self) -> float:
        return self.state.q

    def position(self) -> np.ndarray:
        return dynamics.point_position(self.spec, self.state.contact_anchor, self.state.q)

    def apply(self, force) -> np.ndarray:
        outcome = dynamics.step(self.spec, self.state, force, self.dt)
        self.state = outcome.new_state
        return self.position()


def ground_truth_estimate(spec: ObjectSpec) -> JointEstimate:
    """Oracle estimate built from the true (world-frame) joint parameters."""
    h = spec.world_axis()
    origin = spec.world_origin()
    if spec.joint.kind is JointKind.PRISMATIC:
        fit = PrismaticFit(axis=h, origin=origin, rss=0.0)
        return JointEstimate(kind="prismatic", parameters=fit,
                             loglik_prismatic=0.0, loglik_revolute=float("-inf"),
                             prismatic_fit=fit)
    center = spec.contact_region.center()
    radius = dynamics.radial_distance(spec, dynamics.point_position(spec, center, spec.joint.q_min))
    fit = RevoluteFit(axis=h, point=origin, radius=radius, rss=0.0)
    return JointEstimate(kind="revolute", parameters=fit,
                         loglik_prismatic=float("-inf"), loglik_revolute=0.0,
                         revolute_fit=fit)


def analytic_action(estimate: JointEstimate, p_t) -> np.ndarray:
    """Ideal-dynamics planner direction: joint axis for prismatic joints,
    the opening tangent (axis x radial offset) for revolute joints."""
    p_t = np.asarray(p_t, dtype=float)
    if estimate.kind == "prismatic":
        h = np.asarray(estimate.parameters.axis, dtype=float)
        return h / np.linalg.norm(h)
    fit = estimate.parameters
    h = np.asarray(fit.axis, dtype=float)
    d = p_t - np.asarray(fit.point, dtype=float)
    v = d - (d @ h) * h
    nv = np.linalg.norm(v)
    if nv < 1e-12:
        raise ValueError("contact point lies on the rotation axis; tangent undefined")
    tangent = np.cross(h, v / nv)
    return tangent / np.linalg.norm(tangent)


def aligned_planner_action(estimate: JointEstimate, plant: SimulatedPlant, eta: float,
                           iterations: int = 6) -> np.ndarray:
    """Planner force aligned with the displacement it will actually produce.

    Starts from the tangent direction and fixed-point iterates on trial
    steps so the force matches the discrete chord of the circular motion
    (for prismatic joints the tangent already is the chord). The contraction
    is strong, so a handful of iterations reaches machine precision.
    """
    direction = analytic_action(estimate, plant.position())
    p_before = plant.position()
    for _ in range(iterations):
        trial = dynamics.step(plant.spec, plant.state, eta * direction, plant.dt)
        dx = dynamics.point_position(plant.spec, plant.state.contact_anchor, trial.new_state.q) - p_before
        n = np.linalg.norm(dx)
        if n == 0.0:
            break
        direction = dx / n
    return eta * direction


# ---- evaluation ----------------------------------------------------------

@dataclass
class TrialResult:
    object_id: str
    trial: int
    inferred_kind: str
    true_kind: str
    classified_correctly: bool
    q_final: float
    q_goal: float
    opened: bool
    success: bool
    chi: float


@dataclass
class ObjectReport:
    object_id: str
    object_class: str
    true_kind: str
    trials: int
    successes: int
    classification_correct: int
    mean_chi: float

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials


@dataclass
class EvalReport:
    objects: list
    trials_per_object: int
    seed: int

    def class_rates(self) -> dict:
        by_class: dict = {}
        for obj in self.objects:
            by_class.setdefault(obj.object_class, []).append(obj.success_rate)
        return {cls: (float(np.mean(rates)), float(np.std(rates)))
                for cls, rates in by_class.items()}

    def kind_rates(self) -> dict:
        by_kind: dict = {}
        for obj in self.objects:
            by_kind.setdefault(obj.true_kind, []).append(obj.success_rate)
        return {k: float(np.mean(v)) for k, v in by_kind.items()}


def _policy_rollout(plant: SimulatedPlant, learner: TD3Learner, estimate: JointEstimate,
                    max_steps: int, use_policy=None):
    """Roll the (deterministic) policy using estimated joint parameters for
    state construction; returns (q_final, chi)."""
    eta = learner.config.eta
    kind = JointKind.PRISMATIC if estimate.kind == "prismatic" else JointKind.REVOLUTE
    fit = estimate.parameters
    p_0 = plant.position()
    coss = []
    for _ in range(max_steps):
        p_t = plant.position()
        s = mdp.build_state_estimated(kind, fit.axis,
                                      getattr(fit, "point", getattr(fit, "origin", None)),
                                      p_t, p_0)
        if use_policy is not None:
            a = use_policy(s, p_t)
        else:
            a = learner.select_action(s, noise_sigma=0.0)
        p_before = plant.position()
        plant.apply(a)
        dx = plant.position() - p_before
        coss.append(mdp.cos_between(a, dx))
        q_goal = mdp.goal_threshold(plant.spec, plant.spec.goal_fraction)
        if plant.q >= q_goal:
            break
    return plant.q, float(np.mean(coss)) if coss else 0.0


def evaluate(checkpoints: dict, manifest: CorpusManifest, trials: int = 20,
             seed: int = 0, oracle_params: bool = False,
             probe_config: ProbeConfig | None = None,
             force_misclassify: bool = False) -> EvalReport:
    """Run the held-out evaluation protocol.

    checkpoints maps JointKind -> checkpoint path. Per trial: randomize the
    instance yaw, sample a contact, probe, classify, then roll out the
    policy for the inferred kind using the estimated parameters. Success
    requires both correct classification and opening to the goal fraction.
    oracle_params bypasses the estimator with ground-truth parameters;
    force_misclassify flips every classification (fault-injection hook).
    """
    for kind in (JointKind.PRISMATIC, JointKind.REVOLUTE):
        if kind not in checkpoints:
            raise ConfigurationError(f"missing checkpoint for {kind.value} policy")
    learners = {kind: TD3Learner.load(path) for kind, path in checkpoints.items()}
    rand = RandomizationSpec()
    root = np.random.SeedSequence(seed)

    reports = []
    for obj_index, (obj_id, base) in enumerate(sorted(manifest.eval.items())):
        true_kind = base.joint.kind
        successes = 0
        correct = 0
        chis = []
        for trial in range(trials):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=root.entropy, spawn_key=(obj_index, trial)))
            instance = generate_instance(base, rand, rng, suffix=f"t{trial}")
            anchor = dynamics.sample_contact_point(instance, rng)
            plant = SimulatedPlant(instance, anchor)

            if oracle_params:
                estimate = ground_truth_estimate(instance)
            else:
                cfg = probe_config or ProbeConfig(
                    directions=default_probe_directions(instance.base_yaw))
                xi = probe(plant, cfg)
                estimate = classify(xi, cfg)
            if force_misclassify:
                estimate = ground_truth_estimate(instance)
                estimate.kind = ("revolute" if true_kind is JointKind.PRISMATIC
                                 else "prismatic")
            classified = estimate.kind == true_kind.value
            if classified:
                correct += 1

            inferred_kind = (JointKind.PRISMATIC if estimate.kind == "prismatic"
                             else JointKind.REVOLUTE)
            learner = learners[inferred_kind]
            q_final, chi = _policy_rollout(plant, learner, estimate, max_steps=200)
            q_goal = mdp.goal_threshold(instance, instance.goal_fraction)
            opened = q_final >= q_goal
            success = opened and classified
            if success:
                successes += 1
            chis.append(chi)

        reports.append(ObjectReport(
            object_id=obj_id, object_class=manifest.object_class[obj_id],
            true_kind=true_kind.value, trials=trials, successes=successes,
            classification_correct=correct, mean_chi=float(np.mean(chis))))
    return EvalReport(objects=reports, trials_per_object=trials, seed=seed)


def save_eval_report_json(report: EvalReport, path):
    blob = {
        "seed": report.seed,
        "trials_per_object": report.trials_per_object,
        "objects": [vars(o) for o in report.objects],
    }
    Path(path).write_text(json.dumps(blob, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_eval_report_json(path) -> EvalReport:
    blob = json.loads(Path(path).read_text(encoding="utf-8"))
    objects = [ObjectReport(**o) for o in blob["objects"]]
    return EvalReport(objects=objects, trials_per_object=blob["trials_per_object"],
                      seed=blob["seed"])


def write_eval_report(report: EvalReport, path):
    lines = [f"# evaluation report (seed={report.seed}, trials/object={report.trials_per_object})",
             "object,class,kind,trials,successes,success_rate,classification_correct,mean_chi"]
    for obj in report.objects:
        lines.append(",".join([
            obj.object_id, obj.object_class, obj.true_kind, str(obj.trials),
            str(obj.successes), repr(obj.success_rate), str(obj.classification_correct),
            repr(obj.mean_chi)]))
    lines.append("")
    lines.append("class,mean_success,sd")
    for cls, (mean, sd) in sorted(report.class_rates().items()):
        lines.append(f"{cls},{repr(mean)},{repr(sd)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---- plot data -----------------------------------------------------------

def emit_learning_curve_csv(log_path, out_path, window: int = 100):
    """step, episode, rolling-mean chi (partial window at the start), return."""
    rows = []
    chis = []
    with open(log_path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rows.append(json.loads(line))
    with open(out_path, "w", encoding="utf-8") as f:
        f.write("step,episode,chi_rolling_mean,return\n")
        for rec in rows:
            chis.append(rec["chi"])
            mean = float(np.mean(chis[-window:]))
            f.write(f"{rec['step']},{rec['episode']},{repr(mean)},{repr(rec['return'])}\n")


def emit_success_rate_csv(reports: list, out_path):
    """Per-object success rate mean/SD across repeated evaluations."""
    if not reports:
        raise ValueError("need at least one EvalReport")
    by_obj: dict = {}
    meta = {}
    for rep in reports:
        for obj in rep.objects:
            by_obj.setdefault(obj.object_id, []).append(obj.success_rate)
            meta[obj.object_id] = obj.object_class
    with open(out_path, "w", encoding="utf-8") as f:
        f.write("object,class,rate,sd\n")
        for obj_id in sorted(by_obj):
            rates = by_obj[obj_id]
            f.write(f"{obj_id},{meta[obj_id]},{repr(float(np.mean(rates)))},"
                    f"{repr(float(np.std(rates)))}\n")
