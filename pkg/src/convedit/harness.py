"""Dialogue loop, reward accounting, DQN training, evaluation, SER sweep.

One system turn = one system action. The user volunteers queued informs and
goal announcements at the start of each turn; requests are answered within
the same turn; denied confirms queue corrective informs for the next one.
Execute commits the believed frame for the chosen intent and is refused
outright when the current belief does not carry that intent, so executions
stay grounded in dialogue evidence.
"""
from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
import yaml

from .engine import ExecResult, ImageEditEngine
from .ontology import (
    CONFIRM,
    EXECUTE,
    QUERY,
    REQUEST,
    SLOT_GESTURE_CLICK,
    SLOT_INTENT,
    SLOT_OBJECT,
    SLOT_OBJECT_MASK,
    Ontology,
    default_ontology,
)
from .policy import DQNPolicy, rule_action
from .simulator import (
    EVENT_GOAL_COMPLETED,
    EVENT_INCORRECT_EDIT,
    ORIGIN_ORIGINAL,
    STATUS_ACTIVE,
    STATUS_SUCCESS,
    ErrorChannel,
    UserSimulator,
    sample_goals,
)
from .tracker import BeliefState
from .vision import Dataset, SceneSpec, query

FAIL_INTENT_MISMATCH = "intent_mismatch"


@dataclass
class RunConfig:
    """Every knob for data, dialogue dynamics, training, and evaluation."""

    seed: int = 7
    dataset_seed: int = 7
    ser: float = 0.0
    theta: float = 0.5
    max_turns: int = 20
    goals: int = 3
    tau: float = 0.8
    reward_function: int = 1
    train_reward_function: int = 2
    goal_reward: float = 5.0
    incorrect_penalty: float = 5.0
    train_dialogues: int = 15000
    eval_dialogues: int = 500
    # comma-separated SER list for a mixed-noise curriculum, e.g. "0.0,0.3,0.5";
    # empty trains every dialogue at config.ser
    curriculum_sers: str = ""
    gamma: float = 0.99
    lr: float = 1e-3
    batch_size: int = 32
    buffer_capacity: int = 2000
    sync_every: int = 100
    sync_unit: str = "steps"
    hidden: int = 40
    eps_start: float = 0.95
    eps_end: float = 0.05
    eps_fraction: float = 0.6
    clean_conf_low: float = 0.80
    clean_conf_high: float = 1.0
    corrupt_conf_low: float = 0.80
    corrupt_conf_high: float = 1.0
    turn_fraction: bool = True
    theta_covers_intent: bool = True
    # Live sessions: a human-drawn box counts as the goal region when its
    # intersection-over-union with the ground-truth mask reaches this.
    iou_threshold: float = 0.5

    def validate(self) -> None:
        if not 0.0 <= self.ser <= 1.0:
            raise ValueError(f"ser must be in [0, 1], got {self.ser}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must be in [0, 1], got {self.theta}")
        if self.max_turns < 1:
            raise ValueError("max_turns must be positive")
        if self.goals != 3:
            raise ValueError("the agenda is fixed at 3 goals (open, adjust, close)")
        if self.reward_function not in (1, 2):
            raise ValueError(f"reward_function must be 1 or 2, got {self.reward_function}")
        if self.train_reward_function not in (1, 2):
            raise ValueError(
                f"train_reward_function must be 1 or 2, got {self.train_reward_function}"
            )
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need buffer_capacity >= batch_size >= 1")
        if self.sync_unit not in ("steps", "dialogues"):
            raise ValueError(f"sync_unit must be 'steps' or 'dialogues', got {self.sync_unit!r}")
        for part in self.curriculum_sers.split(",") if self.curriculum_sers else ():
            if not 0.0 <= float(part) <= 1.0:
                raise ValueError(f"curriculum ser out of range: {part}")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")

    def curriculum(self) -> tuple[float, ...]:
        if not self.curriculum_sers:
            return ()
        return tuple(float(p) for p in self.curriculum_sers.split(","))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        config = cls(**data)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ValueError(f"config file {path} must hold a mapping")
        return cls.from_dict(data)

    def with_overrides(self, pairs: list[str]) -> "RunConfig":
        """Apply key=value strings, parsed per the field's declared type."""
        by_name = {f.name: f for f in fields(self)}
        updates: dict = {}
        for pair in pairs:
            if "=" not in pair:
                raise ValueError(f"override {pair!r} is not key=value")
            key, raw = pair.split("=", 1)
            if key not in by_name:
                raise ValueError(f"unknown config key {key!r}")
            kind = by_name[key].type
            if kind == "bool":
                if raw.lower() not in ("true", "false", "1", "0"):
                    raise ValueError(f"{key} expects a boolean, got {raw!r}")
                updates[key] = raw.lower() in ("true", "1")
            elif kind == "int":
                updates[key] = int(raw)
            elif kind == "float":
                updates[key] = float(raw)
            else:
                updates[key] = raw
        config = replace(self, **updates)
        config.validate()
        return config

    def content_hash(self) -> str:
        text = yaml.safe_dump(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def channel_for(
    config: RunConfig,
    ontology: Ontology,
    ser: float | None = None,
    scene: SceneSpec | None = None,
) -> ErrorChannel:
    """The object slot is open-vocabulary, so substitution errors for it draw
    from the names in the current scene: a decoder biased toward contextually
    plausible words confuses an object with another one in view, not with an
    arbitrary vocabulary entry. Without a scene the full vocabulary stands in.
    """
    from .vision import VOCABULARY

    if scene is not None:
        domain = tuple(dict.fromkeys(obj.name for obj in scene.objects))
    else:
        domain = tuple(ontology.slot(SLOT_OBJECT).domain or VOCABULARY)
    return ErrorChannel(
        ser=config.ser if ser is None else ser,
        object_domain=domain,
        clean_conf=(config.clean_conf_low, config.clean_conf_high),
        corrupt_conf=(config.corrupt_conf_low, config.corrupt_conf_high),
    )


def epsilon_at(dialogue_index: int, config: RunConfig) -> float:
    """Linear anneal over the first eps_fraction of training, then flat."""
    horizon = max(1.0, config.eps_fraction * config.train_dialogues)
    progress = min(1.0, dialogue_index / horizon)
    return config.eps_start + (config.eps_end - config.eps_start) * progress


# -- shared action application (used by the live service as well) ------------


def apply_query(belief: BeliefState, engine: ImageEditEngine, scene: SceneSpec):
    """Run the vision query for the believed object and adopt the result.

    Returns the candidate masks. The top candidate becomes the stored region
    hypothesis. An empty result refutes the believed object name: the scene
    holds no such thing, so the hypothesis is dropped and the name must be
    re-acquired.
    """
    obj = belief.stored.get(SLOT_OBJECT)
    click = belief.stored.get(SLOT_GESTURE_CLICK)
    masks = query(scene, obj, click) if obj is not None else []
    loaded = engine.load_candidates(masks)
    top = masks[0].to_base64_png() if (masks and loaded) else None
    belief.note_query(obj, top)
    if obj is not None and not masks:
        belief.stored[SLOT_OBJECT] = None
        belief.confidence[SLOT_OBJECT] = 0.0
    return masks


def apply_execute(belief: BeliefState, engine: ImageEditEngine, intent: str):
    """Commit the believed frame for an intent; refuse on belief mismatch.

    Executing an intent the belief does not currently hold would be acting
    on no evidence, so it fails without touching the engine. A successful
    execution resets the user-side belief for the next goal.
    """
    frame = belief.execute_frame(intent)
    if belief.stored.get(SLOT_INTENT) != intent:
        return frame, ExecResult(False, FAIL_INTENT_MISMATCH, intent)
    result = engine.execute(frame)
    if result:
        belief.reset_user()
    return frame, result


# -- reward accounting -------------------------------------------------------


def reward_terminal(success: bool, turns: int) -> float:
    """Total episode reward under the plain function: 20 on success minus one
    per system turn. A dialogue always burns at least one turn."""
    if turns < 1:
        raise ValueError(f"turns must be >= 1, got {turns}")
    return (20.0 if success else 0.0) - float(turns)


def reward_shaped(
    turn_events: list[tuple[int, int]],
    success: bool,
    goal_reward: float = 5.0,
    incorrect_penalty: float = 5.0,
) -> list[float]:
    """Per-turn rewards under the shaped function.

    turn_events holds one (goals_completed, incorrect_edits) pair per system
    turn. Every turn costs 1; completions and mistakes pay out immediately;
    the terminal success bonus of 20 lands on the last turn.
    """
    if not turn_events:
        raise ValueError("a dialogue has at least one turn")
    rewards = [
        -1.0 + goal_reward * done - incorrect_penalty * bad for done, bad in turn_events
    ]
    if success:
        rewards[-1] += 20.0
    return rewards


# -- episode loop ------------------------------------------------------------


@dataclass
class EpisodeRecord:
    scene_id: str
    status: str
    success: bool
    turns: int
    rewards: list[float]
    reward: float
    goals_completed: int
    incorrect_edits: int
    transcript: list[str] | None = None


def run_dialogue(
    ontology: Ontology,
    dataset: Dataset,
    scene: SceneSpec,
    act,
    config: RunConfig,
    rng: np.random.Generator,
    on_transition=None,
    log: bool = False,
) -> EpisodeRecord:
    """One complete dialogue between a policy and the simulated user.

    act(vector, belief, engine_state) -> SystemAction decides each turn.
    on_transition(s, action_index, reward, s_next, terminal), when given,
    receives one transition per system turn; s_next for non-terminal turns
    is the vector observed at the start of the following turn, after the
    user's queued informs have landed.
    """
    goals = sample_goals(scene, rng)
    channel = channel_for(config, ontology, scene=scene)
    sim = UserSimulator(
        ontology,
        scene,
        goals,
        channel,
        rng,
        theta=config.theta,
        theta_covers_intent=config.theta_covers_intent,
    )
    engine = ImageEditEngine(dataset.image)
    belief = BeliefState(ontology)
    action_index = {a: i for i, a in enumerate(ontology.enumerate_actions())}

    transcript: list[str] | None = [] if log else None
    rewards: list[float] = []
    goals_completed = 0
    incorrect_edits = 0
    pending: tuple | None = None
    turn = 0
    status = STATUS_ACTIVE
    while status == STATUS_ACTIVE:
        turn += 1
        volunteered = sim.user_turn_frames()
        user_said: dict = {}
        if volunteered is not None:
            frame, conf, none_slots = volunteered
            belief.update_with_frame(frame, conf, none_slots=none_slots)
            user_said = {
                s: ("<mask>" if s == SLOT_OBJECT_MASK else v) for s, v in frame.values.items()
            }
        turn_frac = (turn - 1) / config.max_turns if config.turn_fraction else None
        state = belief.vectorize(engine.state(), turn_frac)
        if pending is not None and on_transition is not None:
            on_transition(pending[0], pending[1], pending[2], state, False)
            pending = None

        action = act(state, belief, engine.state())
        reward = -1.0
        events: list[tuple] = []
        resp_kind = ""
        if action.kind in (REQUEST, CONFIRM):
            resp = sim.respond(action, belief.stored, engine.state())
            resp_kind = resp.kind
            if resp.kind == "inform":
                sent, conf, _ = channel.transmit(resp.frame, rng)
                belief.update_with_frame(sent, conf, none_slots=resp.none_slots)
            elif resp.kind in ("affirm", "deny"):
                belief.apply_confirm_result(action.target, resp.kind == "affirm")
        elif action.kind == QUERY:
            apply_query(belief, engine, scene)
        elif action.kind == EXECUTE:
            frame, result = apply_execute(belief, engine, action.target)
            resp_kind = result.reason if not result else "ok"
            events = sim.observe_execution(frame, result)

        for event in events:
            if event[0] == EVENT_GOAL_COMPLETED and event[1] == ORIGIN_ORIGINAL:
                goals_completed += 1
                if config.reward_function == 2:
                    reward += config.goal_reward
            elif event[0] == EVENT_INCORRECT_EDIT:
                incorrect_edits += 1
                if config.reward_function == 2:
                    reward -= config.incorrect_penalty

        status = sim.dialogue_status(turn, config.max_turns)
        if status == STATUS_SUCCESS:
            reward += 20.0
        rewards.append(reward)
        if transcript is not None:
            transcript.append(
                f"t{turn:02d} user={user_said} act={action} resp={resp_kind} r={reward:+.0f}"
            )
        if on_transition is not None:
            idx = action_index[action]
            if status == STATUS_ACTIVE:
                pending = (state, idx, reward)
            else:
                frac = turn / config.max_turns if config.turn_fraction else None
                terminal_state = belief.vectorize(engine.state(), frac)
                on_transition(state, idx, reward, terminal_state, True)

    return EpisodeRecord(
        scene_id=scene.scene_id,
        status=status,
        success=status == STATUS_SUCCESS,
        turns=turn,
        rewards=rewards,
        reward=float(sum(rewards)),
        goals_completed=goals_completed,
        incorrect_edits=incorrect_edits,
        transcript=transcript,
    )


# -- policies as act callables ----------------------------------------------


def rule_act(ontology: Ontology, tau: float):
    def act(vector, belief, engine_state):
        return rule_action(belief, engine_state, ontology, tau)

    return act


def dqn_act(policy: DQNPolicy, ontology: Ontology, epsilon: float, rng: np.random.Generator):
    actions = ontology.enumerate_actions()

    def act(vector, belief, engine_state):
        return actions[policy.act(vector, epsilon, rng)]

    return act


# -- training and evaluation -------------------------------------------------


def train_dqn(ontology: Ontology, dataset: Dataset, config: RunConfig, progress=None):
    """Train one DQN at config.ser; returns (policy, learning-curve rows).

    Curve rows are (dialogue index, epsilon, moving-average success,
    moving-average reward) with a 100-dialogue window.
    """
    config.validate()
    # Training rewards use the shaping variant; evaluation reports use
    # config.reward_function unchanged.
    train_config = replace(config, reward_function=config.train_reward_function)
    probe = BeliefState(ontology)
    input_dim = probe.vector_length(config.turn_fraction)
    n_actions = len(ontology.enumerate_actions())
    # steps mode: the policy refreshes its own target every sync_every train
    # steps.  dialogues mode: the refresh happens here, every sync_every
    # completed dialogues, and the per-step refresh is disabled.
    by_dialogue = config.sync_unit == "dialogues"
    policy = DQNPolicy.fresh(
        input_dim,
        n_actions,
        hidden=config.hidden,
        seed=config.seed,
        gamma=config.gamma,
        lr=config.lr,
        batch_size=config.batch_size,
        buffer_capacity=config.buffer_capacity,
        sync_every=0 if by_dialogue else config.sync_every,
    )
    policy.meta["train_ser"] = config.ser
    policy_rng = np.random.default_rng([config.seed, 2])
    scenes = dataset.train
    curve: list[tuple] = []
    window: list[EpisodeRecord] = []
    # Q-learning on this environment oscillates once it is near a good
    # policy, so the returned parameters are the snapshot with the best
    # 100-dialogue success average, not whatever the last update left.
    best_ma = -1.0
    best_params = None
    best_at = 0

    curriculum = config.curriculum()
    for i in range(config.train_dialogues):
        eps = epsilon_at(i, config)
        env_rng = np.random.default_rng([config.seed, 0, i])
        act = dqn_act(policy, ontology, eps, policy_rng)

        def on_transition(s, a, r, s2, terminal):
            policy.buffer.push(s, a, r, s2, terminal)
            policy.train_step(policy_rng)

        dlg_config = train_config
        if curriculum:
            dlg_config = replace(train_config, ser=curriculum[i % len(curriculum)])
        record = run_dialogue(
            ontology, dataset, scenes[i % len(scenes)], act, dlg_config, env_rng, on_transition
        )
        if by_dialogue and (i + 1) % config.sync_every == 0:
            policy.sync_target()
        window.append(record)
        if len(window) > 100:
            window.pop(0)
        ma_success = sum(1.0 for r in window if r.success) / len(window)
        curve.append((i, eps, ma_success, sum(r.reward for r in window) / len(window)))
        if len(window) == 100 and ma_success > best_ma:
            best_ma = ma_success
            best_params = policy.params.copy()
            best_at = i
        if progress is not None and (i + 1) % 1000 == 0:
            progress(i + 1, curve[-1])
    if best_params is not None:
        policy.params = best_params
        policy.target = best_params.copy()
    policy.meta["best_ma"] = best_ma
    policy.meta["best_at"] = best_at
    return policy, curve


@dataclass
class EvalSummary:
    n: int
    mean_turns: float
    mean_reward: float
    mean_goals: float
    success_rate: float
    records: list[EpisodeRecord] = field(repr=False, default_factory=list)


def evaluate(
    ontology: Ontology,
    dataset: Dataset,
    act,
    config: RunConfig,
    n: int | None = None,
    log: bool = False,
) -> EvalSummary:
    """Greedy policy over the test split; per-dialogue seeded rng streams."""
    config.validate()
    n = config.eval_dialogues if n is None else n
    scenes = dataset.test
    records = []
    for i in range(n):
        rng = np.random.default_rng([config.seed, 1, i])
        records.append(
            run_dialogue(ontology, dataset, scenes[i % len(scenes)], act, config, rng, log=log)
        )
    return EvalSummary(
        n=n,
        mean_turns=float(np.mean([r.turns for r in records])),
        mean_reward=float(np.mean([r.reward for r in records])),
        mean_goals=float(np.mean([r.goals_completed for r in records])),
        success_rate=float(np.mean([1.0 if r.success else 0.0 for r in records])),
        records=records,
    )


DEFAULT_SWEEP_SERS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)


def trained_policy(
    ontology: Ontology,
    dataset: Dataset,
    config: RunConfig,
    cache_dir: str | None = None,
    progress=None,
):
    """Train a DQN for this exact config, or reload it from cache_dir.

    The cache key is the config content hash, so any knob change retrains.
    Cache hits return an empty curve; checkpoints round-trip parameters
    bit-exactly, so evaluation results do not depend on the cache.
    """
    from pathlib import Path

    from .policy import CheckpointError, load_checkpoint, save_checkpoint

    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"dqn_{config.content_hash()[:16]}.ckpt"
        if path.exists():
            try:
                return load_checkpoint(str(path), ontology), []
            except CheckpointError:
                pass
    policy, curve = train_dqn(ontology, dataset, config, progress=progress)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(str(path), policy, ontology, config.ser, config.seed)
    return policy, curve


def ser_sweep(
    ontology: Ontology,
    dataset: Dataset,
    config: RunConfig,
    sers=DEFAULT_SWEEP_SERS,
    policies=("rule", "dqn"),
    progress=None,
    cache_dir: str | None = None,
):
    """Evaluate the rule policy and a per-SER-trained DQN at each SER."""
    rows = []
    for ser in sers:
        cell = replace(config, ser=float(ser))
        if "rule" in policies:
            summary = evaluate(ontology, dataset, rule_act(ontology, cell.tau), cell)
            rows.append(_sweep_row("rule", ser, summary))
            if progress is not None:
                progress(rows[-1])
        if "dqn" in policies:
            policy, _ = trained_policy(ontology, dataset, cell, cache_dir=cache_dir)
            greedy = dqn_act(policy, ontology, 0.0, np.random.default_rng([cell.seed, 3]))
            summary = evaluate(ontology, dataset, greedy, cell)
            rows.append(_sweep_row("dqn", ser, summary))
            if progress is not None:
                progress(rows[-1])
    return rows


def _sweep_row(policy: str, ser: float, summary: EvalSummary) -> dict:
    return {
        "policy": policy,
        "ser": float(ser),
        "turn": summary.mean_turns,
        "reward": summary.mean_reward,
        "goal": summary.mean_goals,
        "success": summary.success_rate,
    }


def sweep_csv(rows: list[dict]) -> str:
    """Stable text form of sweep results; identical runs give identical bytes."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["policy", "ser", "turn", "reward", "goal", "success"])
    for row in rows:
        writer.writerow(
            [
                row["policy"],
                f"{row['ser']:.2f}",
                f"{row['turn']:.4f}",
                f"{row['reward']:.4f}",
                f"{row['goal']:.4f}",
                f"{row['success']:.4f}",
            ]
        )
    return buf.getvalue()


def curve_csv(curve: list[tuple]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dialogue", "epsilon", "success_ma100", "reward_ma100"])
    for i, eps, success, reward in curve:
        writer.writerow([i, f"{eps:.4f}", f"{success:.4f}", f"{reward:.4f}"])
    return buf.getvalue()


def default_setup(config: RunConfig):
    """Convenience: the standard ontology plus the seeded dataset."""
    from .vision import generate_dataset

    ontology = default_ontology()
    dataset = generate_dataset(config.dataset_seed)
    return ontology, dataset
