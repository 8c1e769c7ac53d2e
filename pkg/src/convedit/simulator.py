"""Agenda-based multimodal user simulator and the semantic error channel.

The simulated user pursues a three-goal agenda (open, adjust, close) with
goals popped on matching executions. Incorrect edits push reactive Undo
goals (Redo when the stray execution was an undo). Speech informs pass
through an error channel that replaces slot values with probability SER and
attaches a confidence drawn from ranges correlated with corruption; gesture
payloads and affirm/deny signals are never corrupted.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import EngineState, ExecResult
from .ontology import (
    ADJUST_VALUES,
    ATTRIBUTES,
    CONFIRM,
    EXECUTE,
    INTENT_ADJUST,
    INTENT_CLOSE,
    INTENT_OPEN,
    INTENT_REDO,
    INTENT_UNDO,
    INTENTS,
    QUERY,
    REQUEST,
    SLOT_ADJUST_VALUE,
    SLOT_ATTRIBUTE,
    SLOT_GESTURE_CLICK,
    SLOT_IMAGE_PATH,
    SLOT_INTENT,
    SLOT_OBJECT,
    SLOT_OBJECT_MASK,
    SPEECH,
    Ontology,
    SemanticFrame,
    SystemAction,
)
from .raster import Mask
from .vision import SceneSpec, query

ORIGIN_ORIGINAL = "original"
ORIGIN_UNDO = "inserted_undo"
ORIGIN_REDO = "inserted_redo"

EVENT_GOAL_COMPLETED = "goal_completed"
EVENT_INCORRECT_EDIT = "incorrect_edit"

STATUS_ACTIVE = "active"
STATUS_SUCCESS = "success"
STATUS_FAILURE = "failure"


@dataclass
class UserGoal:
    """One agenda entry: an intent with its full ground-truth assignment."""

    intent: str
    values: dict = field(default_factory=dict)
    mask: Mask | None = None  # ground truth region for adjust goals
    origin: str = ORIGIN_ORIGINAL
    announced: bool = False
    # Set when the goal resumes after an interruption: the user restates it
    # completely, since theta-dropping only models first-pass announcements.
    full_restate: bool = False

    _mask_b64: str | None = field(default=None, repr=False, compare=False)

    def mask_payload(self) -> str:
        if self._mask_b64 is None:
            self._mask_b64 = self.mask.to_base64_png()
        return self._mask_b64

    def value_of(self, slot: str):
        if slot == SLOT_INTENT:
            return self.intent
        if slot == SLOT_OBJECT_MASK:
            return self.mask
        return self.values.get(slot)


def sample_goals(scene: SceneSpec, rng: np.random.Generator) -> list[UserGoal]:
    """The canonical agenda: open the scene, adjust one object, close."""
    obj = scene.objects[int(rng.integers(len(scene.objects)))]
    mask = query(scene, obj.name)[0]
    return [
        UserGoal(INTENT_OPEN, {SLOT_IMAGE_PATH: scene.scene_id}),
        UserGoal(
            INTENT_ADJUST,
            {
                SLOT_ATTRIBUTE: str(rng.choice(ATTRIBUTES)),
                SLOT_ADJUST_VALUE: int(rng.choice(ADJUST_VALUES)),
                SLOT_OBJECT: obj.name,
            },
            mask=mask,
        ),
        UserGoal(INTENT_CLOSE, {}),
    ]


@dataclass
class UserResponse:
    """What the user sends back for one system action."""

    kind: str  # inform | affirm | deny | none
    frame: SemanticFrame = field(default_factory=SemanticFrame)
    none_slots: tuple[str, ...] = ()


@dataclass
class ErrorChannel:
    """Value-substitution noise for speech slots, with confidence scores.

    Each corruptible speech value is independently replaced with probability
    ser by a uniformly sampled different value from its domain. Confidence
    is drawn from clean_conf for untouched values and corrupt_conf for
    replaced ones; with the default equal ranges a recognition score says
    nothing about whether the value survived, and certainty only comes from
    gestures, hyper-articulated corrections, and affirmations.
    image_path has no substitution domain here and passes through clean.
    """

    ser: float
    object_domain: tuple[str, ...]
    clean_conf: tuple[float, float] = (0.80, 1.0)
    corrupt_conf: tuple[float, float] = (0.80, 1.0)

    def domain_for(self, slot: str):
        if slot == SLOT_INTENT:
            return INTENTS
        if slot == SLOT_ATTRIBUTE:
            return ATTRIBUTES
        if slot == SLOT_ADJUST_VALUE:
            return ADJUST_VALUES
        if slot == SLOT_OBJECT:
            return self.object_domain
        return None

    def corrupt(self, frame: SemanticFrame, rng: np.random.Generator, exempt=frozenset()):
        """Return (corrupted copy, set of slots whose value was replaced)."""
        out = frame.copy()
        hit: set[str] = set()
        for slot in frame.slots():
            domain = self.domain_for(slot)
            if domain is None or slot in exempt:
                continue
            if rng.random() < self.ser:
                current = frame.get(slot)
                others = [v for v in domain if v != current]
                if not others:
                    continue
                out.set(slot, others[int(rng.integers(len(others)))])
                hit.add(slot)
        return out, hit

    def transmit(self, frame: SemanticFrame, rng: np.random.Generator, exempt=frozenset()):
        """Corrupt a frame and attach per-slot confidences.

        Gesture payloads always carry confidence 1 and are never replaced.
        Slots in exempt model hyper-articulated corrections: the user has
        just watched the system err and enunciates, so the value arrives
        clean at confidence 1.
        """
        corrupted, hit = self.corrupt(frame, rng, exempt)
        conf: dict[str, float] = {}
        for slot in corrupted.slots():
            if slot in (SLOT_GESTURE_CLICK, SLOT_OBJECT_MASK) or slot in exempt:
                conf[slot] = 1.0
            else:
                lo, hi = self.corrupt_conf if slot in hit else self.clean_conf
                conf[slot] = float(lo + (hi - lo) * rng.random())
        return corrupted, conf, hit


class UserSimulator:
    """Drives the user side of one dialogue."""

    def __init__(
        self,
        ontology: Ontology,
        scene: SceneSpec,
        goals: list[UserGoal],
        channel: ErrorChannel,
        rng: np.random.Generator,
        theta: float = 0.5,
        theta_covers_intent: bool = True,
    ):
        self.ontology = ontology
        self.scene = scene
        self.agenda = list(goals)
        self.channel = channel
        self.rng = rng
        self.theta = theta
        self.theta_covers_intent = theta_covers_intent
        # slot -> ("value", v, articulated) or ("none",) informs queued for
        # the next turn; articulated entries are corrections the user makes
        # after seeing the system err (denied confirm, failed execute) and
        # transmit hyper-articulated: clean, confidence 1.
        self.pending: dict[str, tuple] = {}
        # how many times an interrupted goal has had to be restated
        self.restatements = 0

    # -- goal-opening frames -------------------------------------------------

    def first_pass_frame(self, goal: UserGoal) -> SemanticFrame:
        """The goal announcement: each speech slot survives with prob 1 - theta.

        Gesture slots are never volunteered; the user only supplies masks
        and clicks when asked.
        """
        frame = SemanticFrame()
        speech_args = [
            slot
            for slot in self.ontology.subtree_slots(goal.intent)
            if self.ontology.slot(slot).modality == SPEECH
            and goal.values.get(slot) is not None
        ]
        # A goal that is nothing but its intent ("undo", "close") is always
        # uttered; dropping it would be a silent turn, not an omission.
        keep_intent = (
            not speech_args
            or not self.theta_covers_intent
            or self.rng.random() >= self.theta
        )
        if keep_intent:
            frame.set(SLOT_INTENT, goal.intent)
        for slot in speech_args:
            if self.rng.random() >= self.theta:
                frame.set(slot, goal.values[slot])
        return frame

    def full_frame(self, goal: UserGoal) -> SemanticFrame:
        """A complete restatement: intent plus every speech slot, no drops."""
        frame = SemanticFrame({SLOT_INTENT: goal.intent})
        for slot in self.ontology.subtree_slots(goal.intent):
            if self.ontology.slot(slot).modality != SPEECH:
                continue
            if goal.values.get(slot) is not None:
                frame.set(slot, goal.values[slot])
        return frame

    def user_turn_frames(self):
        """Inform due at the start of a system turn, already noised.

        Merges queued corrective informs with the head goal's announcement
        when that goal has not been announced yet. Returns
        (frame, confidences, none_slots) or None when the user has nothing
        to volunteer.
        """
        frame = SemanticFrame()
        none_slots: list[str] = []
        articulated: set[str] = set()
        if self.agenda and not self.agenda[0].announced:
            head = self.agenda[0]
            frame = self.full_frame(head) if head.full_restate else self.first_pass_frame(head)
            head.announced = True
        for slot, entry in self.pending.items():
            if entry[0] == "value":
                frame.set(slot, entry[1])
                if entry[2]:
                    articulated.add(slot)
            else:
                none_slots.append(slot)
        self.pending.clear()
        if not frame.slots() and not none_slots:
            return None
        sent, conf, _ = self.channel.transmit(frame, self.rng, frozenset(articulated))
        return sent, conf, tuple(none_slots)

    # -- responses to system actions ----------------------------------------

    def head(self) -> UserGoal | None:
        return self.agenda[0] if self.agenda else None

    def _goal_has(self, goal: UserGoal, slot: str) -> bool:
        if slot == SLOT_INTENT:
            return True
        if slot == SLOT_OBJECT_MASK or slot == SLOT_GESTURE_CLICK:
            return goal.mask is not None
        return goal.values.get(slot) is not None

    def _click_inside(self, mask: Mask) -> tuple[int, int]:
        ys, xs = np.nonzero(mask.bits)
        i = int(self.rng.integers(len(xs)))
        return int(xs[i]), int(ys[i])

    def respond(self, action: SystemAction, stored: dict, engine: EngineState) -> UserResponse:
        """React to one system action; informs pass through the channel.

        Requests for slots outside the current goal produce a "none" inform
        plus a restatement of the goal intent, nudging the system off a
        wrong hypothesis. Affirm/deny are delivered error-free; a denied
        confirm queues a corrective inform for the next turn.
        """
        goal = self.head()
        if goal is None or action.kind in (QUERY, EXECUTE):
            return UserResponse("none")
        if action.kind == REQUEST:
            return self._respond_request(action.target, goal)
        if action.kind == CONFIRM:
            return self._respond_confirm(action.target, goal, stored)
        return UserResponse("none")

    def _respond_request(self, slot: str, goal: UserGoal) -> UserResponse:
        if not self._goal_has(goal, slot):
            # Pushback after an off-goal question is ordinary speech, so it
            # still rides the noisy channel.
            self.pending.setdefault(SLOT_INTENT, ("value", goal.intent, False))
            return UserResponse("inform", SemanticFrame(), none_slots=(slot,))
        if slot == SLOT_OBJECT_MASK:
            frame = SemanticFrame({SLOT_OBJECT_MASK: goal.mask_payload()})
            return UserResponse("inform", frame)
        if slot == SLOT_GESTURE_CLICK:
            frame = SemanticFrame({SLOT_GESTURE_CLICK: self._click_inside(goal.mask)})
            return UserResponse("inform", frame)
        return UserResponse("inform", SemanticFrame({slot: goal.value_of(slot)}))

    def _matches_goal_value(self, goal: UserGoal, slot: str, stored_value) -> bool:
        if slot == SLOT_OBJECT_MASK:
            if stored_value is None or goal.mask is None:
                return stored_value is None and goal.mask is None
            try:
                mask = (
                    stored_value
                    if isinstance(stored_value, Mask)
                    else Mask.from_base64_png(str(stored_value))
                )
            except Exception:
                return False
            return mask == goal.mask
        if slot == SLOT_GESTURE_CLICK:
            if stored_value is None or goal.mask is None:
                return stored_value is None and goal.mask is None
            x, y = stored_value
            return goal.mask.contains(int(x), int(y))
        return stored_value == goal.value_of(slot)

    def _respond_confirm(self, slot: str, goal: UserGoal, stored: dict) -> UserResponse:
        if self._matches_goal_value(goal, slot, stored.get(slot)):
            return UserResponse("affirm")
        if self._goal_has(goal, slot):
            value = goal.value_of(slot)
            if slot == SLOT_OBJECT_MASK:
                value = goal.mask_payload()
            self.pending[slot] = ("value", value, True)
        else:
            self.pending[slot] = ("none",)
            self.pending.setdefault(SLOT_INTENT, ("value", goal.intent, True))
        return UserResponse("deny")

    # -- agenda maintenance --------------------------------------------------

    def _execution_matches(self, goal: UserGoal, frame: SemanticFrame) -> bool:
        if frame.intent != goal.intent:
            return False
        for slot in self.ontology.dependent_slots(goal.intent):
            if not self._matches_goal_value(goal, slot, frame.get(slot)):
                return False
        return True

    def observe_execution(self, frame: SemanticFrame, result: ExecResult) -> list[tuple]:
        """Update the agenda after an execution attempt; emit reward events."""
        if not result.success:
            # The user watches the attempt fail and restates what they want.
            # A restatement is ordinary speech, not a contrastive correction,
            # so it rides the noisy channel.
            goal = self.head()
            if goal is not None:
                self.pending.setdefault(SLOT_INTENT, ("value", goal.intent, False))
            return []
        goal = self.head()
        events: list[tuple] = []
        if goal is not None and self._execution_matches(goal, frame):
            popped = self.agenda.pop(0)
            events.append((EVENT_GOAL_COMPLETED, popped.origin))
            if popped.origin != ORIGIN_ORIGINAL and self.agenda:
                # Returning to an interrupted goal: the first time, the user
                # patiently restates it in full (theta models first-pass
                # announcements only).  The second time they re-announce with
                # the usual first-pass omissions.  After that they are done
                # repeating themselves and wait to be asked.
                self.restatements += 1
                if self.restatements <= 2:
                    self.agenda[0].announced = False
                    self.agenda[0].full_restate = self.restatements == 1
            return events
        if frame.intent in (INTENT_ADJUST, INTENT_UNDO, INTENT_REDO, INTENT_OPEN):
            # A successful execution the user did not want, and it changed
            # the image: queue a reactive goal to roll it back.
            events.append((EVENT_INCORRECT_EDIT,))
            if frame.intent == INTENT_UNDO:
                self.agenda.insert(0, UserGoal(INTENT_REDO, origin=ORIGIN_REDO))
            else:
                self.agenda.insert(0, UserGoal(INTENT_UNDO, origin=ORIGIN_UNDO))
        return events

    def dialogue_status(self, turn: int, max_turns: int) -> str:
        if not self.agenda:
            return STATUS_SUCCESS
        if turn >= max_turns:
            return STATUS_FAILURE
        return STATUS_ACTIVE
