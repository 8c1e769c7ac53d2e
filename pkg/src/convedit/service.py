"""HTTP session layer: a human plays the user role against a live policy.

One session holds one hidden adjust goal on a test scene, an already-open
engine, and a belief tracker. Every user event (utterance, click, or box)
triggers exactly one system action; the response carries the verbalized
action, the current image, and candidate overlays. The turn core reuses
apply_query/apply_execute from the harness so the live loop and the
simulated loop share one implementation.

Endpoints (JSON bodies; images and masks travel as base64 PNG strings):

  POST   /sessions               {policy, checkpoint?, scene_id?, seed?}
  POST   /sessions/{id}/event    {type: utterance|click|box, ...}
  GET    /sessions/{id}          read-only snapshot
  DELETE /sessions/{id}
  GET    /meta                   scene ids, policies, thresholds
"""
from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .engine import ImageEditEngine
from .harness import RunConfig, apply_execute, apply_query, default_setup, dqn_act, rule_act
from .ontology import (
    CONFIRM,
    EXECUTE,
    INTENT_ADJUST,
    INTENT_OPEN,
    QUERY,
    REQUEST,
    SLOT_ADJUST_VALUE,
    SLOT_ATTRIBUTE,
    SLOT_GESTURE_CLICK,
    SLOT_IMAGE_PATH,
    SLOT_INTENT,
    SLOT_OBJECT,
    SLOT_OBJECT_MASK,
    Ontology,
    SemanticFrame,
    SystemAction,
)
from .policy import CheckpointError, load_checkpoint
from .raster import Mask
from .simulator import UserGoal, sample_goals
from .tracker import BeliefState, parse_utterance
from .vision import VOCABULARY, Dataset, SceneSpec

# The human study capped dialogues at 10 system turns; shorter than the
# simulator horizon because humans give up earlier than scripted agendas.
SESSION_MAX_TURNS = 10

POLICY_RULE = "rule"
POLICY_DQN = "dqn"

_AFFIRM_WORDS = frozenset(("yes", "yeah", "yep", "right", "correct", "sure", "ok", "okay"))
_DENY_WORDS = frozenset(("no", "nope", "wrong", "incorrect"))

# Slot order for Execute summaries, mirroring the transcript convention
# "Execute: intent=adjust, adjust_value=10, ...".
_SUMMARY_ORDER = (SLOT_ADJUST_VALUE, SLOT_ATTRIBUTE, SLOT_IMAGE_PATH, SLOT_OBJECT, SLOT_OBJECT_MASK)


def _display(value) -> str:
    """Render a slot value for a prompt; long payloads shrink to a prefix."""
    if isinstance(value, Mask):
        value = value.to_base64_png()
    text = str(value)
    if len(text) > 24:
        return text[:8] + "..."
    return text


def verbalize(action: SystemAction, belief: BeliefState, detail: dict) -> str:
    """Template strings per action kind, one line per system turn."""
    if action.kind == REQUEST:
        return f"What {action.target} do you want?"
    if action.kind == CONFIRM:
        value = belief.stored.get(action.target)
        return f"Is {action.target}={_display(value)} correct?"
    if action.kind == QUERY:
        obj = detail.get("object")
        if obj is None:
            return "Query: no object name to search for."
        return f'Query: searching the image for "{obj}". Found {detail["found"]} candidate(s).'
    frame: SemanticFrame = detail["frame"]
    parts = [f"intent={frame.intent}"]
    for slot in _SUMMARY_ORDER:
        if frame.get(slot) is not None:
            parts.append(f"{slot}={_display(frame.get(slot))}")
    line = "Execute: " + ", ".join(parts)
    result = detail["result"]
    if not result:
        reason = result.reason + (f" {result.detail}" if result.detail else "")
        line += f" -- failed ({reason})"
    return line


@dataclass
class Session:
    """Live dialogue state plus the lock that serializes its events."""

    id: str
    policy_name: str
    scene: SceneSpec
    goal: UserGoal
    tracker: BeliefState
    engine: ImageEditEngine
    act: object
    config: RunConfig
    transcript: list = field(default_factory=list)
    turns: int = 0
    done: bool = False
    success: bool = False
    pending_confirm: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    # -- shared turn core (also driven directly by the replay test) ---------

    def ingest_frame(self, frame: SemanticFrame, confidences: dict, none_slots=()) -> None:
        self.tracker.update_with_frame(frame, confidences, none_slots=none_slots)

    def system_step(self) -> tuple[SystemAction, str]:
        """Take exactly one system action and return it verbalized."""
        turn_frac = (
            min(self.turns / self.config.max_turns, 1.0) if self.config.turn_fraction else None
        )
        vector = self.tracker.vectorize(self.engine.state(), turn_frac)
        action = self.act(vector, self.tracker, self.engine.state())
        detail: dict = {}
        if action.kind == QUERY:
            detail["object"] = self.tracker.stored.get(SLOT_OBJECT)
            masks = apply_query(self.tracker, self.engine, self.scene)
            detail["found"] = len(masks)
        elif action.kind == EXECUTE:
            frame, result = apply_execute(self.tracker, self.engine, action.target)
            detail["frame"] = frame
            detail["result"] = result
            if result and action.target == INTENT_ADJUST:
                self.done = True
                self.success = self._matches_goal(frame)
        self.pending_confirm = action.target if action.kind == CONFIRM else None
        self.turns += 1
        if self.turns >= SESSION_MAX_TURNS:
            self.done = True
        return action, verbalize(action, self.tracker, detail)

    def _matches_goal(self, frame: SemanticFrame) -> bool:
        """Committed edit vs the hidden goal; region match is IoU-based
        because humans draw boxes around pixel-accurate masks."""
        if frame.get(SLOT_ATTRIBUTE) != self.goal.values[SLOT_ATTRIBUTE]:
            return False
        if int(frame.get(SLOT_ADJUST_VALUE)) != int(self.goal.values[SLOT_ADJUST_VALUE]):
            return False
        payload = frame.get(SLOT_OBJECT_MASK)
        mask = payload if isinstance(payload, Mask) else Mask.from_base64_png(str(payload))
        return mask.iou(self.goal.mask) >= self.config.iou_threshold

    # -- views --------------------------------------------------------------

    def goal_semantic_form(self) -> dict:
        return {
            SLOT_INTENT: self.goal.intent,
            SLOT_ATTRIBUTE: self.goal.values[SLOT_ATTRIBUTE],
            SLOT_ADJUST_VALUE: self.goal.values[SLOT_ADJUST_VALUE],
            SLOT_OBJECT: self.goal.values[SLOT_OBJECT],
        }

    def snapshot(self) -> dict:
        return {
            "id": self.id,
            "policy": self.policy_name,
            "scene_id": self.scene.scene_id,
            "width": self.scene.width,
            "height": self.scene.height,
            "goal": self.goal_semantic_form(),
            "transcript": [dict(entry) for entry in self.transcript],
            "image": self.engine.image.to_base64_png(),
            "overlays": [m.to_base64_png() for m in self.engine.candidates],
            "turns": self.turns,
            "max_turns": SESSION_MAX_TURNS,
            "done": self.done,
            "success": self.success,
        }


def sample_session_goal(scene: SceneSpec, rng: np.random.Generator) -> UserGoal:
    """The one adjust goal a live session presents, drawn exactly like the
    simulator agenda so seeded sessions and harness dialogues agree."""
    return sample_goals(scene, rng)[1]


class SessionRegistry:
    """All live sessions plus the shared dataset and policy loaders."""

    def __init__(self, config: RunConfig, ontology: Ontology, dataset: Dataset):
        self.config = config
        self.ontology = ontology
        self.dataset = dataset
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()

    def _make_act(self, policy: str, checkpoint: str | None):
        if policy == POLICY_RULE:
            return rule_act(self.ontology, self.config.tau)
        if policy == POLICY_DQN:
            if not checkpoint:
                raise HTTPException(400, "dqn policy needs a checkpoint path")
            try:
                loaded = load_checkpoint(checkpoint, self.ontology)
            except (OSError, CheckpointError) as e:
                raise HTTPException(400, f"cannot load checkpoint: {e}")
            expect = BeliefState(self.ontology).vector_length(self.config.turn_fraction)
            got = loaded.params.W1.shape[1]
            if got != expect:
                raise HTTPException(
                    400, f"checkpoint input size {got} does not match configured vector {expect}"
                )
            # Greedy at serve time; epsilon 0 never consults the generator.
            return dqn_act(loaded, self.ontology, 0.0, np.random.default_rng(0))
        raise HTTPException(400, f"unknown policy {policy!r}")

    def create(self, policy: str, checkpoint: str | None, scene_id: str | None, seed) -> Session:
        act = self._make_act(policy, checkpoint)
        rng = np.random.default_rng(seed)
        if scene_id is None:
            test = self.dataset.test
            scene = test[int(rng.integers(len(test)))]
        else:
            try:
                scene = self.dataset.scene(scene_id)
            except KeyError:
                raise HTTPException(404, f"unknown scene {scene_id!r}")
        goal = sample_session_goal(scene, rng)
        engine = ImageEditEngine(self.dataset.image)
        opened = engine.execute(
            SemanticFrame({SLOT_INTENT: INTENT_OPEN, SLOT_IMAGE_PATH: scene.scene_id})
        )
        assert opened, "scene images always load"
        session = Session(
            id=uuid.uuid4().hex[:12],
            policy_name=policy,
            scene=scene,
            goal=goal,
            tracker=BeliefState(self.ontology),
            engine=engine,
            act=act,
            config=self.config,
        )
        with self.lock:
            self.sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self.lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return session

    def drop(self, session_id: str) -> None:
        with self.lock:
            if session_id not in self.sessions:
                raise HTTPException(404, f"unknown session {session_id!r}")
            del self.sessions[session_id]


class CreateBody(BaseModel):
    policy: str
    checkpoint: str | None = None
    scene_id: str | None = None
    seed: int | None = None


class EventBody(BaseModel):
    type: str
    text: str | None = None
    x: int | None = None
    y: int | None = None
    w: int | None = None
    h: int | None = None


def _utterance_frame(session: Session, text: str) -> tuple[SemanticFrame, dict]:
    vocabulary = tuple(session.tracker.ontology.slot(SLOT_OBJECT).domain or VOCABULARY)
    frame = parse_utterance(text, vocabulary, scene_ids=(session.scene.scene_id,))
    # Typed text is heard exactly; no recognizer noise on the live path.
    confidences = {slot: 1.0 for slot in frame.slots()}
    return frame, confidences


def apply_user_event(session: Session, event: EventBody) -> dict:
    """Fold one user event into the belief and describe it for the log."""
    if event.type == "utterance":
        text = (event.text or "").strip()
        if not text:
            raise HTTPException(400, "utterance event needs text")
        lowered = set(text.lower().replace(",", " ").replace(".", " ").split())
        if session.pending_confirm is not None and lowered & (_AFFIRM_WORDS | _DENY_WORDS):
            affirmed = not (lowered & _DENY_WORDS)
            session.tracker.apply_confirm_result(session.pending_confirm, affirmed)
        frame, confidences = _utterance_frame(session, text)
        session.ingest_frame(frame, confidences)
        return {"role": "user", "text": text}
    if event.type == "click":
        x, y = event.x, event.y
        if x is None or y is None:
            raise HTTPException(400, "click event needs x and y")
        if not (0 <= x < session.scene.width and 0 <= y < session.scene.height):
            raise HTTPException(400, f"click ({x}, {y}) is outside the image")
        frame = SemanticFrame({SLOT_GESTURE_CLICK: (int(x), int(y))})
        session.ingest_frame(frame, {SLOT_GESTURE_CLICK: 1.0})
        return {"role": "user", "text": f"[click at ({x}, {y})]"}
    if event.type == "box":
        coords = (event.x, event.y, event.w, event.h)
        if any(c is None for c in coords):
            raise HTTPException(400, "box event needs x, y, w, h")
        x, y, w, h = (int(c) for c in coords)
        if w < 1 or h < 1 or x < 0 or y < 0 or x + w > session.scene.width or y + h > session.scene.height:
            raise HTTPException(400, f"box ({x}, {y}, {w}, {h}) is outside the image")
        mask = Mask.rect(session.scene.width, session.scene.height, x, y, w, h)
        frame = SemanticFrame({SLOT_OBJECT_MASK: mask.to_base64_png()})
        session.ingest_frame(frame, {SLOT_OBJECT_MASK: 1.0})
        return {"role": "user", "text": f"[box at ({x}, {y}, {w}, {h})]"}
    raise HTTPException(400, f"unknown event type {event.type!r}")


def create_app(
    config: RunConfig | None = None,
    static_dir: str | None = None,
    ontology: Ontology | None = None,
    dataset: Dataset | None = None,
) -> FastAPI:
    config = config or RunConfig()
    config.validate()
    if ontology is None or dataset is None:
        ontology, dataset = default_setup(config)
    registry = SessionRegistry(config, ontology, dataset)

    app = FastAPI(title="convedit session service")
    app.state.registry = registry

    @app.get("/meta")
    def meta() -> dict:
        return {
            "policies": [POLICY_RULE, POLICY_DQN],
            "scene_ids": [s.scene_id for s in registry.dataset.test],
            "iou_threshold": registry.config.iou_threshold,
            "max_turns": SESSION_MAX_TURNS,
        }

    @app.post("/sessions")
    def create_session(body: CreateBody) -> dict:
        session = registry.create(body.policy, body.checkpoint, body.scene_id, body.seed)
        return session.snapshot()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        session = registry.get(session_id)
        with session.lock:
            return session.snapshot()

    @app.post("/sessions/{session_id}/event")
    def post_event(session_id: str, body: EventBody) -> dict:
        session = registry.get(session_id)
        with session.lock:
            if session.done:
                raise HTTPException(409, "session is finished")
            user_entry = apply_user_event(session, body)
            session.transcript.append(user_entry)
            action, text = session.system_step()
            system_entry = {
                "role": "system",
                "text": text,
                "action": {"kind": action.kind, "target": action.target},
            }
            session.transcript.append(system_entry)
            result = session.snapshot()
            result["action"] = system_entry["action"]
            result["system_text"] = text
            return result

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str) -> dict:
        session = registry.get(session_id)
        with session.lock:
            registry.drop(session_id)
        return {"deleted": session_id}

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
