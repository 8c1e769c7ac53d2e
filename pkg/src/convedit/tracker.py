"""Belief state over user slots, its fixed vectorization, and a pattern NLU.

Small closed-domain speech slots (intent, attribute) hold a probability
distribution over domain + "none"; the remaining speech slots hold a single
(hypothesis, confidence) pair; gesture slots hold a payload with presence.
The belief vector concatenates user beliefs with the engine's binary flags.

Default layout (23 dims):
  [0:6]   intent distribution (open, adjust, close, undo, redo, none)
  [6:10]  attribute distribution (brightness, saturation, contrast, none)
  [10:16] (presence, confidence) for image_path, adjust_value, object
  [16:18] gesture presence (gesture_click, object_mask_str)
  [18:23] engine flags (image_loaded, has_previous_history,
          has_next_history, candidates_loaded, session_closed)

An optional config flag appends turn / max_turns as a final dimension for
ablations; it is off by default.
"""
from __future__ import annotations

import re

import numpy as np

from .engine import EngineState
from .ontology import (
    GESTURE,
    INTENT_ADJUST,
    INTENT_CLOSE,
    INTENT_OPEN,
    INTENT_REDO,
    INTENT_UNDO,
    SLOT_ADJUST_VALUE,
    SLOT_ATTRIBUTE,
    SLOT_IMAGE_PATH,
    SLOT_INTENT,
    SLOT_OBJECT,
    SLOT_OBJECT_MASK,
    SPEECH,
    Ontology,
    SemanticFrame,
)

NONE_LABEL = "none"

# Slots tracked as full distributions; every other speech slot is tracked as
# (hypothesis, confidence). adjust_value has a closed domain but numeric NLU
# yields point hypotheses, so it is deliberately in the open group.
DISTRIBUTION_SLOTS = (SLOT_INTENT, SLOT_ATTRIBUTE)


class BeliefState:
    """Mutable per-dialogue belief over the ontology's slots."""

    def __init__(self, ontology: Ontology):
        self.ontology = ontology
        self.dist_slots = tuple(
            s.name
            for s in ontology.slots
            if s.modality == SPEECH and s.domain is not None and s.name in DISTRIBUTION_SLOTS
        )
        self.open_slots = tuple(
            s.name for s in ontology.slots if s.modality == SPEECH and s.name not in self.dist_slots
        )
        self.gesture_slots = tuple(s.name for s in ontology.slots if s.modality == GESTURE)
        self.distributions: dict[str, dict[str, float]] = {}
        self.stored: dict[str, object] = {}
        self.confidence: dict[str, float] = {}
        # Dialogue memory for the query flow: the object value used by the
        # most recent vision query, so policies can tell a failed query from
        # one not yet attempted. Not part of the vector.
        self.last_query_object: str | None = None
        self.reset_user()

    # -- lifecycle ----------------------------------------------------------

    def _prior(self, slot: str) -> dict[str, float]:
        domain = self.ontology.slot(slot).domain or ()
        dist = {str(v): 0.0 for v in domain}
        dist[NONE_LABEL] = 1.0
        return dist

    def reset_user(self) -> None:
        """Drop all user-side beliefs; engine flags live in the engine."""
        for s in self.dist_slots:
            self.distributions[s] = self._prior(s)
        for s in self.dist_slots + self.open_slots + self.gesture_slots:
            self.stored[s] = None
            self.confidence[s] = 0.0
        self.last_query_object = None

    # -- updates ------------------------------------------------------------

    def update_with_frame(
        self,
        frame: SemanticFrame,
        confidences: dict[str, float] | None = None,
        none_slots: tuple[str, ...] = (),
    ) -> None:
        """Fold an observed frame into the belief.

        For distribution slots the observed value receives its confidence
        and the remainder is spread uniformly over the other values
        (including "none"). Open and gesture slots overwrite the stored
        hypothesis. none_slots marks slots the user reported as having no
        value: distributions shift to "none", hypotheses clear.
        """
        confidences = confidences or {}
        for slot in frame.slots():
            value = frame.get(slot)
            if value is None:
                continue
            conf = float(confidences.get(slot, 1.0))
            if slot in self.dist_slots:
                self._place(slot, str(value), conf)
            else:
                self.stored[slot] = value
                self.confidence[slot] = conf
        for slot in none_slots:
            if slot in self.dist_slots:
                self._place(slot, NONE_LABEL, 1.0)
                self.stored[slot] = None
                self.confidence[slot] = 0.0
            elif slot in self.stored:
                self.stored[slot] = None
                self.confidence[slot] = 0.0

    def _place(self, slot: str, value: str, conf: float) -> None:
        dist = self._prior(slot)
        others = [v for v in dist if v != value]
        if value not in dist:
            raise ValueError(f"value {value!r} outside domain of {slot!r}")
        for v in others:
            dist[v] = (1.0 - conf) / len(others)
        dist[value] = conf
        self.distributions[slot] = dist
        if value == NONE_LABEL:
            self.stored[slot] = None
            self.confidence[slot] = 0.0
        else:
            self.stored[slot] = value
            self.confidence[slot] = conf

    def apply_confirm_result(self, slot: str, affirmed: bool) -> None:
        """Resolve a confirmation: affirm pins the value, deny clears it."""
        if affirmed:
            if self.stored.get(slot) is None:
                return
            if slot in self.dist_slots:
                self._place(slot, str(self.stored[slot]), 1.0)
            else:
                self.confidence[slot] = 1.0
        else:
            if slot in self.dist_slots:
                self.distributions[slot] = self._prior(slot)
            self.stored[slot] = None
            self.confidence[slot] = 0.0

    def note_query(self, object_name: str | None, mask_b64: str | None) -> None:
        """Record a vision query and adopt its top candidate as the region.

        The mask hypothesis inherits the confidence of the object name that
        produced it: a shaky name means a shaky region, which is what makes
        a later confirmation worthwhile.
        """
        self.last_query_object = object_name
        if mask_b64 is not None:
            self.stored[SLOT_OBJECT_MASK] = mask_b64
            self.confidence[SLOT_OBJECT_MASK] = self.confidence.get(SLOT_OBJECT, 1.0)

    # -- views --------------------------------------------------------------

    def best_intent(self) -> tuple[str | None, float]:
        return self.stored.get(SLOT_INTENT), self.confidence.get(SLOT_INTENT, 0.0)

    def execute_frame(self, intent: str) -> SemanticFrame:
        """Frame handed to the engine: the intent plus all stored arguments."""
        frame = SemanticFrame({SLOT_INTENT: intent})
        for slot in self.ontology.dependent_slots(intent):
            value = self.stored.get(slot)
            if value is not None:
                frame.set(slot, value)
        return frame

    def vectorize(self, engine: EngineState, turn_fraction: float | None = None) -> np.ndarray:
        """The fixed-layout feature vector consumed by policies."""
        parts: list[float] = []
        for slot in self.dist_slots:
            domain = [str(v) for v in self.ontology.slot(slot).domain or ()]
            dist = self.distributions[slot]
            parts.extend(dist[v] for v in domain)
            parts.append(dist[NONE_LABEL])
        for slot in self.open_slots:
            present = self.stored.get(slot) is not None
            parts.append(1.0 if present else 0.0)
            parts.append(self.confidence.get(slot, 0.0) if present else 0.0)
        for slot in self.gesture_slots:
            parts.append(1.0 if self.stored.get(slot) is not None else 0.0)
        parts.extend(float(f) for f in engine.as_tuple())
        if turn_fraction is not None:
            parts.append(float(turn_fraction))
        return np.asarray(parts, dtype=np.float64)

    def vector_length(self, with_turn: bool = False) -> int:
        n = sum(len(self.ontology.slot(s).domain or ()) + 1 for s in self.dist_slots)
        n += 2 * len(self.open_slots) + len(self.gesture_slots) + 5
        return n + (1 if with_turn else 0)

    def layout(self, with_turn: bool = False) -> list[str]:
        """Human-readable names for each vector dimension, in order."""
        names: list[str] = []
        for slot in self.dist_slots:
            for v in [str(v) for v in self.ontology.slot(slot).domain or ()] + [NONE_LABEL]:
                names.append(f"{slot}={v}")
        for slot in self.open_slots:
            names.append(f"{slot}.presence")
            names.append(f"{slot}.confidence")
        for slot in self.gesture_slots:
            names.append(f"{slot}.presence")
        names += [
            "engine.image_loaded",
            "engine.has_previous_history",
            "engine.has_next_history",
            "engine.candidates_loaded",
            "engine.session_closed",
        ]
        if with_turn:
            names.append("turn_fraction")
        return names


# -- pattern NLU ------------------------------------------------------------

_INTENT_RULES = (
    (INTENT_UNDO, ("undo", "revert")),
    (INTENT_REDO, ("redo",)),
    (INTENT_CLOSE, ("close", "done", "bye")),
    (INTENT_OPEN, ("open", "load")),
)
_ADJUST_VERBS = ("brighten", "darken", "increase", "decrease", "make", "adjust", "lower", "saturate")
_NEGATIVE_WORDS = frozenset(("less", "lower", "decrease", "darken", "reduce"))
_POSITIVE_WORDS = frozenset(("more", "increase", "raise", "by"))
_SCENE_ID_RE = re.compile(r"\bscene_\d+\b")
_NUMBER_RE = re.compile(r"(?<![\w.])[-+]?\d+")
_WORD_RE = re.compile(r"[a-z]+")


def parse_utterance(
    text: str,
    vocabulary: tuple[str, ...],
    adjust_values: tuple[int, ...] = None,
    scene_ids=None,
) -> SemanticFrame:
    """Keyword-rule parser from free text to a semantic frame.

    Fills only the slots it can ground: intent by keyword, attribute by
    stem, object as the longest vocabulary word present, adjust_value as
    the first number with polarity-resolved sign snapped to the domain,
    image_path as a token matching a scene id.
    """
    from .ontology import ADJUST_VALUES as DEFAULT_VALUES

    values = adjust_values or DEFAULT_VALUES
    lowered = text.lower()
    words = set(_WORD_RE.findall(lowered))
    frame = SemanticFrame()

    intent = None
    for candidate, keys in _INTENT_RULES:
        if any(k in words for k in keys):
            intent = candidate
            break
    if intent is None and any(v in words for v in _ADJUST_VERBS):
        intent = INTENT_ADJUST
    if intent is not None:
        frame.set(SLOT_INTENT, intent)

    attribute = None
    for token in _WORD_RE.findall(lowered):
        if token.startswith("bright"):
            attribute = "brightness"
        elif token.startswith("satur") or token.startswith("color"):
            attribute = "saturation"
        elif token == "contrast":
            attribute = "contrast"
        if attribute:
            break
    if attribute:
        frame.set(SLOT_ATTRIBUTE, attribute)

    present = [w for w in vocabulary if w.lower() in words]
    if present:
        frame.set(SLOT_OBJECT, max(present, key=len))

    m = _NUMBER_RE.search(lowered)
    if m:
        raw = int(m.group())
        signed = m.group().startswith(("-", "+"))
        if not signed:
            if words & _NEGATIVE_WORDS:
                raw = -raw
            elif not (words & _POSITIVE_WORDS):
                pass  # bare numbers default positive
        snapped = min(values, key=lambda d: (abs(d - raw), -d))
        frame.set(SLOT_ADJUST_VALUE, snapped)

    sid = _SCENE_ID_RE.search(lowered)
    if sid and (scene_ids is None or sid.group() in scene_ids):
        frame.set(SLOT_IMAGE_PATH, sid.group())

    return frame
