"""Domain ontology: intents, slots, dependency structure, and the system action space.

The ontology is data, not code: it can be serialized to a YAML config and
reloaded, so tests can run against reduced ontologies (for example, removing
an intent shrinks the enumerated action space accordingly).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import yaml

SPEECH = "speech"
GESTURE = "gesture"

INTENT_OPEN = "open"
INTENT_ADJUST = "adjust"
INTENT_CLOSE = "close"
INTENT_UNDO = "undo"
INTENT_REDO = "redo"

INTENTS = (INTENT_OPEN, INTENT_ADJUST, INTENT_CLOSE, INTENT_UNDO, INTENT_REDO)

ATTRIBUTES = ("brightness", "saturation", "contrast")
ADJUST_VALUES = (-50, -40, -30, -20, -10, 10, 20, 30, 40, 50)

SLOT_INTENT = "intent"
SLOT_IMAGE_PATH = "image_path"
SLOT_ATTRIBUTE = "attribute"
SLOT_ADJUST_VALUE = "adjust_value"
SLOT_OBJECT = "object"
SLOT_GESTURE_CLICK = "gesture_click"
SLOT_OBJECT_MASK = "object_mask_str"


@dataclass(frozen=True)
class Slot:
    """A slot declaration: name, input modality, and value domain.

    domain is a tuple of admissible values for closed-class slots and None
    for open classes (strings, coordinates, mask payloads).
    """

    name: str
    modality: str
    domain: tuple | None = None

    def __post_init__(self):
        if self.modality not in (SPEECH, GESTURE):
            raise ValueError(f"bad modality {self.modality!r} for slot {self.name!r}")


@dataclass(frozen=True)
class SystemAction:
    """One element of the enumerated action space.

    kind is one of request/confirm/query/execute; target names the slot
    (request, confirm) or the intent (execute) and is empty for query.
    """

    kind: str
    target: str = ""

    def __str__(self) -> str:
        if self.kind == "query":
            return "Query"
        return f"{self.kind.capitalize()}({self.target})"


REQUEST = "request"
CONFIRM = "confirm"
QUERY = "query"
EXECUTE = "execute"


@dataclass(frozen=True)
class Ontology:
    """Immutable container for intents, slots, and dependency edges.

    dependencies maps an intent name to its direct argument slots, and a slot
    name to the slots that feed it (the only such slot here is
    object_mask_str, fed by object and gesture_click). Order inside each
    tuple is fixed and observable: policies request arguments in this order.
    """

    intents: tuple[str, ...]
    slots: tuple[Slot, ...]
    dependencies: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        names = [s.name for s in self.slots]
        if len(set(names)) != len(names):
            raise ValueError("duplicate slot names")
        if len(set(self.intents)) != len(self.intents):
            raise ValueError("duplicate intents")
        known = set(names)
        for key, deps in self.dependencies.items():
            if key not in known and key not in self.intents:
                raise ValueError(f"dependency key {key!r} is neither intent nor slot")
            for dep in deps:
                if dep not in known:
                    raise ValueError(f"dependency target {dep!r} is not a slot")
        # Freeze the mapping so the ontology cannot be mutated through it.
        object.__setattr__(self, "dependencies", dict(self.dependencies))

    # -- lookups ------------------------------------------------------------

    def slot(self, name: str) -> Slot:
        for s in self.slots:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def slot_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots)

    def speech_slots(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots if s.modality == SPEECH)

    def gesture_slots(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots if s.modality == GESTURE)

    def dependent_slots(self, key: str) -> tuple[str, ...]:
        """Direct argument slots of an intent (or feeder slots of a slot)."""
        if key not in self.dependencies and key not in self.intents and key not in self.slot_names:
            raise KeyError(key)
        return tuple(self.dependencies.get(key, ()))

    def subtree_slots(self, intent: str) -> tuple[str, ...]:
        """All slots reachable from an intent through dependency edges."""
        out: list[str] = []
        stack = list(self.dependent_slots(intent))
        while stack:
            s = stack.pop(0)
            if s not in out:
                out.append(s)
                stack.extend(self.dependent_slots(s) if s in self.dependencies else ())
        return tuple(out)

    def missing_arguments(self, intent: str, frame: "SemanticFrame") -> tuple[str, ...]:
        """Direct arguments of intent with no value in the frame.

        object and gesture_click are feeders of object_mask_str, not
        arguments, so a frame carrying object_mask_str needs neither.
        """
        return tuple(s for s in self.dependent_slots(intent) if frame.get(s) is None)

    # -- action space -------------------------------------------------------

    def enumerate_actions(self) -> tuple[SystemAction, ...]:
        """The fixed action space: requests, confirms, query, executes.

        Ordering is deterministic: Request per slot in declaration order,
        Confirm per slot in declaration order, the single Query, then
        Execute per intent in declaration order.
        """
        acts = [SystemAction(REQUEST, s.name) for s in self.slots]
        acts += [SystemAction(CONFIRM, s.name) for s in self.slots]
        acts.append(SystemAction(QUERY))
        acts += [SystemAction(EXECUTE, i) for i in self.intents]
        return tuple(acts)

    def action_index(self, action: SystemAction) -> int:
        return self.enumerate_actions().index(action)

    # -- serialization ------------------------------------------------------

    def to_config_text(self) -> str:
        doc = {
            "intents": list(self.intents),
            "slots": [
                {
                    "name": s.name,
                    "modality": s.modality,
                    "domain": list(s.domain) if s.domain is not None else None,
                }
                for s in self.slots
            ],
            "dependencies": {k: list(v) for k, v in self.dependencies.items()},
        }
        return yaml.safe_dump(doc, sort_keys=False)

    @classmethod
    def from_config_text(cls, text: str) -> "Ontology":
        doc = yaml.safe_load(text)
        slots = tuple(
            Slot(
                name=d["name"],
                modality=d["modality"],
                domain=tuple(d["domain"]) if d.get("domain") is not None else None,
            )
            for d in doc["slots"]
        )
        deps = {k: tuple(v) for k, v in doc.get("dependencies", {}).items()}
        return cls(intents=tuple(doc["intents"]), slots=slots, dependencies=deps)

    def content_hash(self) -> str:
        """Stable hash of the serialized ontology, used to guard checkpoints."""
        return hashlib.sha256(self.to_config_text().encode("utf-8")).hexdigest()


def default_ontology() -> Ontology:
    """The full editing ontology: 5 intents, 7 slots, 20 actions."""
    slots = (
        Slot(SLOT_INTENT, SPEECH, INTENTS),
        Slot(SLOT_IMAGE_PATH, SPEECH, None),
        Slot(SLOT_ATTRIBUTE, SPEECH, ATTRIBUTES),
        Slot(SLOT_ADJUST_VALUE, SPEECH, ADJUST_VALUES),
        Slot(SLOT_OBJECT, SPEECH, None),
        Slot(SLOT_GESTURE_CLICK, GESTURE, None),
        Slot(SLOT_OBJECT_MASK, GESTURE, None),
    )
    deps = {
        INTENT_OPEN: (SLOT_IMAGE_PATH,),
        INTENT_ADJUST: (SLOT_ATTRIBUTE, SLOT_ADJUST_VALUE, SLOT_OBJECT_MASK),
        INTENT_CLOSE: (),
        INTENT_UNDO: (),
        INTENT_REDO: (),
        SLOT_OBJECT_MASK: (SLOT_OBJECT, SLOT_GESTURE_CLICK),
    }
    return Ontology(intents=INTENTS, slots=slots, dependencies=deps)


class SemanticFrame:
    """A slot-value map; the intent travels as the value of the intent slot.

    Values must lie in the slot's declared domain when the domain is closed.
    Frames are plain mutable containers; equality is by content.
    """

    __slots__ = ("values",)

    def __init__(self, values: Mapping[str, object] | None = None, **kw):
        self.values: dict[str, object] = dict(values or {})
        self.values.update(kw)

    @property
    def intent(self):
        return self.values.get(SLOT_INTENT)

    def get(self, slot: str):
        return self.values.get(slot)

    def set(self, slot: str, value) -> "SemanticFrame":
        self.values[slot] = value
        return self

    def slots(self) -> tuple[str, ...]:
        return tuple(self.values)

    def copy(self) -> "SemanticFrame":
        return SemanticFrame(self.values)

    def validate(self, ontology: Ontology) -> None:
        for name, value in self.values.items():
            slot = ontology.slot(name)  # raises KeyError for undeclared slots
            if slot.domain is not None and value not in slot.domain:
                raise ValueError(f"value {value!r} outside domain of slot {name!r}")

    def __eq__(self, other):
        return isinstance(other, SemanticFrame) and self.values == other.values

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.values.items())
        return f"SemanticFrame({inner})"


def frames_equal(a: SemanticFrame, b: SemanticFrame, mask_equal=None) -> bool:
    """Content equality with a pluggable comparison for mask payloads.

    Base64 PNG strings for the same pixels are encoder-dependent, so callers
    that care about pixel identity pass mask_equal to compare decoded masks.
    """
    if set(a.values) != set(b.values):
        return False
    for k, va in a.values.items():
        vb = b.values[k]
        if k == SLOT_OBJECT_MASK and mask_equal is not None:
            if not mask_equal(va, vb):
                return False
        elif va != vb:
            return False
    return True
