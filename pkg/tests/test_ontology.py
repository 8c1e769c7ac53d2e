"""Ontology structure, the enumerated action space, and semantic frames."""
import pytest

from convedit.ontology import (
    ADJUST_VALUES,
    ATTRIBUTES,
    GESTURE,
    INTENTS,
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
    Slot,
    SystemAction,
    default_ontology,
    frames_equal,
)


def test_domains():
    assert INTENTS == ("open", "adjust", "close", "undo", "redo")
    assert ATTRIBUTES == ("brightness", "saturation", "contrast")
    assert ADJUST_VALUES == (-50, -40, -30, -20, -10, 10, 20, 30, 40, 50)
    assert 0 not in ADJUST_VALUES  # a zero-magnitude edit is not an edit


def test_slot_declarations(ontology):
    assert ontology.slot_names == (
        SLOT_INTENT,
        SLOT_IMAGE_PATH,
        SLOT_ATTRIBUTE,
        SLOT_ADJUST_VALUE,
        SLOT_OBJECT,
        SLOT_GESTURE_CLICK,
        SLOT_OBJECT_MASK,
    )
    assert ontology.speech_slots() == (
        SLOT_INTENT,
        SLOT_IMAGE_PATH,
        SLOT_ATTRIBUTE,
        SLOT_ADJUST_VALUE,
        SLOT_OBJECT,
    )
    assert ontology.gesture_slots() == (SLOT_GESTURE_CLICK, SLOT_OBJECT_MASK)
    assert ontology.slot(SLOT_INTENT).domain == INTENTS
    assert ontology.slot(SLOT_OBJECT).domain is None
    with pytest.raises(KeyError):
        ontology.slot("volume")


def test_dependencies(ontology):
    assert ontology.dependent_slots("open") == (SLOT_IMAGE_PATH,)
    assert ontology.dependent_slots("adjust") == (
        SLOT_ATTRIBUTE,
        SLOT_ADJUST_VALUE,
        SLOT_OBJECT_MASK,
    )
    for intent in ("close", "undo", "redo"):
        assert ontology.dependent_slots(intent) == ()
    # the region argument is fed by the object name and the click gesture
    assert ontology.dependent_slots(SLOT_OBJECT_MASK) == (SLOT_OBJECT, SLOT_GESTURE_CLICK)
    assert ontology.subtree_slots("adjust") == (
        SLOT_ATTRIBUTE,
        SLOT_ADJUST_VALUE,
        SLOT_OBJECT_MASK,
        SLOT_OBJECT,
        SLOT_GESTURE_CLICK,
    )


def test_action_space_is_20_in_declaration_order(ontology):
    actions = ontology.enumerate_actions()
    assert len(actions) == 20
    slots = ontology.slot_names
    expected = (
        tuple(SystemAction("request", s) for s in slots)
        + tuple(SystemAction("confirm", s) for s in slots)
        + (SystemAction("query"),)
        + tuple(SystemAction("execute", i) for i in INTENTS)
    )
    assert actions == expected
    for i, action in enumerate(actions):
        assert ontology.action_index(action) == i


def test_missing_arguments(ontology):
    frame = SemanticFrame({SLOT_INTENT: "adjust", SLOT_ATTRIBUTE: "contrast"})
    assert ontology.missing_arguments("adjust", frame) == (SLOT_ADJUST_VALUE, SLOT_OBJECT_MASK)
    frame.set(SLOT_ADJUST_VALUE, 10).set(SLOT_OBJECT_MASK, "payload")
    assert ontology.missing_arguments("adjust", frame) == ()


def test_construction_rejects_duplicates_and_dangling_deps():
    with pytest.raises(ValueError):
        Ontology(intents=("a", "a"), slots=())
    with pytest.raises(ValueError):
        Ontology(
            intents=("a",),
            slots=(Slot("x", SPEECH), Slot("x", GESTURE)),
        )
    with pytest.raises(ValueError):
        Ontology(intents=("a",), slots=(Slot("x", SPEECH),), dependencies={"a": ("ghost",)})


def test_config_text_round_trip(ontology):
    clone = Ontology.from_config_text(ontology.to_config_text())
    assert clone == ontology
    assert clone.content_hash() == ontology.content_hash()


def test_content_hash_tracks_structure(ontology):
    altered = Ontology(
        intents=ontology.intents,
        slots=tuple(
            Slot(s.name, s.modality, ("brightness", "saturation")) if s.name == SLOT_ATTRIBUTE else s
            for s in ontology.slots
        ),
        dependencies=dict(ontology.dependencies),
    )
    assert altered.content_hash() != ontology.content_hash()


def test_semantic_frame_basics(ontology):
    frame = SemanticFrame({SLOT_INTENT: "adjust"}, attribute="brightness")
    assert frame.intent == "adjust"
    assert frame.get(SLOT_ATTRIBUTE) == "brightness"
    assert frame.slots() == (SLOT_INTENT, SLOT_ATTRIBUTE)
    frame.validate(ontology)
    assert frame.copy() == frame
    assert frame != SemanticFrame()

    with pytest.raises(ValueError):
        SemanticFrame({SLOT_ATTRIBUTE: "hue"}).validate(ontology)
    with pytest.raises(KeyError):
        SemanticFrame({"volume": 3}).validate(ontology)


def test_frames_equal_with_mask_comparator():
    a = SemanticFrame({SLOT_OBJECT_MASK: "payload-a"})
    b = SemanticFrame({SLOT_OBJECT_MASK: "payload-b"})
    assert not frames_equal(a, b)
    assert frames_equal(a, b, mask_equal=lambda x, y: True)
    assert not frames_equal(a, SemanticFrame())
