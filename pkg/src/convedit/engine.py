"""Image edit engine: attribute adjustments, edit history, execution dispatch.

All pixel arithmetic is integer-exact: intermediate products are rounded
half away from zero and clipped to [0, 255], so repeated runs are
bit-identical. A failed execution is a strict no-op on engine state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ontology import (
    ATTRIBUTES,
    INTENT_ADJUST,
    INTENT_CLOSE,
    INTENT_OPEN,
    INTENT_REDO,
    INTENT_UNDO,
    SLOT_ADJUST_VALUE,
    SLOT_ATTRIBUTE,
    SLOT_IMAGE_PATH,
    SLOT_OBJECT_MASK,
    SemanticFrame,
)
from .raster import Mask, Raster, round_half_away

# Failure reasons reported by execute(); missing_argument carries the slot.
FAIL_MISSING = "missing_argument"
FAIL_NO_HISTORY = "no_history"
FAIL_NO_REDO = "no_redo"
FAIL_NOT_OPEN = "not_open"
FAIL_UNKNOWN_ATTRIBUTE = "unknown_attribute"


def apply_adjust(image: Raster, mask: Mask, attribute: str, value: int) -> Raster:
    """Return a new image with the attribute adjusted inside the mask.

    value is a percentage in [-50, 50]. Formulas per channel c (g = round
    half away from zero, all results clipped to [0, 255]):

      brightness: c' = clip(c + g(255 * v / 100))
      saturation: gray = g((r + g + b) / 3); c' = clip(gray + g((c - gray) * (1 + v/100)))
      contrast:   c' = clip(128 + g((c - 128) * (1 + v/100)))
    """
    if attribute not in ATTRIBUTES:
        raise ValueError(f"unknown attribute {attribute!r}")
    if mask.bits.shape != image.pixels.shape[:2]:
        raise ValueError("mask shape does not match image")
    px = image.pixels.astype(np.int64)
    if attribute == "brightness":
        shift = int(round_half_away(np.array(255.0 * value / 100.0)))
        out = px + shift
    elif attribute == "saturation":
        gray = round_half_away(px.sum(axis=2) / 3.0)[:, :, None]
        out = gray + round_half_away((px - gray) * (1.0 + value / 100.0))
    else:  # contrast
        out = 128 + round_half_away((px - 128) * (1.0 + value / 100.0))
    out = np.clip(out, 0, 255).astype(np.uint8)
    result = image.pixels.copy()
    result[mask.bits] = out[mask.bits]
    return Raster(result)


@dataclass
class HistoryEntry:
    frame: SemanticFrame
    pre: Raster  # image before the edit
    post: Raster  # image after the edit, so redo restores bit-exactly


@dataclass
class EditHistory:
    """Applied edits plus an undo cursor.

    cursor counts currently-applied edits; entries past the cursor are the
    redo tail and are truncated by the next fresh edit.
    """

    entries: list[HistoryEntry] = field(default_factory=list)
    cursor: int = 0

    def record(self, frame: SemanticFrame, pre: Raster, post: Raster) -> None:
        del self.entries[self.cursor :]
        self.entries.append(HistoryEntry(frame, pre, post))
        self.cursor = len(self.entries)

    @property
    def can_undo(self) -> bool:
        return self.cursor > 0

    @property
    def can_redo(self) -> bool:
        return self.cursor < len(self.entries)


@dataclass(frozen=True)
class EngineState:
    """Binary feature flags exposed to the dialogue manager."""

    image_loaded: bool = False
    has_previous_history: bool = False
    has_next_history: bool = False
    candidates_loaded: bool = False
    session_closed: bool = False

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (
            int(self.image_loaded),
            int(self.has_previous_history),
            int(self.has_next_history),
            int(self.candidates_loaded),
            int(self.session_closed),
        )


@dataclass(frozen=True)
class ExecResult:
    success: bool
    reason: str | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.success


class ImageEditEngine:
    """Holds the working image, edit history, and vision candidates.

    image_loader maps an image_path value to a Raster; the engine never
    touches the filesystem itself.
    """

    def __init__(self, image_loader: Callable[[str], Raster]):
        self._load = image_loader
        self.image: Raster | None = None
        self.image_path: str | None = None
        self.history = EditHistory()
        self.candidates: list[Mask] = []
        self.session_closed = False

    # -- state --------------------------------------------------------------

    def state(self) -> EngineState:
        return EngineState(
            image_loaded=self.image is not None,
            has_previous_history=self.history.can_undo,
            has_next_history=self.history.can_redo,
            candidates_loaded=bool(self.candidates),
            session_closed=self.session_closed,
        )

    def load_candidates(self, masks: list[Mask]) -> ExecResult:
        """Replace the candidate set; an empty result clears the flag."""
        if self.image is None:
            return ExecResult(False, FAIL_NOT_OPEN)
        self.candidates = list(masks)
        return ExecResult(True)

    # -- execution ----------------------------------------------------------

    def execute(self, frame: SemanticFrame) -> ExecResult:
        """Dispatch an executable frame; on failure nothing changes."""
        intent = frame.intent
        if intent == INTENT_OPEN:
            return self._exec_open(frame)
        if self.image is None:
            return ExecResult(False, FAIL_NOT_OPEN)
        if intent == INTENT_ADJUST:
            return self._exec_adjust(frame)
        if intent == INTENT_UNDO:
            return self._exec_undo()
        if intent == INTENT_REDO:
            return self._exec_redo()
        if intent == INTENT_CLOSE:
            self.session_closed = True
            return ExecResult(True)
        return ExecResult(False, FAIL_MISSING, SLOT_INTENT)

    def _exec_open(self, frame: SemanticFrame) -> ExecResult:
        path = frame.get(SLOT_IMAGE_PATH)
        if path is None:
            return ExecResult(False, FAIL_MISSING, SLOT_IMAGE_PATH)
        try:
            image = self._load(str(path))
        except KeyError:
            return ExecResult(False, FAIL_MISSING, SLOT_IMAGE_PATH)
        self.image = image.copy()
        self.image_path = str(path)
        self.history = EditHistory()
        self.candidates = []
        self.session_closed = False
        return ExecResult(True)

    def _exec_adjust(self, frame: SemanticFrame) -> ExecResult:
        attribute = frame.get(SLOT_ATTRIBUTE)
        value = frame.get(SLOT_ADJUST_VALUE)
        mask_str = frame.get(SLOT_OBJECT_MASK)
        if attribute is None:
            return ExecResult(False, FAIL_MISSING, SLOT_ATTRIBUTE)
        if value is None:
            return ExecResult(False, FAIL_MISSING, SLOT_ADJUST_VALUE)
        if mask_str is None:
            return ExecResult(False, FAIL_MISSING, SLOT_OBJECT_MASK)
        if attribute not in ATTRIBUTES:
            return ExecResult(False, FAIL_UNKNOWN_ATTRIBUTE, str(attribute))
        try:
            mask = mask_str if isinstance(mask_str, Mask) else Mask.from_base64_png(str(mask_str))
        except Exception:
            return ExecResult(False, FAIL_MISSING, SLOT_OBJECT_MASK)
        if mask.bits.shape != self.image.pixels.shape[:2]:
            return ExecResult(False, FAIL_MISSING, SLOT_OBJECT_MASK)
        pre = self.image.copy()
        post = apply_adjust(self.image, mask, str(attribute), int(value))
        self.image = post
        self.history.record(frame.copy(), pre, post.copy())
        return ExecResult(True)

    def _exec_undo(self) -> ExecResult:
        if not self.history.can_undo:
            return ExecResult(False, FAIL_NO_HISTORY)
        self.history.cursor -= 1
        self.image = self.history.entries[self.history.cursor].pre.copy()
        return ExecResult(True)

    def _exec_redo(self) -> ExecResult:
        if not self.history.can_redo:
            return ExecResult(False, FAIL_NO_REDO)
        self.image = self.history.entries[self.history.cursor].post.copy()
        self.history.cursor += 1
        return ExecResult(True)
