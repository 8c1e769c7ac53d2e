"""Small raster types: RGB images and binary masks with PNG serialization.

Pixels are 8-bit RGB triples in row-major order (numpy uint8 arrays of shape
(height, width, 3)); masks are boolean arrays of shape (height, width).
Mask payloads travel between components as base64-encoded PNG strings, which
always begin with "iVBOR" (the base64 of the PNG signature).
"""
from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image


class Raster:
    """An RGB image backed by a (h, w, 3) uint8 array."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) array, got {arr.shape}")
        self.pixels = arr

    @classmethod
    def filled(cls, width: int, height: int, color=(0, 0, 0)) -> "Raster":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[:, :] = color
        return cls(arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def copy(self) -> "Raster":
        return Raster(self.pixels.copy())

    def __eq__(self, other):
        return isinstance(other, Raster) and np.array_equal(self.pixels, other.pixels)

    def checksum(self) -> str:
        import hashlib

        return hashlib.sha256(self.pixels.tobytes()).hexdigest()

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "Raster":
        img = Image.open(io.BytesIO(data)).convert("RGB")
        return cls(np.asarray(img, dtype=np.uint8))

    def to_base64_png(self) -> str:
        return base64.b64encode(self.to_png_bytes()).decode("ascii")

    @classmethod
    def from_base64_png(cls, text: str) -> "Raster":
        return cls.from_png_bytes(base64.b64decode(text))


class Mask:
    """A binary region over an image, backed by a (h, w) boolean array."""

    __slots__ = ("bits", "label")

    def __init__(self, bits: np.ndarray, label: str = ""):
        arr = np.asarray(bits, dtype=bool)
        if arr.ndim != 2:
            raise ValueError(f"expected (h, w) array, got {arr.shape}")
        self.bits = arr
        self.label = label

    @classmethod
    def blank(cls, width: int, height: int) -> "Mask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def rect(cls, width: int, height: int, x: int, y: int, w: int, h: int, label: str = "") -> "Mask":
        bits = np.zeros((height, width), dtype=bool)
        bits[max(y, 0) : max(y + h, 0), max(x, 0) : max(x + w, 0)] = True
        return cls(bits, label)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())

    def contains(self, x: int, y: int) -> bool:
        if 0 <= x < self.width and 0 <= y < self.height:
            return bool(self.bits[y, x])
        return False

    def __eq__(self, other):
        return isinstance(other, Mask) and np.array_equal(self.bits, other.bits)

    def iou(self, other: "Mask") -> float:
        inter = np.logical_and(self.bits, other.bits).sum()
        union = np.logical_or(self.bits, other.bits).sum()
        return float(inter) / float(union) if union else 0.0

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        arr = np.where(self.bits, 255, 0).astype(np.uint8)
        Image.fromarray(arr, mode="L").save(buf, format="PNG")
        return buf.getvalue()

    @classmethod
    def from_png_bytes(cls, data: bytes, label: str = "") -> "Mask":
        img = Image.open(io.BytesIO(data)).convert("L")
        return cls(np.asarray(img) >= 128, label)

    def to_base64_png(self) -> str:
        return base64.b64encode(self.to_png_bytes()).decode("ascii")

    @classmethod
    def from_base64_png(cls, text: str, label: str = "") -> "Mask":
        return cls.from_png_bytes(base64.b64decode(text), label)


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to nearest integer with ties away from zero.

    numpy's round ties to even, which disagrees with the pixel formulas here,
    so this is spelled out: sign(x) * floor(|x| + 0.5).
    """
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)
