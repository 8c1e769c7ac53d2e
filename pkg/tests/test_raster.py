"""Raster and mask types: geometry, IoU, and PNG round-trips."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from convedit.raster import Mask, Raster, round_half_away


def test_round_half_away_ties():
    x = np.array([0.5, -0.5, 2.5, -2.5, 1.4, -1.4, 0.0])
    assert round_half_away(x).tolist() == [1, -1, 3, -3, 1, -1, 0]


def test_raster_shape_and_copy():
    r = Raster.filled(4, 3, (10, 20, 30))
    assert (r.width, r.height) == (4, 3)
    assert r.pixels.shape == (3, 4, 3)
    c = r.copy()
    c.pixels[0, 0] = (0, 0, 0)
    assert r.pixels[0, 0].tolist() == [10, 20, 30]
    with pytest.raises(ValueError):
        Raster(np.zeros((3, 4), dtype=np.uint8))


def test_raster_png_round_trip_and_prefix():
    rng = np.random.default_rng(0)
    r = Raster(rng.integers(0, 256, size=(11, 7, 3), dtype=np.uint8))
    assert Raster.from_png_bytes(r.to_png_bytes()) == r
    encoded = r.to_base64_png()
    assert encoded.startswith("iVBOR")
    assert Raster.from_base64_png(encoded) == r


def test_mask_rect_and_contains():
    m = Mask.rect(8, 8, 2, 1, 3, 4)
    assert m.count() == 12
    assert m.contains(2, 1) and m.contains(4, 4)
    assert not m.contains(5, 1) and not m.contains(2, 5)
    assert not m.contains(-1, 0) and not m.contains(8, 0)


def test_mask_iou_oracle():
    a = Mask.rect(8, 8, 0, 0, 4, 4)
    b = Mask.rect(8, 8, 2, 0, 4, 4)
    # intersection 2x4 = 8, union 16 + 16 - 8 = 24
    assert a.iou(b) == pytest.approx(8 / 24)
    assert a.iou(a) == 1.0
    assert a.iou(Mask.blank(8, 8)) == 0.0
    assert Mask.blank(8, 8).iou(Mask.blank(8, 8)) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mask_png_round_trip(seed):
    rng = np.random.default_rng(seed)
    bits = rng.random((9, 13)) < 0.4
    m = Mask(bits, label="x")
    assert m.to_base64_png().startswith("iVBOR")
    back = Mask.from_base64_png(m.to_base64_png())
    assert back == m
