"""Synthetic scene dataset and the ground-truth vision engine.

Scenes are procedurally generated rasters holding 2-4 disjoint named shapes
drawn from a small shared vocabulary. The vision engine answers name (and
optional click) queries with exact footprint masks, standing in for a real
grounding model. Generation is seed-deterministic: the same seed always
produces bit-identical scenes and masks.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import yaml

from .raster import Mask, Raster

VOCABULARY = (
    "man",
    "woman",
    "dog",
    "cat",
    "tree",
    "car",
    "house",
    "ball",
    "bird",
    "boat",
    "sky",
    "grass",
)

RECT = "rectangle"
ELLIPSE = "ellipse"

SCENE_SIZE = 64
TRAIN_SCENES = 100
TEST_SCENES = 30


@dataclass(frozen=True)
class ObjectSpec:
    """A named shape: bbox is (x, y, w, h) in pixel coordinates."""

    name: str
    shape: str
    bbox: tuple[int, int, int, int]
    color: tuple[int, int, int]

    def footprint(self, width: int, height: int) -> Mask:
        """The exact pixel footprint; rendering paints this same mask."""
        x, y, w, h = self.bbox
        bits = np.zeros((height, width), dtype=bool)
        if self.shape == RECT:
            bits[y : y + h, x : x + w] = True
        else:
            ys, xs = np.mgrid[0:height, 0:width]
            cx, cy = x + w / 2.0, y + h / 2.0
            rx, ry = w / 2.0, h / 2.0
            bits = ((xs + 0.5 - cx) / rx) ** 2 + ((ys + 0.5 - cy) / ry) ** 2 <= 1.0
        return Mask(bits, label=self.name)


@dataclass(frozen=True)
class SceneSpec:
    scene_id: str
    width: int
    height: int
    background: tuple[int, int, int]
    objects: tuple[ObjectSpec, ...]


def render(scene: SceneSpec) -> Raster:
    image = Raster.filled(scene.width, scene.height, scene.background)
    for obj in scene.objects:
        image.pixels[obj.footprint(scene.width, scene.height).bits] = obj.color
    return image


def query(scene: SceneSpec, name: str, click: tuple[int, int] | None = None) -> list[Mask]:
    """Masks of objects matching the name (case-insensitive exact match).

    A click keeps only masks containing that pixel. Results follow scene
    object order; consecutive queries are independent.
    """
    wanted = name.strip().lower()
    masks = [
        obj.footprint(scene.width, scene.height)
        for obj in scene.objects
        if obj.name.lower() == wanted
    ]
    if click is not None:
        masks = [m for m in masks if m.contains(int(click[0]), int(click[1]))]
    return masks


def _boxes_apart(a: tuple[int, int, int, int], b: tuple[int, int, int, int], gap: int = 1) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return ax + aw + gap <= bx or bx + bw + gap <= ax or ay + ah + gap <= by or by + bh + gap <= ay


def _sample_scene(scene_id: str, rng: np.random.Generator, size: int, allow_duplicates: bool) -> SceneSpec:
    background = tuple(int(c) for c in rng.integers(40, 200, size=3))
    n_objects = int(rng.integers(2, 5))
    if allow_duplicates:
        names = [str(rng.choice(VOCABULARY)) for _ in range(n_objects)]
    else:
        names = [str(n) for n in rng.choice(VOCABULARY, size=n_objects, replace=False)]
    objects: list[ObjectSpec] = []
    for name in names:
        for _ in range(500):
            w = int(rng.integers(8, 19))
            h = int(rng.integers(8, 19))
            x = int(rng.integers(1, size - w - 1))
            y = int(rng.integers(1, size - h - 1))
            bbox = (x, y, w, h)
            if all(_boxes_apart(bbox, o.bbox) for o in objects):
                break
        else:  # pragma: no cover - placement virtually never exhausts retries
            raise RuntimeError(f"could not place object in {scene_id}")
        while True:
            color = tuple(int(c) for c in rng.integers(0, 256, size=3))
            if sum(abs(c - b) for c, b in zip(color, background)) >= 90:
                break
        shape = RECT if rng.random() < 0.5 else ELLIPSE
        objects.append(ObjectSpec(name, shape, bbox, color))
    return SceneSpec(scene_id, size, size, background, tuple(objects))


class Dataset:
    """An ordered scene collection with a fixed train/test split."""

    def __init__(self, scenes: list[SceneSpec], seed: int, n_train: int = TRAIN_SCENES):
        self.scenes = list(scenes)
        self.seed = seed
        self.n_train = n_train
        self._by_id = {s.scene_id: s for s in self.scenes}
        self._image_cache: dict[str, Raster] = {}

    @property
    def train(self) -> list[SceneSpec]:
        return self.scenes[: self.n_train]

    @property
    def test(self) -> list[SceneSpec]:
        return self.scenes[self.n_train :]

    def scene(self, scene_id: str) -> SceneSpec:
        return self._by_id[scene_id]

    def __contains__(self, scene_id: str) -> bool:
        return scene_id in self._by_id

    def scene_ids(self) -> list[str]:
        return [s.scene_id for s in self.scenes]

    def image(self, scene_id: str) -> Raster:
        """Rendered scene raster; scene_id is the image_path value."""
        if scene_id not in self._image_cache:
            self._image_cache[scene_id] = render(self._by_id[scene_id])
        return self._image_cache[scene_id].copy()


def generate_dataset(
    seed: int,
    n_scenes: int = TRAIN_SCENES + TEST_SCENES,
    size: int = SCENE_SIZE,
    allow_duplicate_names: bool = False,
) -> Dataset:
    """Generate the scene collection; first 100 train, last 30 test.

    allow_duplicate_names permits repeated object names within one scene,
    used only by stress tests of click disambiguation.
    """
    rng = np.random.default_rng(seed)
    scenes = [
        _sample_scene(f"scene_{i:03d}", rng, size, allow_duplicate_names)
        for i in range(n_scenes)
    ]
    return Dataset(scenes, seed=seed)


# -- directory serialization ------------------------------------------------


def save_dataset(dataset: Dataset, root: str) -> None:
    """Write manifest.yaml plus scene and per-object mask PNGs."""
    os.makedirs(os.path.join(root, "scenes"), exist_ok=True)
    doc = {
        "seed": dataset.seed,
        "n_train": dataset.n_train,
        "scenes": [
            {
                "scene_id": s.scene_id,
                "width": s.width,
                "height": s.height,
                "background": list(s.background),
                "split": "train" if i < dataset.n_train else "test",
                "objects": [
                    {
                        "name": o.name,
                        "shape": o.shape,
                        "bbox": list(o.bbox),
                        "color": list(o.color),
                    }
                    for o in s.objects
                ],
            }
            for i, s in enumerate(dataset.scenes)
        ],
    }
    with open(os.path.join(root, "manifest.yaml"), "w") as f:
        yaml.safe_dump(doc, f, sort_keys=False)
    for scene in dataset.scenes:
        with open(os.path.join(root, "scenes", f"{scene.scene_id}.png"), "wb") as f:
            f.write(render(scene).to_png_bytes())
        mask_dir = os.path.join(root, "masks", scene.scene_id)
        os.makedirs(mask_dir, exist_ok=True)
        for idx, obj in enumerate(scene.objects):
            path = os.path.join(mask_dir, f"{idx}_{obj.name}.png")
            with open(path, "wb") as f:
                f.write(obj.footprint(scene.width, scene.height).to_png_bytes())


def load_dataset(root: str) -> Dataset:
    with open(os.path.join(root, "manifest.yaml")) as f:
        doc = yaml.safe_load(f)
    scenes = [
        SceneSpec(
            scene_id=s["scene_id"],
            width=s["width"],
            height=s["height"],
            background=tuple(s["background"]),
            objects=tuple(
                ObjectSpec(o["name"], o["shape"], tuple(o["bbox"]), tuple(o["color"]))
                for o in s["objects"]
            ),
        )
        for s in doc["scenes"]
    ]
    return Dataset(scenes, seed=doc["seed"], n_train=doc["n_train"])
