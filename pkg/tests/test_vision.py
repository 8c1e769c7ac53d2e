"""Scene dataset: determinism, layout constraints, query semantics, disk IO."""
import numpy as np

from convedit.vision import (
    SCENE_SIZE,
    VOCABULARY,
    generate_dataset,
    load_dataset,
    query,
    render,
    save_dataset,
)


def test_generation_is_deterministic(dataset):
    again = generate_dataset(7)
    assert [s.scene_id for s in again.scenes] == [s.scene_id for s in dataset.scenes]
    assert again.scenes == dataset.scenes
    for scene in dataset.scenes[:5]:
        assert render(scene) == render(scene)


def test_split_sizes(dataset):
    assert len(dataset.scenes) == 130
    assert len(dataset.train) == 100
    assert len(dataset.test) == 30
    assert [s.scene_id for s in dataset.scenes] == sorted(s.scene_id for s in dataset.scenes)


def test_scene_layout_constraints(dataset):
    for scene in dataset.scenes:
        assert scene.width == scene.height == SCENE_SIZE
        assert 2 <= len(scene.objects) <= 4
        names = [o.name for o in scene.objects]
        assert len(set(names)) == len(names), f"{scene.scene_id} repeats an object name"
        for obj in scene.objects:
            assert obj.name in VOCABULARY
            x, y, w, h = obj.bbox
            assert x >= 0 and y >= 0 and x + w <= SCENE_SIZE and y + h <= SCENE_SIZE
        # footprints are disjoint, so a mask identifies one object unambiguously
        for i, a in enumerate(scene.objects):
            for b in scene.objects[i + 1 :]:
                fa = a.footprint(scene.width, scene.height)
                fb = b.footprint(scene.width, scene.height)
                assert not np.logical_and(fa.bits, fb.bits).any()


def test_footprint_matches_rendered_pixels(dataset):
    scene = dataset.scenes[0]
    image = render(scene)
    for obj in scene.objects:
        mask = obj.footprint(scene.width, scene.height)
        assert (image.pixels[mask.bits] == obj.color).all()


def test_query_by_name_and_click(dataset):
    scene = dataset.scenes[0]
    obj = scene.objects[0]
    masks = query(scene, obj.name)
    assert len(masks) == 1  # names are unique within a scene
    assert masks[0] == obj.footprint(scene.width, scene.height)
    assert query(scene, obj.name.upper()) == masks
    assert query(scene, " %s " % obj.name) == masks

    absent = next(n for n in VOCABULARY if n not in {o.name for o in scene.objects})
    assert query(scene, absent) == []

    ys, xs = np.nonzero(masks[0].bits)
    inside = (int(xs[0]), int(ys[0]))
    assert query(scene, obj.name, click=inside) == masks
    outside_mask = ~masks[0].bits
    ys, xs = np.nonzero(outside_mask)
    outside = (int(xs[0]), int(ys[0]))
    assert query(scene, obj.name, click=outside) == []


def test_dataset_lookup_and_image_cache_isolation(dataset):
    scene = dataset.scenes[3]
    assert dataset.scene(scene.scene_id) is scene
    assert scene.scene_id in dataset
    assert "scene_xyz" not in dataset
    image = dataset.image(scene.scene_id)
    image.pixels[:] = 0
    assert dataset.image(scene.scene_id) == render(scene)


def test_save_load_round_trip(tmp_path, dataset):
    root = tmp_path / "scenes"
    save_dataset(dataset, str(root))
    back = load_dataset(str(root))
    assert back.scenes == dataset.scenes
    assert back.seed == dataset.seed
    assert len(back.train) == len(dataset.train)
    for scene in dataset.scenes[:3]:
        assert back.image(scene.scene_id) == dataset.image(scene.scene_id)
