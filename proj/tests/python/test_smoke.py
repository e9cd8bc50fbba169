"""Smoke tests for the Python bindings: a miniature train/score/persist loop."""

import numpy as np
import pytest

import xcos


@pytest.fixture(scope="module")
def dataset():
    return xcos.synth_dataset(
        identities=4, images_per_identity=6, size=14, noise=0.04, max_translation=1, seed=20
    )


@pytest.fixture(scope="module")
def teacher(dataset):
    return xcos.train_teacher(
        dataset, epochs=2, batch_size=6, lr_drops=[], seed=21, embed_dim=16
    )


@pytest.fixture(scope="module")
def model(dataset, teacher):
    model = xcos.train_xcos(
        dataset,
        teacher,
        epochs=2,
        batch_size=6,
        pairs_per_batch=4,
        lr_drops=[],
        seed=22,
        grid_channels=4,
        init_from_teacher=True,
    )
    xcos.calibrate(model, teacher, dataset, pairs=12, seed=23)
    return model


def test_version():
    assert xcos.__version__


def test_dataset_shape(dataset):
    assert len(dataset) == 24
    assert dataset.num_identities == 4
    img = dataset.image(0)
    assert img.shape == (14, 14, 3)
    assert img.dtype == np.uint8


def test_normalize_range(dataset):
    t = xcos.normalize(dataset.image(0))
    assert t.shape == (3, 14, 14)
    assert t.min() >= -0.99609375 - 1e-12
    assert t.max() <= 0.99609375 + 1e-12


def test_score_decomposition(dataset, model):
    a = xcos.normalize(dataset.image(0))
    b = xcos.normalize(dataset.image(1))
    for variant in ("unit", "correlated", "learned"):
        value, s, w = model.score(a, b, attention=variant)
        assert s.shape == (7, 7)
        assert w.shape == (7, 7)
        # the score is exactly the weighted sum of local similarities
        assert abs(value - float((s * w).sum())) < 1e-9
        assert np.abs(s).max() <= 1.0 + 1e-9
    # learned attention is a distribution over grids
    _, _, learned = model.score(a, b, attention="learned")
    assert learned.min() > 0
    assert abs(learned.sum() - 1.0) < 1e-9


def test_self_similarity(dataset, model):
    a = xcos.normalize(dataset.image(3))
    value, _, _ = model.score(a, a, attention="unit")
    assert value == pytest.approx(1.0, abs=1e-9)


def test_teacher_symmetry(dataset, teacher):
    a = xcos.normalize(dataset.image(0))
    b = xcos.normalize(dataset.image(7))
    assert teacher.score(a, b) == pytest.approx(teacher.score(b, a), abs=1e-12)
    assert teacher.score(a, a) == pytest.approx(1.0, abs=1e-9)


def test_checkpoint_roundtrip(tmp_path, dataset, model, teacher):
    model_path = str(tmp_path / "model.xckpt")
    model.save(model_path)
    restored = xcos.XcosModel.load(model_path)
    assert restored.calibrated

    a = xcos.normalize(dataset.image(2))
    b = xcos.normalize(dataset.image(9))
    for variant in ("unit", "correlated", "learned"):
        v1, s1, w1 = model.score(a, b, attention=variant)
        v2, s2, w2 = restored.score(a, b, attention=variant)
        assert v1 == v2
        assert (s1 == s2).all()
        assert (w1 == w2).all()

    teacher_path = str(tmp_path / "teacher.xckpt")
    teacher.save(teacher_path)
    restored_teacher = xcos.TeacherModel.load(teacher_path)
    assert restored_teacher.score(a, b) == teacher.score(a, b)


def test_mask_coverage_and_fill(dataset):
    mask = xcos.free_form_mask(56, 56, 0.3, seed=5)
    assert mask.shape == (56, 56)
    assert 0.25 <= mask.mean() <= 0.35

    img = xcos.normalize(dataset.image(0))
    mask_small = xcos.free_form_mask(14, 14, 0.5, seed=6)
    masked = xcos.apply_mask(img, mask_small, fill=0.0)
    assert (masked[:, mask_small] == 0.0).all()
    assert (masked[:, ~mask_small] == img[:, ~mask_small]).all()


def test_threshold_accuracy_and_pearson():
    scores = [0.9, 0.8, 0.75, 0.7, -0.1, -0.2, 0.0, -0.4]
    labels = [True, True, True, True, False, False, False, False]
    report = xcos.best_threshold_accuracy(scores, labels, folds=2, seed=1)
    assert report["accuracy"] == pytest.approx(1.0)

    assert xcos.pearson_r([1.0, 2.0, 3.0], [2.0, 4.0, 6.0]) == pytest.approx(1.0)


def test_dataset_persistence(tmp_path, dataset):
    out = str(tmp_path / "data")
    dataset.save(out)
    back = xcos.Dataset.load(out)
    assert len(back) == len(dataset)
    assert back.num_identities == dataset.num_identities
    assert (back.image(5) == dataset.image(5)).all()
