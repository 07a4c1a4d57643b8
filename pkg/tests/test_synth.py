import numpy as np
import pytest

from bowrefine.core import linear_kernel
from bowrefine.errors import ConfigError
from bowrefine.synth import SynthConfig, synth_dataset


def test_shapes_and_ids():
    cfg = SynthConfig(n_images=50, n_classes=5, visual_vocab=30, textual_vocab=20)
    Y, T, labels, (tr, te) = synth_dataset(cfg)
    assert Y.shape == (50, 30) and T.shape == (50, 20) and labels.values.shape == (50, 5)
    assert Y.feature_ids[0] == "vw0" and T.feature_ids[-1] == "tag19"
    assert np.all(Y.values.sum(axis=1) == cfg.visual_words_per_image)
    assert np.all(T.values.sum(axis=1) == cfg.tags_per_image)
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(50))
    assert len(te) == 40


def test_every_image_labelled_and_classes_split():
    _, _, labels, (tr, te) = synth_dataset(SynthConfig(seed=3))
    L = labels.values
    assert np.all(L.sum(axis=1) >= 1)
    assert np.all(L[tr].sum(axis=0) >= 1) and np.all(L[te].sum(axis=0) >= 1)


def test_same_seed_identical():
    a = synth_dataset(SynthConfig(seed=7))
    b = synth_dataset(SynthConfig(seed=7))
    c = synth_dataset(SynthConfig(seed=8))
    assert np.array_equal(a[0].values, b[0].values) and np.array_equal(a[1].values, b[1].values)
    assert np.array_equal(a[2].values, b[2].values) and np.array_equal(a[3][1], b[3][1])
    assert not np.array_equal(a[0].values, c[0].values)


def test_noise_free_block_structure():
    cfg = SynthConfig(n_images=300, n_classes=5, visual_vocab=50, textual_vocab=25,
                      visual_noise_rate=0.0, tag_noise_rate=0.0, visual_words_per_image=40,
                      multi_label_rate=0.0)
    Y, _, _, _ = synth_dataset(cfg)
    C = np.corrcoef(Y.values.T)
    blk = np.arange(50) // 10
    same = blk[:, None] == blk[None]
    off = ~np.eye(50, dtype=bool)
    assert C[same & off].mean() > C[~same].mean()
    # without noise, no visual word leaks outside its class block
    L = synth_dataset(cfg)[2].values
    for c in range(5):
        assert Y.values[L[:, c] == 1][:, blk != c].sum() == 0


def test_full_tag_noise_uninformative():
    ratios = []
    for seed in range(20):
        _, T, labels, _ = synth_dataset(SynthConfig(seed=seed, tag_noise_rate=1.0))
        A = linear_kernel(T)
        L = labels.values.astype(float)
        same = (L @ L.T) > 0
        off = ~np.eye(len(A), dtype=bool)
        ratios.append(A[same & off].mean() / A[~same].mean())
    assert abs(np.mean(ratios) - 1.0) <= 0.1


def test_clean_tags_informative():
    _, T, labels, _ = synth_dataset(SynthConfig(seed=0, tag_noise_rate=0.0))
    A = linear_kernel(T)
    L = labels.values.astype(float)
    same = (L @ L.T) > 0
    off = ~np.eye(len(A), dtype=bool)
    assert A[same & off].mean() > 3 * A[~same].mean()


@pytest.mark.parametrize("kwargs", [
    {"tag_noise_rate": 1.5}, {"visual_noise_rate": -0.1}, {"n_images": 0},
    {"n_classes": 300}, {"test_fraction": 1.0}, {"n_images": 15, "n_classes": 10},
])
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        SynthConfig(**kwargs)
