"""Synthetic visual/textual BOW data with multi-label ground truth.

Each class owns a disjoint block of visual words and a disjoint block of
tags, with a fixed random word distribution inside each block. An image
draws its visual words from the distributions of its classes, except that
a ``visual_noise_rate`` fraction of the mass is drawn uniformly over the
whole vocabulary (clutter). Tags follow the same scheme, but the
``tag_noise_rate`` fraction is drawn from the average tag distribution of
all classes, so noisy tags look like real tags of unrelated classes.

Few visual words per image make the visual model weak on its own, which
is the regime where tag-guided refinement matters.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import BowMatrix
from .errors import ConfigError
from .evaluation import LabelMatrix


@dataclass(frozen=True)
class SynthConfig:
    n_images: int = 400
    n_classes: int = 10
    visual_vocab: int = 200
    textual_vocab: int = 100
    tag_noise_rate: float = 0.2
    visual_noise_rate: float = 0.3
    seed: int = 0
    visual_words_per_image: int = 5
    tags_per_image: int = 6
    multi_label_rate: float = 0.25
    test_fraction: float = 0.8

    def __post_init__(self):
        for name in ("tag_noise_rate", "visual_noise_rate", "multi_label_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        for name in ("n_images", "n_classes", "visual_vocab", "textual_vocab",
                     "visual_words_per_image", "tags_per_image"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.n_classes > min(self.visual_vocab, self.textual_vocab):
            raise ConfigError("need at least one visual word and one tag per class")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.n_images < 2 * self.n_classes:
            raise ConfigError("need at least two images per class for a train/test split")

    def to_dict(self):
        return asdict(self)


def _block_distributions(rng, vocab, n_classes):
    blocks = np.array_split(np.arange(vocab), n_classes)
    P = np.zeros((n_classes, vocab))
    for c, blk in enumerate(blocks):
        P[c, blk] = rng.dirichlet(np.ones(blk.size))
    return P


def _draw(rng, class_dist, labels, noise, n_draws, noise_dist):
    n = labels.shape[0]
    mix = labels @ class_dist / labels.sum(axis=1, keepdims=True)
    probs = (1.0 - noise) * mix + noise * noise_dist
    probs /= probs.sum(axis=1, keepdims=True)
    return np.stack([rng.multinomial(n_draws, probs[i]) for i in range(n)]).astype(float)


def _labels(rng, cfg):
    n, C = cfg.n_images, cfg.n_classes
    primary = rng.permutation(np.arange(n) % C)
    Y = np.zeros((n, C), dtype=np.int8)
    Y[np.arange(n), primary] = 1
    if C > 1:
        extra = rng.random(n) < cfg.multi_label_rate
        offset = rng.integers(1, C, size=n)
        second = (primary + offset) % C
        Y[np.flatnonzero(extra), second[extra]] = 1
    return Y


def train_test_split(labels: np.ndarray, test_fraction: float, rng) -> tuple:
    """Random split with every class positive on both sides."""
    n = labels.shape[0]
    order = rng.permutation(n)
    n_test = int(round(test_fraction * n))
    is_test = np.zeros(n, dtype=bool)
    is_test[order[:n_test]] = True
    for c in range(labels.shape[1]):
        pos = np.flatnonzero(labels[:, c])
        for side in (True, False):
            if not np.any(is_test[pos] == side) and pos.size >= 2:
                # move one positive across, swapping with an item from the other side
                j = pos[0] if side else pos[-1]
                swap = next(i for i in order if is_test[i] == side and i not in pos)
                is_test[j], is_test[swap] = side, not side
    return np.flatnonzero(~is_test), np.flatnonzero(is_test)


def synth_dataset(cfg: SynthConfig):
    """Return ``(Y, T, labels, (train_idx, test_idx))``, deterministic under ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    labels = _labels(rng, cfg)
    Pv = _block_distributions(rng, cfg.visual_vocab, cfg.n_classes)
    uniform = np.full(cfg.visual_vocab, 1.0 / cfg.visual_vocab)
    Yv = _draw(rng, Pv, labels, cfg.visual_noise_rate, cfg.visual_words_per_image, uniform)
    Pt = _block_distributions(rng, cfg.textual_vocab, cfg.n_classes)
    Tv = _draw(rng, Pt, labels, cfg.tag_noise_rate, cfg.tags_per_image, Pt.mean(axis=0))
    split = train_test_split(labels, cfg.test_fraction, rng)
    Y = BowMatrix(Yv, [f"vw{j}" for j in range(cfg.visual_vocab)])
    T = BowMatrix(Tv, [f"tag{j}" for j in range(cfg.textual_vocab)])
    return Y, T, LabelMatrix(labels, [f"class{c}" for c in range(cfg.n_classes)]), split
