"""Synthetic stand-in for the encoder, classifier, projector and augmentations.

Each unlabeled sample has a fixed class and a fixed latent offset.  At epoch
``e`` its projection is ``normalize(sep(e) * mean[class] + offset + view noise)``
with ``sep(e) = class_sep + sep_growth * e``, mimicking an embedding that
improves as training proceeds.  The weak and strong views draw independent
view noise.

The mock classifier scores each class as ``kappa(e) * [c == belief] + G`` with
i.i.d. standard Gumbel noise ``G`` and ``kappa(e) = clf_gain * sep(e)``, so
its clean top-1 accuracy is ``e^kappa / (e^kappa + C - 1)``, a logistic
curve in the separation.  ``belief`` is the true class except for a
persistent ``label_noise`` fraction of samples stuck on a wrong class.
Probabilities are multiplied by ``classifier_bias`` and renormalized, which
makes the classifier over-predict classes with bias > 1.
"""
from dataclasses import asdict, dataclass
from typing import List, NamedTuple, Optional

import numpy as np

from .errors import InvalidConfig
from .vecmath import l2_normalize


@dataclass
class WorldConfig:
    N: int = 5000
    M: int = 40
    C: int = 10
    d: int = 32
    class_sep: float = 0.5
    sep_growth: float = 0.05
    view_noise: float = 0.3
    classifier_bias: Optional[List[float]] = None
    label_noise: float = 0.0
    imbalance: float = 1.0
    rng_seed: int = 0
    latent_noise: float = 1.0
    clf_gain: float = 4.0
    strong_view_gain: float = 0.7

    def validate(self):
        if self.N < 1 or self.C < 2 or self.d < 1:
            raise InvalidConfig("need N >= 1, C >= 2, d >= 1")
        if self.M < self.C:
            raise InvalidConfig("M=%d labeled samples cannot cover C=%d classes" % (self.M, self.C))
        if not 0.0 <= self.label_noise < 1.0:
            raise InvalidConfig("label_noise must lie in [0, 1)")
        if self.imbalance < 1.0:
            raise InvalidConfig("imbalance must be >= 1")
        scales = (self.class_sep, self.sep_growth, self.view_noise, self.latent_noise,
                  self.clf_gain, self.strong_view_gain)
        if min(scales) < 0:
            raise InvalidConfig("scale parameters must be >= 0")
        if self.classifier_bias is not None:
            if len(self.classifier_bias) != self.C or min(self.classifier_bias) <= 0:
                raise InvalidConfig("classifier_bias needs C positive entries")
        return self

    def bias(self):
        if self.classifier_bias is None:
            return np.ones(self.C)
        return np.asarray(self.classifier_bias, dtype=np.float64)

    def separation(self, epoch):
        return self.class_sep + self.sep_growth * epoch

    def to_dict(self):
        return asdict(self)


class Batch(NamedTuple):
    idx: np.ndarray         # unlabeled sample ids
    q_weak: np.ndarray
    q_strong: np.ndarray
    p_weak: np.ndarray
    p_strong: np.ndarray
    ground_truth: np.ndarray
    lab_idx: np.ndarray     # labeled sample ids
    q_lab: np.ndarray
    p_lab: np.ndarray
    y_lab: np.ndarray


def class_weights(C, imbalance):
    """Geometric class frequencies with max/min ratio ``imbalance``."""
    w = imbalance ** (-np.arange(C) / (C - 1))
    return w / w.sum()


class World:
    def __init__(self, cfg):
        self.cfg = cfg.validate()
        C, d = cfg.C, cfg.d
        rng = np.random.default_rng([cfg.rng_seed, 0])
        self.means = l2_normalize(rng.standard_normal((C, d)))
        self.y = rng.choice(C, size=cfg.N, p=class_weights(C, cfg.imbalance))
        self.offset = rng.standard_normal((cfg.N, d)) * (cfg.latent_noise / np.sqrt(d))
        self.y_lab = np.arange(cfg.M) % C
        self.offset_lab = rng.standard_normal((cfg.M, d)) * (cfg.latent_noise / np.sqrt(d))
        # persistent wrong beliefs of the classifier
        self.belief = self.y.copy()
        flip = rng.random(cfg.N) < cfg.label_noise
        self.belief[flip] = (self.y[flip] + rng.integers(1, C, size=flip.sum())) % C
        self.noisy = flip

    def _rng(self, epoch):
        return np.random.default_rng([self.cfg.rng_seed, 1, epoch])

    def _views(self, rng, y, offset, epoch):
        cfg = self.cfg
        latent = cfg.separation(epoch) * self.means[y] + offset
        scale = cfg.view_noise / np.sqrt(cfg.d)
        qw = l2_normalize(latent + scale * rng.standard_normal(latent.shape))
        qs = l2_normalize(latent + scale * rng.standard_normal(latent.shape))
        return qw, qs

    def _predict(self, rng, belief, kappa):
        C = self.cfg.C
        logits = kappa * (np.arange(C) == belief[:, None]) + rng.gumbel(size=(len(belief), C))
        logits += np.log(self.cfg.bias())
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        return p / p.sum(axis=1, keepdims=True)

    def clean_accuracy(self, epoch):
        """Top-1 accuracy of the unbiased classifier on non-flipped samples."""
        k = self.cfg.clf_gain * self.cfg.separation(epoch)
        return 1.0 / (1.0 + (self.cfg.C - 1) * np.exp(-k))

    def labeled_projections(self, epoch=0):
        qw, _ = self._views(self._rng(epoch), self.y_lab, self.offset_lab, epoch)
        return qw, self.y_lab.copy()

    def generate_epoch_stream(self, epoch, B=64, mu=7):
        """All batches of one epoch: ``mu * B`` unlabeled and ``B`` labeled per batch.

        Deterministic in (rng_seed, epoch).  The final unlabeled batch may be
        short; labeled samples are cycled in a fresh permutation.
        """
        cfg = self.cfg
        rng = self._rng(epoch)
        kappa = cfg.clf_gain * cfg.separation(epoch)
        qw, qs = self._views(rng, self.y, self.offset, epoch)
        pw = self._predict(rng, self.belief, kappa)
        ps = self._predict(rng, self.belief, cfg.strong_view_gain * kappa)
        qx, _ = self._views(rng, self.y_lab, self.offset_lab, epoch)
        px = self._predict(rng, self.y_lab, kappa)
        order = rng.permutation(cfg.N)
        n_batches = -(-cfg.N // (mu * B))
        lab_order = np.concatenate([rng.permutation(cfg.M) for _ in range(-(-n_batches * B // cfg.M))])
        batches = []
        for b in range(n_batches):
            idx = order[b * mu * B:(b + 1) * mu * B]
            li = lab_order[b * B:(b + 1) * B]
            batches.append(Batch(idx, qw[idx], qs[idx], pw[idx], ps[idx], self.y[idx],
                                 li, qx[li], px[li], self.y_lab[li]))
        return batches


class Purity(NamedTuple):
    per_class: np.ndarray
    never_dominant: np.ndarray


def purity_report(banks, ground_truth, C, head=0, K=None):
    """Average dominant-class share of the clusters each class dominates.

    Classes that dominate no cluster get purity 0 and ``never_dominant`` set.
    """
    k = banks.cluster_of[:, head]
    m = k >= 0
    if K is None:
        K = int(k[m].max()) + 1 if m.any() else 0
    counts = np.zeros((K, C), dtype=np.int64)
    np.add.at(counts, (k[m], np.asarray(ground_truth)[m]), 1)
    size = counts.sum(axis=1)
    live = size > 0
    dom = np.argmax(counts[live], axis=1)
    share = counts[live].max(axis=1) / size[live]
    total = np.bincount(dom, weights=share, minlength=C)
    n = np.bincount(dom, minlength=C)
    purity = np.where(n > 0, total / np.maximum(n, 1), 0.0)
    return Purity(purity, n == 0)


def biased_world_preset(rng_seed=0, **overrides):
    """CIFAR-sized world: C=10, class 0 over-predicted 2x, 10% persistent label noise."""
    kw = dict(N=50000, M=40, C=10, d=64, class_sep=0.5, sep_growth=0.03,
              view_noise=0.3, classifier_bias=[2.0] + [1.0] * 9, label_noise=0.1,
              rng_seed=rng_seed)
    kw.update(overrides)
    return WorldConfig(**kw)


def gaussian_blobs(n_per_blob, n_blobs, d, sigma_frac=0.1, rng_seed=0):
    """Spherical Gaussian blobs on orthogonal means, projected to the unit sphere.

    Means are scaled standard basis vectors one unit apart; the per-coordinate
    standard deviation is ``sigma_frac`` times that distance.  Returns
    (projections, blob labels) in blob-major order.
    """
    if n_blobs > d:
        raise InvalidConfig("need d >= n_blobs for orthogonal means")
    rng = np.random.default_rng(rng_seed)
    means = np.eye(d)[:n_blobs] / np.sqrt(2.0)
    y = np.repeat(np.arange(n_blobs), n_per_blob)
    x = means[y] + sigma_frac * rng.standard_normal((len(y), d))
    return l2_normalize(x), y
