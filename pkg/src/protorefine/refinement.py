"""Distribution alignment and cluster-based pseudo-label refinement."""
from dataclasses import dataclass

import numpy as np


@dataclass
class RunningMarginal:
    """Exponential moving average of classifier predictions, starting uniform."""
    p_bar: np.ndarray
    momentum: float = 0.99
    warm: bool = False

    @classmethod
    def uniform(cls, C, momentum=0.99):
        if not 0 < momentum < 1:
            raise ValueError("momentum must lie in (0, 1)")
        return cls(np.full(C, 1.0 / C), momentum)

    def update(self, p):
        """Fold in a prediction, or the mean of a batch of predictions."""
        p = np.asarray(p, dtype=np.float64)
        if p.ndim == 2:
            p = p.mean(axis=0)
        self.p_bar = self.momentum * self.p_bar + (1.0 - self.momentum) * p
        self.warm = True


def align(p, p_bar):
    """Divide by the marginal and renormalize; no state change."""
    q = np.asarray(p, dtype=np.float64) / p_bar
    return q / q.sum(axis=-1, keepdims=True)


def distribution_align(p, rm):
    """Align ``p`` against the running marginal, then update the marginal with ``p``.

    A 2-D ``p`` is aligned row-wise against the same marginal and the
    marginal then absorbs the batch mean.
    """
    out = align(p, rm.p_bar)
    rm.update(p)
    return out


def head_mean_cluster_label(tables, assignments):
    """Average the valid table rows selected by per-head cluster indices.

    ``assignments`` is an int array of shape (B, H) (or (H,) for one sample),
    with -1 for "no cluster".  Returns (z, has_z) where rows without any valid
    head are zero and flagged False.
    """
    a = np.asarray(assignments, dtype=np.int64)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    C = tables[0].C
    acc = np.zeros((a.shape[0], C))
    n = np.zeros(a.shape[0])
    for h, t in enumerate(tables):
        k = a[:, h]
        ok = k >= 0
        ok[ok] = t.valid[k[ok]]
        acc[ok] += t.z[k[ok]]
        n += ok
    has = n > 0
    acc[has] /= n[has, None]
    if single:
        return acc[0], bool(has[0])
    return acc, has


def refine(p_aligned, tables, assignments, alpha):
    """alpha * DA(p) + (1 - alpha) * z, with the head-averaged cluster label z.

    Samples with no valid cluster row (no tables yet, unassigned, or only
    empty clusters) keep ``p_aligned`` unchanged.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    p_aligned = np.asarray(p_aligned, dtype=np.float64)
    if not tables:
        return p_aligned.copy()
    z, has = head_mean_cluster_label(tables, assignments)
    out = p_aligned.copy()
    if p_aligned.ndim == 1:
        return alpha * p_aligned + (1.0 - alpha) * z if has else out
    out[has] = alpha * p_aligned[has] + (1.0 - alpha) * z[has]
    return out


def reliability(p_hat, tau):
    return np.asarray(p_hat).max(axis=-1) >= tau


def disagreement_rate(p_aligned, z, has_z):
    """Fraction of samples with a cluster label whose argmax differs from the classifier's."""
    has_z = np.asarray(has_z, dtype=bool)
    if not has_z.any():
        return 0.0
    a = np.argmax(p_aligned[has_z], axis=1)
    b = np.argmax(z[has_z], axis=1)
    return float(np.mean(a != b))
