"""Forward values of the four training losses and their weighted sum."""
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch
from .vecmath import cross_entropy, tempered_softmax


@dataclass
class LossWeights:
    lambda_u: float = 1.0
    lambda_p: float = 1.0
    lambda_c: float = 1.0


def _same_length(*arrays):
    n = {len(a) for a in arrays}
    if len(n) != 1:
        raise LengthMismatch("length mismatch: %s" % [len(a) for a in arrays])


def unlabeled_loss(p_hat, p_strong, eta):
    """Soft-target CE on reliable samples, averaged over the whole batch."""
    p_hat, p_strong = np.atleast_2d(p_hat), np.atleast_2d(p_strong)
    eta = np.atleast_1d(np.asarray(eta, dtype=np.float64))
    _same_length(p_hat, p_strong, eta)
    return float(np.mean(eta * cross_entropy(p_hat, p_strong)))


def supervised_loss(y, p_x):
    y, p_x = np.atleast_2d(y), np.atleast_2d(p_x)
    _same_length(y, p_x)
    return float(np.mean(cross_entropy(y, p_x)))


def self_supervised_loss(q_weak, q_strong, eta, T, target_temp_mult=5.0):
    """View consistency on unreliable samples, projections read as d-way scores.

    Target: softmax(q_weak / (target_temp_mult * T)); source: softmax(q_strong / T).
    """
    q_weak, q_strong = np.atleast_2d(q_weak), np.atleast_2d(q_strong)
    eta = np.atleast_1d(np.asarray(eta, dtype=np.float64))
    _same_length(q_weak, q_strong, eta)
    if target_temp_mult <= 0:
        raise ValueError("target_temp_mult must be > 0")
    target = tempered_softmax(q_weak, target_temp_mult * T)
    source = tempered_softmax(q_strong, T)
    return float(np.mean((1.0 - eta) * cross_entropy(target, source)))


def total_loss(lx, lu, lp, lc, w=None):
    w = w or LossWeights()
    return lx + w.lambda_u * lu + w.lambda_p * lp + w.lambda_c * lc


class LossMeter:
    """Per-epoch running means of the loss components plus gate counters.

    ``n_gated_u`` / ``n_gated_c`` count the samples that contributed to the
    unlabeled and consistency terms; together they must cover every
    unlabeled sample exactly once.
    """

    def __init__(self):
        self.sums = np.zeros(4)
        self.batches = 0
        self.n_unlabeled = 0
        self.n_gated_u = 0
        self.n_gated_c = 0

    def add(self, lx, lu, lp, lc, eta):
        eta = np.asarray(eta, dtype=bool)
        self.sums += (lx, lu, lp, lc)
        self.batches += 1
        self.n_unlabeled += eta.size
        self.n_gated_u += int(eta.sum())
        self.n_gated_c += int((~eta).sum())

    def means(self):
        if self.batches == 0:
            return [0.0] * 4
        return (self.sums / self.batches).tolist()
