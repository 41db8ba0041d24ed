"""Vector and distribution primitives.

Unit vectors and probability distributions are plain float64 numpy arrays;
every function here operates along the last axis so batches (2-D arrays)
are handled row-wise.
"""
import numpy as np

from .errors import DimensionMismatch, NonPositiveTemperature, ZeroVector

ZERO_NORM = 1e-12
LOG_EPS = 1e-12


def l2_normalize(v):
    """Scale ``v`` (or each row of ``v``) to unit euclidean norm."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm < ZERO_NORM):
        raise ZeroVector("cannot normalize a vector with norm < %g" % ZERO_NORM)
    return v / norm


def tempered_softmax(scores, T):
    """softmax(scores / T) with max-subtraction."""
    if not T > 0:
        raise NonPositiveTemperature("temperature must be > 0, got %r" % (T,))
    z = np.asarray(scores, dtype=np.float64) / T
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(target, pred):
    """-sum_c target_c * log(pred_c + 1e-12), row-wise for 2-D input."""
    target = np.asarray(target, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if target.shape != pred.shape:
        raise DimensionMismatch("target %s vs pred %s" % (target.shape, pred.shape))
    return -(target * np.log(pred + LOG_EPS)).sum(axis=-1)


def entropy(p):
    return cross_entropy(p, p)


def dot(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatch("dimension %d vs %d" % (a.shape[-1], b.shape[-1]))
    return (a * b).sum(axis=-1)


def one_hot(labels, C):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros(labels.shape + (C,))
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out
