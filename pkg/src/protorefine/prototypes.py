"""Class prototypes accumulated over an epoch and the prototypical loss."""
import numpy as np

from .errors import IndexOutOfRange, UninitializedPrototypes
from .vecmath import ZERO_NORM, cross_entropy, one_hot, tempered_softmax


class PrototypeSet:
    """Normalized per-class mean projections of labeled and reliable unlabeled samples.

    Contributions are summed in arrival order, so a fixed stream gives
    bit-identical prototypes.  Set ``keep_log=True`` to record every
    ``(class, projection)`` pair accumulated in the current epoch; the log of
    the last finalized epoch stays available as ``last_log``.
    """

    def __init__(self, C, d, keep_log=False):
        self.C, self.d = int(C), int(d)
        self.protos = np.zeros((self.C, self.d))
        self.sum_acc = np.zeros((self.C, self.d))
        self.count_acc = np.zeros(self.C, dtype=np.int64)
        self.initialized = np.zeros(self.C, dtype=bool)
        self.keep_log = keep_log
        self.log = []
        self.last_log = []

    def _check(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=np.int64))
        if y.size and (y.min() < 0 or y.max() >= self.C):
            raise IndexOutOfRange("class index out of [0, %d)" % self.C)
        return y

    def accumulate_labeled(self, q, y):
        q = np.atleast_2d(np.asarray(q, dtype=np.float64))
        y = self._check(y)
        np.add.at(self.sum_acc, y, q)
        self.count_acc += np.bincount(y, minlength=self.C)
        if self.keep_log:
            self.log.extend(zip(y.tolist(), q.copy()))

    def accumulate_unlabeled(self, q, y_hat, eta):
        """Same as :meth:`accumulate_labeled` restricted to rows with ``eta`` set."""
        q = np.atleast_2d(np.asarray(q, dtype=np.float64))
        y_hat = self._check(y_hat)
        eta = np.atleast_1d(np.asarray(eta, dtype=bool))
        self.accumulate_labeled(q[eta], y_hat[eta])

    def finalize_epoch(self):
        norms = np.linalg.norm(self.sum_acc, axis=1)
        ok = (self.count_acc > 0) & (norms / np.maximum(self.count_acc, 1) >= ZERO_NORM)
        self.protos[ok] = self.sum_acc[ok] / norms[ok, None]
        self.initialized |= ok
        self.sum_acc[:] = 0.0
        self.count_acc[:] = 0
        self.last_log, self.log = self.log, []

    def init_from_labeled(self, q, y):
        """First-epoch prototypes from labeled projections only; every class needs one."""
        y = self._check(y)
        missing = np.setdiff1d(np.arange(self.C), y)
        if missing.size:
            raise UninitializedPrototypes("no labeled sample for classes %s" % missing.tolist())
        self.accumulate_labeled(q, y)
        self.finalize_epoch()

    def proto_logits(self, q):
        return np.atleast_2d(q) @ self.protos.T

    def proto_loss(self, q_strong, y_hat, T):
        """Mean of -log softmax(q.P / T)[y_hat] over the batch."""
        if not self.initialized.all():
            raise UninitializedPrototypes("classes %s have no prototype"
                                          % np.flatnonzero(~self.initialized).tolist())
        y_hat = self._check(y_hat)
        if len(y_hat) == 0:
            return 0.0
        logits = self.proto_logits(q_strong) / T
        m = logits.max(axis=1, keepdims=True)
        log_norm = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
        return float(np.mean(log_norm - logits[np.arange(len(y_hat)), y_hat]))

    def proto_loss_composed(self, q_strong, y_hat, T):
        """The same loss written as CE(one_hot, tempered softmax); used as a cross-check."""
        y_hat = self._check(y_hat)
        p = tempered_softmax(self.proto_logits(q_strong), T)
        return float(np.mean(cross_entropy(one_hot(y_hat, self.C), p)))

    def prototypical_scores(self, q, y_hat):
        """q . P_{y_hat}: how close each projection sits to its class prototype."""
        y_hat = self._check(y_hat)
        return (np.atleast_2d(q) * self.protos[y_hat]).sum(axis=1)

    def dump_csv(self, path):
        np.savetxt(path, self.protos, delimiter=",", fmt="%.17g")
