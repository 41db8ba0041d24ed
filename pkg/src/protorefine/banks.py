"""Per-sample memory banks and the cluster pseudo-label table.

Per unlabeled sample we keep the hard pseudo-label, the reliability bit and,
per clustering head, the cluster assignment and its similarity score.  No
embedding is ever stored.  Hard labels and reliability bits are
single-buffered (refinement reads a sample's previous-epoch assignment
before the current epoch overwrites it); cluster tables are
double-buffered through :class:`TableBuffer`.
"""
import csv
from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange

SIM_FLOOR = 1e-6
NO_CLUSTER = -1


def footprint_slots(N, H, K, C):
    return 4 * N * max(H, 1) + K * C


def naive_footprint_slots(N, d):
    """Slots an offline approach needs to hold one epoch of embeddings."""
    return N * d


@dataclass
class ClusterLabelTable:
    z: np.ndarray       # (K, C)
    valid: np.ndarray   # (K,) bool

    @property
    def K(self):
        return self.z.shape[0]

    @property
    def C(self):
        return self.z.shape[1]

    def dump_csv(self, path):
        np.savetxt(path, self.z, delimiter=",", fmt="%.17g")

    @classmethod
    def load_csv(cls, path, valid=None):
        z = np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))
        if valid is None:
            # invalid rows are written as the uniform placeholder
            valid = ~np.all(z == 1.0 / z.shape[1], axis=1)
        return cls(z, np.asarray(valid, dtype=bool))


class SampleBanks:
    def __init__(self, N, H=1):
        self.N = int(N)
        self.H = int(H)
        self.hard_label = np.full(self.N, -1, dtype=np.int64)
        self.reliable = np.zeros(self.N, dtype=bool)
        self.cluster_of = np.full((self.N, self.H), NO_CLUSTER, dtype=np.int64)
        self.sim_score = np.full((self.N, self.H), np.nan)
        self.epoch_stamp = np.full(self.N, -1, dtype=np.int64)
        self.epoch = 0

    @property
    def slots(self):
        """Scalar slots accounted to the banks (labels, flags, clusters, scores)."""
        return 4 * self.N * max(self.H, 1)

    def _check(self, i, head=0):
        i = np.asarray(i)
        if i.size and (i.min() < 0 or i.max() >= self.N):
            raise IndexOutOfRange("sample index out of [0, %d)" % self.N)
        if not 0 <= head < self.H:
            raise IndexOutOfRange("head %d out of [0, %d)" % (head, self.H))
        return i

    def record_prediction(self, i, refined, tau):
        """Store argmax and the ``max >= tau`` bit; ``i`` may be an index array."""
        if not 0 < tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        i = self._check(i)
        refined = np.asarray(refined, dtype=np.float64)
        self.hard_label[i] = np.argmax(refined, axis=-1)
        self.reliable[i] = refined.max(axis=-1) >= tau
        self.epoch_stamp[i] = self.epoch

    def record_assignment(self, i, head, cluster, similarity):
        i = self._check(i, head)
        self.cluster_of[i, head] = cluster
        self.sim_score[i, head] = similarity

    def assignment(self, i, head=0):
        """(cluster, similarity) for sample ``i``, or None if never assigned."""
        self._check(i, head)
        k = self.cluster_of[i, head]
        if k == NO_CLUSTER:
            return None
        return int(k), float(self.sim_score[i, head])

    def build_cluster_labels(self, head, K, C, sim_floor=SIM_FLOOR):
        """Similarity-weighted hard-label histogram of each cluster's members."""
        self._check(0, head)
        k = self.cluster_of[:, head]
        y = self.hard_label
        m = (k != NO_CLUSTER) & (y >= 0)
        w = np.maximum(self.sim_score[m, head], sim_floor)
        mass = np.bincount(k[m] * C + y[m], weights=w, minlength=K * C).reshape(K, C)
        members = np.bincount(k[m], minlength=K)
        valid = members > 0
        z = np.full((K, C), 1.0 / C)
        z[valid] = mass[valid] / mass[valid].sum(axis=1, keepdims=True)
        return ClusterLabelTable(z, valid)

    def end_epoch(self):
        self.epoch += 1

    def dump_csv(self, path):
        header = ["sample_id", "hard_label", "reliable"]
        header += ["cluster_of_%d" % h for h in range(self.H)]
        header += ["sim_score_%d" % h for h in range(self.H)]
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            for i in range(self.N):
                row = [i, int(self.hard_label[i]), int(self.reliable[i])]
                row += ["" if k == NO_CLUSTER else int(k) for k in self.cluster_of[i]]
                row += ["" if np.isnan(s) else repr(float(s)) for s in self.sim_score[i]]
                w.writerow(row)

    @classmethod
    def load_csv(cls, path):
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        header, rows = rows[0], rows[1:]
        H = sum(1 for h in header if h.startswith("cluster_of_"))
        banks = cls(len(rows), H)
        for r in rows:
            i = int(r[0])
            banks.hard_label[i] = int(r[1])
            banks.reliable[i] = bool(int(r[2]))
            for h in range(H):
                k, s = r[3 + h], r[3 + H + h]
                if k != "":
                    banks.cluster_of[i, h] = int(k)
                    banks.sim_score[i, h] = float(s)
        return banks


def footprint(banks, table):
    return footprint_slots(banks.N, banks.H, table.K, table.C)


class TableBuffer:
    """Previous-epoch tables (read) and the tables being built (written)."""

    def __init__(self):
        self.previous = None
        self.current = None

    def stage(self, tables):
        self.current = list(tables)

    def swap(self):
        self.previous, self.current = self.current, None
