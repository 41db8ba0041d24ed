"""Online mini-batch K-means with a lower bound on cluster sizes.

The size constraint is enforced softly through one dual variable per
cluster: a sample goes to ``argmax_k q.c_k + rho_k`` and after each batch
the duals move against the deviation of each cluster's batch share from
``gamma / N``.  Centroids are normalized means of the projections assigned
to them during the current epoch, refreshed after every batch while in
warmup and only at epoch end afterwards.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, NamedTuple

import numpy as np

from .errors import DimensionMismatch, HeterogeneousHeads, TooFewSeeds
from .vecmath import ZERO_NORM

DEFAULT_WARMUP_EPOCHS = 20
# Preset for many-class problems.
LARGE_C_WARMUP_EPOCHS = 70


class Mode(str, Enum):
    WARMUP = "warmup"
    EPOCH_UPDATE = "epoch_update"


class Assignments(NamedTuple):
    """Batch assignment: cluster index and raw similarity q.c per sample."""
    cluster: np.ndarray
    similarity: np.ndarray


@dataclass
class ClusterState:
    centroids: np.ndarray
    duals: np.ndarray
    sum_acc: np.ndarray
    count_acc: np.ndarray
    m_seen: int = 0
    mode: Mode = Mode.WARMUP
    epoch: int = 0

    @property
    def K(self):
        return self.centroids.shape[0]

    @property
    def d(self):
        return self.centroids.shape[1]

    def assign_batch(self, batch):
        """Closed-form assignment under the current duals.

        Ties go to the lowest cluster index (``np.argmax`` semantics).  The
        recorded similarity is the plain dot product, without the dual.
        """
        batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
        if batch.shape[1] != self.d:
            raise DimensionMismatch("batch dim %d, centroid dim %d" % (batch.shape[1], self.d))
        # einsum keeps identical centroid rows bit-identical; BLAS matmul may not
        sims = np.einsum("bd,kd->bk", batch, self.centroids)
        cluster = np.argmax(sims + self.duals, axis=1)
        return Assignments(cluster, sims[np.arange(len(batch)), cluster])

    def update_duals(self, assignments, gamma, N, lam):
        B = len(assignments.cluster)
        if B < 1 or N < 1 or lam <= 0:
            raise ValueError("update_duals needs B >= 1, N >= 1, lambda > 0")
        share = np.bincount(assignments.cluster, minlength=self.K) / B
        self.duals = np.maximum(0.0, self.duals - lam * (share - gamma / N))

    def accumulate_and_update_centroids(self, batch, assignments):
        batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
        np.add.at(self.sum_acc, assignments.cluster, batch)
        self.count_acc += np.bincount(assignments.cluster, minlength=self.K)
        self.m_seen += len(batch)
        if self.mode is Mode.WARMUP:
            self._recompute_centroids()

    def end_epoch(self, warmup_epochs_done):
        self._recompute_centroids()
        self.sum_acc[:] = 0.0
        self.count_acc[:] = 0
        self.m_seen = 0
        self.epoch += 1
        if warmup_epochs_done:
            self.mode = Mode.EPOCH_UPDATE

    def _recompute_centroids(self):
        # mean direction == direction of the sum; counts only gate emptiness
        norms = np.linalg.norm(self.sum_acc, axis=1)
        ok = (self.count_acc > 0) & (norms / np.maximum(self.count_acc, 1) >= ZERO_NORM)
        self.centroids[ok] = self.sum_acc[ok] / norms[ok, None]

    def to_dict(self):
        return {
            "K": int(self.K),
            "d": int(self.d),
            "centroids": self.centroids.ravel().tolist(),
            "duals": self.duals.tolist(),
            "mode": self.mode.value,
            "epoch": int(self.epoch),
            "sum_acc": self.sum_acc.ravel().tolist(),
            "count_acc": self.count_acc.tolist(),
            "m_seen": int(self.m_seen),
        }

    @classmethod
    def from_dict(cls, data):
        K, d = data["K"], data["d"]
        sum_acc = data.get("sum_acc")
        return cls(
            centroids=np.asarray(data["centroids"], dtype=np.float64).reshape(K, d),
            duals=np.asarray(data["duals"], dtype=np.float64),
            sum_acc=(np.zeros((K, d)) if sum_acc is None
                     else np.asarray(sum_acc, dtype=np.float64).reshape(K, d)),
            count_acc=np.asarray(data.get("count_acc", [0] * K), dtype=np.int64),
            m_seen=int(data.get("m_seen", 0)),
            mode=Mode(data["mode"]),
            epoch=int(data["epoch"]),
        )


def init_clusters(K, gamma, seed_projections, rng_seed):
    """Pick K of the seed projections as initial centroids, without replacement.

    ``gamma`` is accepted for interface symmetry; the bound is applied per
    batch through :meth:`ClusterState.update_duals`.
    """
    seeds = np.atleast_2d(np.asarray(seed_projections, dtype=np.float64))
    if K < 2:
        raise ValueError("K must be >= 2")
    # distinct rows, kept in stream order
    distinct = np.sort(np.unique(seeds, axis=0, return_index=True)[1])
    if len(distinct) < K:
        raise TooFewSeeds("need %d distinct seed projections, got %d" % (K, len(distinct)))
    rng = np.random.default_rng(rng_seed)
    pick = distinct[rng.choice(len(distinct), size=K, replace=False)]
    d = seeds.shape[1]
    return ClusterState(
        centroids=seeds[pick].copy(),
        duals=np.zeros(K),
        sum_acc=np.zeros((K, d)),
        count_acc=np.zeros(K, dtype=np.int64),
    )


@dataclass
class MultiHeadState:
    """Independent clustering heads fed the same stream."""
    heads: List[ClusterState] = field(default_factory=list)

    def __post_init__(self):
        if not self.heads:
            raise HeterogeneousHeads("at least one head is required")
        shapes = {h.centroids.shape for h in self.heads}
        if len(shapes) != 1:
            raise HeterogeneousHeads("heads disagree on (K, d): %s" % sorted(shapes))

    def __len__(self):
        return len(self.heads)

    def __getitem__(self, h):
        return self.heads[h]

    @property
    def K(self):
        return self.heads[0].K

    def assign_batch(self, batch):
        return [h.assign_batch(batch) for h in self.heads]

    def update_duals(self, assignments, gamma, N, lam):
        for h, a in zip(self.heads, assignments):
            h.update_duals(a, gamma, N, lam)

    def accumulate_and_update_centroids(self, batch, assignments):
        for h, a in zip(self.heads, assignments):
            h.accumulate_and_update_centroids(batch, a)

    def end_epoch(self, warmup_epochs_done):
        for h in self.heads:
            h.end_epoch(warmup_epochs_done)

    def to_dict(self):
        return {"heads": [h.to_dict() for h in self.heads]}

    @classmethod
    def from_dict(cls, data):
        return cls([ClusterState.from_dict(h) for h in data["heads"]])


def multi_head_wrap(heads):
    return MultiHeadState(list(heads))


def cluster_stream(state, data, epochs, batch_size, gamma, lam, warmup_epochs=DEFAULT_WARMUP_EPOCHS,
                   rng_seed=0):
    """Stream a fixed dataset through ``state`` for several epochs.

    Each epoch visits ``data`` in a fresh permutation (seeded by
    ``(rng_seed, epoch)``).  Returns the per-epoch assignment arrays, indexed by
    sample id.
    """
    data = np.asarray(data, dtype=np.float64)
    N = len(data)
    history = []
    for e in range(epochs):
        order = np.random.default_rng([rng_seed, e]).permutation(N)
        assigned = np.full(N, -1, dtype=np.int64)
        for s in range(0, N, batch_size):
            idx = order[s:s + batch_size]
            a = state.assign_batch(data[idx])
            assigned[idx] = a.cluster
            state.update_duals(a, gamma, N, lam)
            state.accumulate_and_update_centroids(data[idx], a)
        state.end_epoch(e + 1 >= warmup_epochs)
        history.append(assigned)
    return history
