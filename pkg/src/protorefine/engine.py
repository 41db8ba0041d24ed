"""One epoch of pseudo-label refinement, batch by batch.

Per batch: classifier predictions are distribution-aligned, mixed with the
previous epoch's cluster pseudo-label of each sample's previous cluster,
gated by confidence and written to the banks; the weak projections are then
clustered (assign, dual step, centroid accumulation).  At epoch end the
prototypes are finalized, cluster tables are rebuilt from the banks and
swapped in for the next epoch, and the clustering heads close the epoch.
"""
import json
from dataclasses import asdict, dataclass
from typing import List

import numpy as np

from .banks import SampleBanks, TableBuffer
from .kmeans import DEFAULT_WARMUP_EPOCHS, init_clusters, multi_head_wrap
from .losses import (LossMeter, LossWeights, self_supervised_loss, supervised_loss,
                     unlabeled_loss)
from .prototypes import PrototypeSet
from .refinement import (RunningMarginal, align, disagreement_rate,
                         head_mean_cluster_label, refine)
from .simulator import purity_report
from .vecmath import one_hot


@dataclass
class EngineConfig:
    N: int
    C: int
    d: int
    K: int
    gamma: float
    lambda_dual: float = 20.0
    alpha: float = 0.8
    tau: float = 0.95
    T: float = 0.1
    target_temp_mult: float = 5.0
    H: int = 1
    warmup_epochs: int = DEFAULT_WARMUP_EPOCHS
    da_momentum: float = 0.99
    seed: int = 0


@dataclass
class EpochReport:
    epoch: int
    pl_acc_classifier: float
    pl_acc_cluster: float
    pl_acc_refined: float
    disagreement_rate: float
    retention_rate: float
    retention_rate_unrefined: float
    cluster_purity_per_class: List[float]
    purity_never_dominant: List[bool]
    min_cluster_size: int
    loss_components: List[float]
    n_recorded: int
    K: int

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


class Engine:
    def __init__(self, cfg, weights=None):
        self.cfg = cfg
        self.weights = weights or LossWeights()
        self.banks = SampleBanks(cfg.N, cfg.H)
        self.protos = PrototypeSet(cfg.C, cfg.d)
        self.tables = TableBuffer()
        self.marginal = RunningMarginal.uniform(cfg.C, cfg.da_momentum)
        self.clusters = None
        self.epoch = 0

    def initialize(self, seed_projections, labeled_q, labeled_y):
        cfg = self.cfg
        heads = [init_clusters(cfg.K, cfg.gamma, seed_projections, cfg.seed + h)
                 for h in range(cfg.H)]
        self.clusters = multi_head_wrap(heads)
        self.protos.init_from_labeled(labeled_q, labeled_y)

    def run_epoch(self, batches, ground_truth=None):
        """Process one epoch of batches; returns an EpochReport when ground truth is given.

        ``ground_truth`` is the full length-N label array, only used for the
        report.
        """
        cfg = self.cfg
        prev = self.tables.previous or []
        meter = LossMeter()
        seen = np.zeros(cfg.N, dtype=np.int64)
        hits = np.zeros(3)          # classifier, cluster, refined
        n_with_z = 0
        disagree = 0.0
        kept = np.zeros(2)          # refined, unrefined
        for b in batches:
            idx = b.idx
            p_al = align(b.p_weak, self.marginal.p_bar)
            self.marginal.update(b.p_weak)
            prev_clusters = self.banks.cluster_of[idx]
            p_hat = refine(p_al, prev, prev_clusters, cfg.alpha)
            self.banks.record_prediction(idx, p_hat, cfg.tau)
            y_hat = self.banks.hard_label[idx]
            eta = self.banks.reliable[idx]
            self.protos.accumulate_labeled(b.q_lab, b.y_lab)
            self.protos.accumulate_unlabeled(b.q_weak, y_hat, eta)

            assigned = self.clusters.assign_batch(b.q_weak)
            for h, a in enumerate(assigned):
                self.banks.record_assignment(idx, h, a.cluster, a.similarity)
            self.clusters.update_duals(assigned, cfg.gamma, cfg.N, cfg.lambda_dual)
            self.clusters.accumulate_and_update_centroids(b.q_weak, assigned)

            lx = supervised_loss(one_hot(b.y_lab, cfg.C), b.p_lab)
            lu = unlabeled_loss(p_hat, b.p_strong, eta)
            lp = self.protos.proto_loss(b.q_strong, y_hat, cfg.T)
            lc = self_supervised_loss(b.q_weak, b.q_strong, eta, cfg.T, cfg.target_temp_mult)
            meter.add(lx, lu, lp, lc, eta)
            seen[idx] += 1

            if ground_truth is not None:
                gt = b.ground_truth
                hits[0] += np.sum(np.argmax(p_al, axis=1) == gt)
                hits[2] += np.sum(np.argmax(p_hat, axis=1) == gt)
                if prev:
                    z, has = head_mean_cluster_label(prev, prev_clusters)
                    hits[1] += np.sum(np.argmax(z[has], axis=1) == gt[has])
                    n_with_z += int(has.sum())
                    disagree += disagreement_rate(p_al, z, has) * has.sum()
                kept += (eta.sum(), np.sum(p_al.max(axis=1) >= cfg.tau))

        sizes = self.clusters[0].count_acc.copy()
        self.protos.finalize_epoch()
        self.tables.stage(self.banks.build_cluster_labels(h, cfg.K, cfg.C)
                          for h in range(cfg.H))
        self.tables.swap()
        self.banks.end_epoch()
        self.clusters.end_epoch(self.epoch + 1 >= cfg.warmup_epochs)
        self.last_seen = seen
        self.last_meter = meter
        self.last_cluster_sizes = sizes
        epoch, self.epoch = self.epoch, self.epoch + 1
        if ground_truth is None:
            return None

        n = int(seen.sum())
        purity = purity_report(self.banks, ground_truth, cfg.C, K=cfg.K)
        return EpochReport(
            epoch=epoch,
            pl_acc_classifier=float(hits[0] / n),
            pl_acc_cluster=float(hits[1] / n_with_z) if n_with_z else 0.0,
            pl_acc_refined=float(hits[2] / n),
            disagreement_rate=float(disagree / n_with_z) if n_with_z else 0.0,
            retention_rate=float(kept[0] / n),
            retention_rate_unrefined=float(kept[1] / n),
            cluster_purity_per_class=purity.per_class.tolist(),
            purity_never_dominant=purity.never_dominant.tolist(),
            min_cluster_size=int(sizes.min()),
            loss_components=meter.means(),
            n_recorded=n,
            K=cfg.K,
        )


def start(world, cfg, B=64, mu=7, weights=None):
    """Build an engine seeded from the world's epoch-0 stream."""
    engine = Engine(cfg, weights)
    batches = world.generate_epoch_stream(0, B, mu)
    seeds, i = [], 0
    while sum(len(s) for s in seeds) < cfg.K and i < len(batches):
        seeds.append(batches[i].q_weak)
        i += 1
    q_lab, y_lab = world.labeled_projections(0)
    engine.initialize(np.concatenate(seeds), q_lab, y_lab)
    return engine, batches


class Simulation:
    """A world and an engine advanced together, one epoch per call."""

    def __init__(self, world, cfg, B=64, mu=7, weights=None):
        self.world, self.B, self.mu = world, B, mu
        self.engine, self._first = start(world, cfg, B, mu, weights)

    def step(self):
        e = self.engine.epoch
        batches = self._first if e == 0 else self.world.generate_epoch_stream(e, self.B, self.mu)
        self._first = None
        return self.engine.run_epoch(batches, self.world.y)

    def run(self, epochs):
        return [self.step() for _ in range(epochs)]
