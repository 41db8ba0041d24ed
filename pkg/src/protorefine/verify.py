"""Acceptance checks with independent oracles.

Every ``check_*`` function returns a :class:`Check`; :func:`run_all` runs the
full list in a fixed order.  Oracles here never call the code path they
verify: argmax is recomputed by exhaustive loops, the cluster table and the
prototypes are rebuilt from raw dumps and logs, and the unconstrained run is
compared against a separately written mini-batch K-means.
"""
import csv
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .banks import ClusterLabelTable, SampleBanks, footprint, naive_footprint_slots
from .engine import EngineConfig, Simulation
from .kmeans import Assignments, ClusterState, cluster_stream, init_clusters
from .losses import (LossWeights, self_supervised_loss, total_loss, unlabeled_loss)
from .simulator import World, biased_world_preset, gaussian_blobs
from .vecmath import cross_entropy, l2_normalize


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def summary(self):
        parts = ["%s=%s" % (k, _fmt(v)) for k, v in self.detail.items()]
        parts.append("%.2fs" % self.seconds)
        return " ".join(parts)


def _fmt(v):
    if isinstance(v, float):
        return "%.6g" % v
    return str(v)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t = time.perf_counter()
        check = fn(*args, **kwargs)
        check.seconds = time.perf_counter() - t
        return check
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# -- 1 ---------------------------------------------------------------------

def exhaustive_argmax(q, centroids, duals):
    best, arg = -math.inf, -1
    for k in range(len(centroids)):
        v = float(np.dot(q, centroids[k])) + float(duals[k])
        if v > best:
            best, arg = v, k
    return arg


@_timed
def check_assignment_oracle(trials=10_000, seed=0, max_seconds=5.0):
    rng = np.random.default_rng(seed)
    mismatches = 0
    t0 = time.perf_counter()
    for t in range(trials):
        K = int(rng.integers(2, 65))
        d = int(rng.integers(2, 33))
        c = l2_normalize(rng.standard_normal((K, d)))
        duals = rng.uniform(0, 1, K) * (rng.random() < 0.8)
        if t % 10 == 0:
            # exact ties: duplicated centroid with its dual
            j, k = sorted(rng.choice(K, 2, replace=False))
            c[k], duals[k] = c[j], duals[j]
        q = l2_normalize(rng.standard_normal(d))
        state = ClusterState(c, duals, np.zeros((K, d)), np.zeros(K, dtype=np.int64))
        if int(state.assign_batch(q).cluster[0]) != exhaustive_argmax(q, c, duals):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    return Check("1 assignment oracle", mismatches == 0 and elapsed < max_seconds,
                 {"trials": trials, "mismatches": mismatches})


# -- 2 ---------------------------------------------------------------------

def vanilla_minibatch_kmeans(data, seeds, K, epochs, batch_size, warmup_epochs, init_seed,
                             order_seed):
    """Plain spherical mini-batch K-means (nearest centroid, running epoch mean)."""
    pick = np.random.default_rng(init_seed).choice(len(seeds), size=K, replace=False)
    centroids = [np.array(seeds[i], dtype=np.float64) for i in pick]
    N = len(data)
    history = []
    for e in range(epochs):
        warm = e < warmup_epochs
        sums = [np.zeros(data.shape[1]) for _ in range(K)]
        counts = [0] * K
        order = np.random.default_rng([order_seed, e]).permutation(N)
        labels = np.full(N, -1, dtype=np.int64)
        for s in range(0, N, batch_size):
            idx = order[s:s + batch_size]
            sims = data[idx] @ np.array(centroids).T
            a = np.argmax(sims, axis=1)
            for i, k in zip(idx, a):
                sums[k] += data[i]
                counts[k] += 1
                labels[i] = k
            if warm:
                for k in range(K):
                    if counts[k]:
                        centroids[k] = sums[k] / np.linalg.norm(sums[k])
        for k in range(K):
            if counts[k]:
                centroids[k] = sums[k] / np.linalg.norm(sums[k])
        history.append(labels)
    return history


@_timed
def check_unconstrained_reduction(seed=0, epochs=10, batch_size=64, warmup_epochs=5):
    X, _ = gaussian_blobs(500, 4, 64, 0.1, rng_seed=seed)
    seeds = X[:batch_size]
    state = init_clusters(8, 0.0, seeds, seed)
    ours = cluster_stream(state, X, epochs, batch_size, gamma=0.0, lam=20.0,
                          warmup_epochs=warmup_epochs, rng_seed=seed)
    ref = vanilla_minibatch_kmeans(X, seeds, 8, epochs, batch_size, warmup_epochs, seed, seed)
    diff = sum(int(np.sum(a != b)) for a, b in zip(ours, ref))
    return Check("2 unconstrained reduction", diff == 0 and float(state.duals.max()) == 0.0,
                 {"epochs": epochs, "differing_assignments": diff,
                  "max_dual": float(state.duals.max())})


# -- 3 ---------------------------------------------------------------------

@_timed
def check_constraint_satisfaction(seed=0, epochs=30, batch_size=64, max_seconds=60.0):
    N, K = 2000, 8
    gamma = 0.9 * N / K
    X, _ = gaussian_blobs(N // 4, 4, 64, 0.1, rng_seed=seed)
    seeds = X[np.random.default_rng(seed).permutation(N)[:batch_size]]
    t = time.perf_counter()
    c = init_clusters(K, gamma, seeds, seed)
    last = cluster_stream(c, X, epochs, batch_size, gamma, 20.0, rng_seed=seed)[-1]
    u = init_clusters(K, 0.0, seeds, seed)
    last_u = cluster_stream(u, X, epochs, batch_size, 0.0, 20.0, rng_seed=seed)[-1]
    elapsed = time.perf_counter() - t
    min_c = int(np.bincount(last, minlength=K).min())
    min_u = int(np.bincount(last_u, minlength=K).min())
    ok = min_c >= 0.8 * gamma and min_u < 0.5 * gamma and elapsed < max_seconds
    return Check("3 constraint satisfaction", ok,
                 {"gamma": gamma, "min_constrained": min_c, "min_unconstrained": min_u})


# -- 4 ---------------------------------------------------------------------

def random_banks(rng, N, K, C, H=1):
    banks = SampleBanks(N, H)
    banks.hard_label[:] = rng.integers(0, C, N)
    banks.reliable[:] = rng.random(N) < 0.5
    live = rng.choice(K, size=max(1, K - int(rng.integers(0, 3))), replace=False)
    for h in range(H):
        k = live[rng.integers(0, len(live), N)]
        unassigned = rng.random(N) < 0.05
        k[unassigned] = -1
        banks.cluster_of[:, h] = k
        s = rng.uniform(-0.3, 1.0, N)
        s[unassigned] = np.nan
        banks.sim_score[:, h] = s
    return banks


def cluster_labels_from_dump(path, head, K, C, sim_floor=1e-6):
    mass = [[[] for _ in range(C)] for _ in range(K)]
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            k = row["cluster_of_%d" % head]
            if k == "":
                continue
            w = max(float(row["sim_score_%d" % head]), sim_floor)
            mass[int(k)][int(row["hard_label"])].append(w)
    z, valid = [], []
    for k in range(K):
        per_class = [math.fsum(ws) for ws in mass[k]]
        total = math.fsum(per_class)
        members = sum(len(ws) for ws in mass[k])
        valid.append(members > 0)
        z.append([x / total for x in per_class] if members else [1.0 / C] * C)
    return np.array(z), np.array(valid)


@_timed
def check_cluster_label_oracle(n_banks=100, seed=0, tol=1e-9):
    rng = np.random.default_rng(seed)
    worst, bad_valid = 0.0, 0
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "banks.csv"
        for _ in range(n_banks):
            N = int(rng.integers(1, 10_001))
            K = int(rng.integers(2, 50))
            C = int(rng.integers(2, 20))
            banks = random_banks(rng, N, K, C)
            table = banks.build_cluster_labels(0, K, C)
            banks.dump_csv(path)
            z, valid = cluster_labels_from_dump(path, 0, K, C)
            worst = max(worst, float(np.abs(table.z - z).max()))
            bad_valid += int(np.sum(table.valid != valid))
    return Check("4 cluster label oracle", worst < tol and bad_valid == 0,
                 {"banks": n_banks, "max_row_deviation": worst, "validity_mismatches": bad_valid})


# -- 5, 6 ------------------------------------------------------------------

_biased_cache = {}


def biased_run(seed=0, epochs=51):
    key = (seed, epochs)
    if key not in _biased_cache:
        wc = biased_world_preset(rng_seed=seed)
        n = 250
        cfg = EngineConfig(N=wc.N, C=wc.C, d=wc.d, K=math.ceil(wc.N / n), gamma=0.9 * n,
                           seed=seed)
        t = time.perf_counter()
        reports = Simulation(World(wc), cfg).run(epochs)
        _biased_cache[key] = (reports, time.perf_counter() - t)
    return _biased_cache[key]


@_timed
def check_refinement_gain(seed=0, max_seconds=300.0):
    reports, elapsed = biased_run(seed)
    win = [r for r in reports if 5 <= r.epoch <= 50]
    ref = np.array([r.pl_acc_refined for r in win])
    clf = np.array([r.pl_acc_classifier for r in win])
    frac = float(np.mean(ref >= clf))
    ok = ref.mean() >= clf.mean() and frac >= 0.8 and elapsed < max_seconds
    return Check("5 refinement gain", ok,
                 {"mean_refined": float(ref.mean()), "mean_classifier": float(clf.mean()),
                  "frac_epochs_refined_ge": frac, "run_seconds": elapsed})


@_timed
def check_confidence_damping(seed=0):
    reports, _ = biased_run(seed)
    late = [r for r in reports if r.epoch > 1]
    violations = [r.epoch for r in late if r.retention_rate > r.retention_rate_unrefined]
    gap = float(np.mean([r.retention_rate_unrefined - r.retention_rate for r in late]))
    return Check("6 confidence damping", not violations,
                 {"epochs": len(late), "violations": len(violations), "mean_retention_gap": gap})


# -- 7 ---------------------------------------------------------------------

@_timed
def check_memory_accounting():
    N, K, C, d = 1_200_000, 4800, 1000, 128
    banks = SampleBanks(N, 1)
    table = ClusterLabelTable(np.full((K, C), 1.0 / C), np.zeros(K, dtype=bool))
    ours = footprint(banks, table)
    naive = naive_footprint_slots(N, d)
    ok = ours == 9_600_000 and naive == 153_600_000 and naive == 16 * ours
    return Check("7 memory accounting", ok,
                 {"footprint": ours, "naive": naive, "ratio": naive / ours})


# -- 8 ---------------------------------------------------------------------

def entropy_oracle(p):
    return -math.fsum(x * math.log(x) for x in p if x > 0)


@_timed
def check_loss_identities(seed=0, trials=1000, tol=1e-9):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        C = int(rng.integers(2, 50))
        p = rng.dirichlet(np.full(C, rng.uniform(0.1, 5.0)))
        worst = max(worst, abs(float(cross_entropy(p, p)) - entropy_oracle(p)))
    B, C, d = 32, 10, 16
    ph = rng.dirichlet(np.ones(C), B)
    ps = rng.dirichlet(np.ones(C), B)
    qw = l2_normalize(rng.standard_normal((B, d)))
    qs = l2_normalize(rng.standard_normal((B, d)))
    lu0 = unlabeled_loss(ph, ps, np.zeros(B, dtype=bool))
    lc1 = self_supervised_loss(qw, qs, np.ones(B, dtype=bool), 0.1)
    parts = rng.uniform(0, 5, 4)
    tl = total_loss(*parts, LossWeights(1.0, 1.0, 1.0))
    ok = worst < tol and lu0 == 0.0 and lc1 == 0.0 and abs(tl - math.fsum(parts)) < 1e-12
    return Check("8 loss identities", ok,
                 {"max_ce_entropy_gap": worst, "L_u_all_unreliable": lu0,
                  "L_c_all_reliable": lc1, "total_minus_sum": tl - math.fsum(parts)})


# -- 9 ---------------------------------------------------------------------

@_timed
def check_prototypes(seed=0, tol=1e-9):
    wc = biased_world_preset(rng_seed=seed, N=5000)
    cfg = EngineConfig(N=wc.N, C=wc.C, d=wc.d, K=20, gamma=225.0, seed=seed)
    world = World(wc)
    sim = Simulation(world, cfg)
    sim.engine.protos.keep_log = True
    worst_p, worst_l = 0.0, 0.0
    for _ in range(3):
        before = sim.engine.protos.protos.copy()
        sim.step()
        log = sim.engine.protos.last_log
        protos = sim.engine.protos.protos
        for c in range(wc.C):
            rows = [q for y, q in log if y == c]
            if not rows:
                expected = before[c]
            else:
                s = np.array([math.fsum(col) for col in zip(*rows)]) / len(rows)
                expected = s / math.sqrt(math.fsum(x * x for x in s))
            worst_p = max(worst_p, float(np.abs(protos[c] - expected).max()))
        batch = world.generate_epoch_stream(sim.engine.epoch)[0]
        y_hat = np.argmax(batch.p_weak, axis=1)
        direct = sim.engine.protos.proto_loss(batch.q_strong, y_hat, cfg.T)
        composed = sim.engine.protos.proto_loss_composed(batch.q_strong, y_hat, cfg.T)
        worst_l = max(worst_l, abs(direct - composed))
    return Check("9 prototype correctness", worst_p < tol and worst_l < tol,
                 {"max_prototype_deviation": worst_p, "max_loss_gap": worst_l})


# -- 10 --------------------------------------------------------------------

def small_run_config(output_dir="out", epochs=8):
    from .config import RunConfig
    return RunConfig.from_dict({
        "world": {"N": 4000, "M": 40, "C": 10, "d": 32, "classifier_bias": [2.0] + [1.0] * 9,
                  "label_noise": 0.1, "rng_seed": 3},
        "engine": {"n": 250, "epochs": epochs, "warmup_epochs": 4, "H": 2, "seed": 3},
        "output_dir": output_dir,
    })


@_timed
def check_determinism():
    from .cli import execute
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp) / "a", Path(tmp) / "b"
        execute(small_run_config(), a)
        execute(small_run_config(), b)
        same = (a / "report.jsonl").read_bytes() == (b / "report.jsonl").read_bytes()
        lines = len((a / "report.jsonl").read_text().splitlines())
    return Check("10 determinism", same, {"identical_report_jsonl": same, "epochs": lines})


# -- dual update mutation guard ---------------------------------------------

@_timed
def check_dual_update_oracle(trials=2000, seed=0, tol=1e-12):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        K = int(rng.integers(2, 30))
        B = int(rng.integers(1, 200))
        N = int(rng.integers(B, 10 * B + 1))
        gamma = rng.uniform(0, N / K)
        lam = rng.uniform(0.1, 50)
        rho = rng.uniform(0, 2, K) * (rng.random(K) < 0.7)
        a = rng.integers(0, K, B)
        state = ClusterState(np.eye(K), rho.copy(), np.zeros((K, K)), np.zeros(K, dtype=np.int64))
        state.update_duals(Assignments(a, np.zeros(B)), gamma, N, lam)
        for k in range(K):
            mean_dev = sum((1.0 if a[i] == k else 0.0) - gamma / N for i in range(B)) / B
            expected = max(0.0, rho[k] - lam * mean_dev)
            worst = max(worst, abs(state.duals[k] - expected))
    return Check("dual update oracle", worst < tol, {"trials": trials, "max_deviation": worst})


def run_all(quick=False):
    checks = [check_assignment_oracle, check_unconstrained_reduction,
              check_constraint_satisfaction, check_cluster_label_oracle]
    if not quick:
        checks += [check_refinement_gain, check_confidence_damping]
    checks += [check_memory_accounting, check_loss_identities, check_prototypes,
               check_determinism, check_dual_update_oracle]
    return [c() for c in checks]
