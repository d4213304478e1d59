"""Independent cross-checks: Floyd-Warshall distances and finite-difference gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conllu import DepTree, validate_tree
from .graph import bfs_distances, build_topology_mask, build_type_matrix, TypeVocab, NONE_TYPE_ID
from .importance import DistanceFnConfig, distance_adjacency
from .model import Batch, ModelConfig, ModelParams, backward, forward, loss


def floyd_warshall(n: int, edges) -> np.ndarray:
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for a, b, *_ in edges:
        d[a, b] = d[b, a] = 1.0
    for k in range(n):
        d = np.minimum(d, d[:, k, None] + d[None, k, :])
    return d


def random_valid_tree(rng, n: int, rels=("nsubj", "obj", "det", "amod", "advmod")) -> DepTree:
    """Rejection-sample uniform head assignments until one forms a tree."""
    while True:
        # uniform over {0..n} minus the token's own index
        heads = [int(h) + (int(h) >= i + 1) for i, h in enumerate(rng.integers(0, n, size=n))]
        deprels = [str(rng.choice(rels)) for _ in range(n)]
        tree = DepTree.from_lists([f"w{i}" for i in range(n)], heads, deprels)
        if validate_tree(tree) is None:
            return tree


@dataclass
class DistOracleReport:
    trials: int
    mismatches: int
    max_n: int
    first_mismatch: str | None = None

    def lines(self):
        yield f"trials={self.trials} max_n={self.max_n} mismatches={self.mismatches}"
        if self.first_mismatch:
            yield f"first_mismatch: {self.first_mismatch}"


def oracle_dist(max_n: int = 12, trials: int = 1000, seed: int = 0, inject_fault: bool = False) -> DistOracleReport:
    rng = np.random.default_rng(seed)
    mismatches = 0
    first = None
    for trial in range(trials):
        n = int(rng.integers(1, max_n + 1))
        tree = random_valid_tree(rng, n)
        bfs = bfs_distances(tree).astype(np.float64)
        if inject_fault and n > 1:
            bfs[0, n - 1] += 1
        fw = floyd_warshall(n, tree.edges())
        if not np.array_equal(bfs, fw):
            mismatches += 1
            if first is None:
                first = f"trial {trial}, heads {tree.heads}"
    return DistOracleReport(trials, mismatches, max_n, first)


def random_instance(seed=0, n_sent=2, max_n=6, vocab=12, d_in=5, d=8, n_layers=2, T=10, K=0.3):
    """A small random batch and parameter set for gradient checks."""
    rng = np.random.default_rng(seed)
    types = TypeVocab(["nsubj", "obj", "det", "amod", "advmod"])
    trees = [random_valid_tree(rng, int(rng.integers(2, max_n + 1))) for _ in range(n_sent)]
    width = max(t.N for t in trees)
    ids = np.zeros((n_sent, width), dtype=np.int64)
    a_dis = np.zeros((n_sent, width, width))
    type_ids = np.full((n_sent, width, width), NONE_TYPE_ID, dtype=np.int64)
    topo = np.zeros((n_sent, width, width))
    aspect = np.zeros((n_sent, width))
    cfg = DistanceFnConfig(T=T, K=K)
    for i, tree in enumerate(trees):
        k = tree.N
        ids[i, :k] = rng.integers(2, vocab, size=k)
        a_dis[i, :k, :k] = distance_adjacency(np.minimum(bfs_distances(tree), T), cfg)
        type_ids[i, :k, :k] = build_type_matrix(tree, types)
        topo[i, :k, :k] = build_topology_mask(tree)
        s = int(rng.integers(0, k))
        e = int(rng.integers(s + 1, k + 1))
        aspect[i, s:e] = 1.0 / (e - s)
    labels = rng.integers(0, 3, size=n_sent)
    batch = Batch(ids, a_dis, type_ids, topo, aspect, labels)
    # wider init than training so ReLUs are active and gradients are not tiny
    params = ModelParams.init(rng, vocab, d_in, d, n_layers, types.U, 3, scale=0.5)
    return batch, params


def numeric_gradients(batch, params: ModelParams, mcfg: ModelConfig, h=1e-5) -> ModelParams:
    """Central finite differences of the batch loss, entry by entry."""
    grads = params.zeros_like()
    out = dict(grads.named())
    for name, arr in params.named():
        g = out[name]
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = loss(forward(batch, params, mcfg)[0], batch.labels)
            arr[idx] = old - h
            down = loss(forward(batch, params, mcfg)[0], batch.labels)
            arr[idx] = old
            g[idx] = (up - down) / (2 * h)
    return grads


def relative_error(analytic, numeric) -> float:
    """Worst entrywise gap, scaled by the larger of the two tensors' magnitudes."""
    scale = max(np.abs(analytic).max(), np.abs(numeric).max())
    if scale == 0:
        return 0.0
    return float(np.abs(analytic - numeric).max() / scale)


def grad_check(seed=0, n_sent=2, max_n=6, d=8, n_layers=2, row_norm=False, use_type=True,
               inject_fault=False, h=1e-5) -> dict:
    """Per-parameter relative error between backward() and finite differences."""
    batch, params = random_instance(seed, n_sent=n_sent, max_n=max_n, d=d, n_layers=n_layers)
    mcfg = ModelConfig(dropout_in=0.0, dropout_out=0.0, use_type=use_type, row_norm=row_norm)
    _, cache = forward(batch, params, mcfg)
    analytic = backward(cache, params, mcfg)
    if inject_fault:
        analytic.type_q = analytic.type_q * 1.01 + 1e-3
    numeric = numeric_gradients(batch, params, mcfg, h)
    num = dict(numeric.named())
    return {name: relative_error(g, num[name]) for name, g in analytic.named()}
