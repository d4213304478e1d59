"""Syntactic views of a dependency tree: distances, type ids, topology."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from .conllu import DepTree
from .errors import RdgcnError

ROOT_TYPE_ID = 0
NONE_TYPE_ID = 1


class TypeVocab:
    """Dependency-label ids; ids 0 and 1 are reserved for the root and none types."""

    def __init__(self, labels=()):
        self.label_to_id = {"<root>": ROOT_TYPE_ID, "<none>": NONE_TYPE_ID}
        for label in labels:
            if label not in self.label_to_id:
                self.label_to_id[label] = len(self.label_to_id)

    @classmethod
    def build(cls, trees) -> "TypeVocab":
        return cls(sorted({t.deprel for tree in trees for t in tree.tokens}))

    @property
    def U(self) -> int:
        return len(self.label_to_id)

    def id(self, label: str) -> int:
        return self.label_to_id.get(label, NONE_TYPE_ID)

    def to_dict(self) -> dict:
        return dict(self.label_to_id)

    @classmethod
    def from_dict(cls, mapping) -> "TypeVocab":
        labels = [k for k, v in sorted(mapping.items(), key=lambda kv: kv[1]) if v > NONE_TYPE_ID]
        vocab = cls(labels)
        if vocab.label_to_id != dict(mapping):
            raise ValueError("type vocabulary ids are not dense in the expected order")
        return vocab

    def __eq__(self, other):
        return isinstance(other, TypeVocab) and self.label_to_id == other.label_to_id


@dataclass(frozen=True)
class SyntacticViews:
    dist: np.ndarray
    type_ids: np.ndarray
    topo: np.ndarray


def _adjacency_lists(tree: DepTree):
    adj = [[] for _ in range(tree.N)]
    for a, b, _ in tree.edges():
        adj[a].append(b)
        adj[b].append(a)
    return adj


def bfs_distances(tree: DepTree) -> np.ndarray:
    """Unclipped all-pairs tree distances by one BFS per token."""
    n = tree.N
    adj = _adjacency_lists(tree)
    dist = np.full((n, n), -1, dtype=np.int64)
    for src in range(n):
        row = dist[src]
        row[src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if row[v] < 0:
                    row[v] = row[u] + 1
                    queue.append(v)
    if (dist < 0).any():
        raise RdgcnError("dependency tree is disconnected; validate_tree should have rejected it")
    return dist


def min_tree_distances(tree: DepTree, T: int = 10) -> np.ndarray:
    if T < 1:
        raise ValueError(f"distance cap T must be >= 1, got {T}")
    return np.minimum(bfs_distances(tree), T)


def build_topology_mask(tree: DepTree) -> np.ndarray:
    topo = np.eye(tree.N, dtype=np.int64)
    for a, b, _ in tree.edges():
        topo[a, b] = topo[b, a] = 1
    return topo


def build_type_matrix(tree: DepTree, vocab: TypeVocab) -> np.ndarray:
    type_ids = np.full((tree.N, tree.N), NONE_TYPE_ID, dtype=np.int64)
    np.fill_diagonal(type_ids, ROOT_TYPE_ID)
    for a, b, rel in tree.edges():
        type_ids[a, b] = type_ids[b, a] = vocab.id(rel)
    return type_ids


def build_views(tree: DepTree, vocab: TypeVocab, T: int = 10) -> SyntacticViews:
    return SyntacticViews(
        dist=min_tree_distances(tree, T),
        type_ids=build_type_matrix(tree, vocab),
        topo=build_topology_mask(tree),
    )


def views_to_json(views: SyntacticViews, vocab: TypeVocab) -> str:
    return json.dumps({
        "dist": views.dist.tolist(),
        "type_ids": views.type_ids.tolist(),
        "topo": views.topo.tolist(),
        "vocab": vocab.to_dict(),
    })


def views_from_json(text: str) -> tuple[SyntacticViews, TypeVocab]:
    obj = json.loads(text)
    views = SyntacticViews(
        dist=np.asarray(obj["dist"], dtype=np.int64),
        type_ids=np.asarray(obj["type_ids"], dtype=np.int64),
        topo=np.asarray(obj["topo"], dtype=np.int64),
    )
    return views, TypeVocab.from_dict(obj["vocab"])
