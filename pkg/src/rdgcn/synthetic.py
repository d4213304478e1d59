"""Synthetic aspect-sentiment corpus with planted near and far opinions.

Every sentence is a random dependency tree with one aspect token. The token
adjacent to the aspect carries the label's polarity; a distractor of another
polarity sits at tree distance >= 4, so models that down-weight distant
tokens can separate the classes while uniform aggregation cannot.
"""

from __future__ import annotations

import numpy as np

from .conllu import DepTree, Example
from .graph import bfs_distances

ASPECTS = ["food", "service", "staff", "menu", "price", "ambience", "wine", "pizza",
           "battery", "screen", "keyboard", "delivery"]
OPINIONS = {
    0: ["dreadful", "awful", "terrible", "rude", "bland", "horrible", "slow", "poor"],
    1: ["average", "ordinary", "standard", "typical", "usual", "regular", "moderate", "plain"],
    2: ["great", "excellent", "delicious", "friendly", "amazing", "superb", "lovely", "perfect"],
}
FILLER = ["the", "a", "was", "is", "but", "and", "very", "really", "it", "we", "they", "with",
          "of", "in", "to", "that", "this", "had", "there", "at"]
OPINION_REL = "amod"
OTHER_RELS = ["nsubj", "obj", "det", "advmod", "conj", "cop", "punct", "case", "nmod", "cc", "mark"]
MIN_DISTRACTOR_DIST = 4


def _random_tree(rng, n):
    parent = [-1] + [int(rng.integers(0, k)) for k in range(1, n)]
    forms = ["x"] * n
    heads = [p + 1 for p in parent]
    return parent, DepTree.from_lists(forms, heads, ["dep"] * n)


def make_sentence(rng, label: int, n_min=5, n_max=12) -> Example:
    n = int(rng.integers(n_min, n_max + 1))
    while True:
        parent, skeleton = _random_tree(rng, n)
        dist = bfs_distances(skeleton)
        choices = []
        for a in range(n):
            far = np.flatnonzero(dist[a] >= MIN_DISTRACTOR_DIST)
            if far.size == 0:
                continue
            for o in np.flatnonzero(dist[a] == 1):
                choices.append((a, int(o), far))
        if choices:
            break
    a, o, far = choices[int(rng.integers(len(choices)))]
    d = int(far[int(rng.integers(len(far)))])

    if label == 1:
        distractor_pol = int(rng.choice([0, 2]))
    else:
        distractor_pol = 2 - label
    words = [str(rng.choice(FILLER)) for _ in range(n)]
    words[a] = str(rng.choice(ASPECTS))
    words[o] = str(rng.choice(OPINIONS[label]))
    words[d] = str(rng.choice(OPINIONS[distractor_pol]))

    # node k sits at sentence position order[k]
    order = rng.permutation(n)
    forms = [""] * n
    heads = [0] * n
    rels = [""] * n
    for k in range(n):
        pos = int(order[k])
        forms[pos] = words[k]
        if parent[k] < 0:
            heads[pos] = 0
            rels[pos] = "root"
        else:
            heads[pos] = int(order[parent[k]]) + 1
            on_aspect_edge = {k, parent[k]} == {a, o}
            rels[pos] = OPINION_REL if on_aspect_edge else str(rng.choice(OTHER_RELS))
    tree = DepTree.from_lists(forms, heads, rels)
    start = int(order[a])
    return Example(tree, (start, start + 1), label)


def generate_corpus(n: int, seed: int, n_classes: int = 3) -> list[Example]:
    """``n`` examples with labels cycling through the classes, then shuffled."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % n_classes
    rng.shuffle(labels)
    return [make_sentence(rng, int(y)) for y in labels]


def synthetic_splits(seed: int, n_train: int = 2000, n_test: int = 500):
    train = generate_corpus(n_train, np.random.SeedSequence([seed, 0]).generate_state(1)[0])
    test = generate_corpus(n_test, np.random.SeedSequence([seed, 1]).generate_state(1)[0])
    return train, test
