"""CoNLL-U ingestion and dataset alignment.

Only the ID, FORM, HEAD and DEPREL columns are kept. Multiword-token range
lines (``3-4``) and empty nodes (``5.1``) are skipped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConlluParseError, DatasetError, TreeValidationError

LABELS = ("negative", "neutral", "positive")
LABEL_TO_ID = {name: i for i, name in enumerate(LABELS)}


@dataclass(frozen=True)
class Token:
    index: int  # 1-based
    form: str
    head: int  # 0 = ROOT
    deprel: str


@dataclass(frozen=True)
class DepTree:
    tokens: tuple[Token, ...]
    sent_id: str | None = None

    @property
    def N(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def heads(self) -> list[int]:
        return [t.head for t in self.tokens]

    @property
    def deprels(self) -> list[str]:
        return [t.deprel for t in self.tokens]

    @property
    def root(self) -> Token:
        return next(t for t in self.tokens if t.head == 0)

    def edges(self) -> list[tuple[int, int, str]]:
        """Undirected tree edges as 0-based ``(dependent, head, deprel)``; the ROOT edge is dropped."""
        return [(t.index - 1, t.head - 1, t.deprel) for t in self.tokens if t.head != 0]

    @classmethod
    def from_lists(cls, forms, heads, deprels, sent_id=None) -> "DepTree":
        if not (len(forms) == len(heads) == len(deprels)):
            raise TreeValidationError("forms, heads and deprels differ in length", sent_id)
        return cls(
            tuple(Token(i + 1, f, int(h), d) for i, (f, h, d) in enumerate(zip(forms, heads, deprels))),
            sent_id,
        )


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str = ""

    def __str__(self):
        return f"{self.kind}: {self.detail}" if self.detail else self.kind


@dataclass(frozen=True)
class Example:
    tree: DepTree
    aspect_span: tuple[int, int]  # half-open, 0-based token positions
    label: int

    @property
    def M(self) -> int:
        return self.aspect_span[1] - self.aspect_span[0]


def validate_tree(tree: DepTree) -> Violation | None:
    """Return the first violated tree invariant, or None if the tree is well formed."""
    n = tree.N
    if n == 0:
        return Violation("empty", "sentence has no tokens")
    for pos, tok in enumerate(tree.tokens):
        if tok.index != pos + 1:
            return Violation("bad index", f"token {pos + 1} has index {tok.index}")
        if not 0 <= tok.head <= n:
            return Violation("head out of range", f"token {tok.index} has head {tok.head}")
        if tok.head == tok.index:
            return Violation("self loop", f"token {tok.index} governs itself")
    heads = tree.heads
    # follow head pointers from each token; revisiting a token on the current walk is a cycle
    state = [0] * (n + 1)  # 0 unseen, 1 on current walk, 2 reaches ROOT
    state[0] = 2
    for start in range(1, n + 1):
        walk = []
        node = start
        while state[node] == 0:
            state[node] = 1
            walk.append(node)
            node = heads[node - 1]
        if state[node] == 1:
            return Violation("cycle", f"token {node} is on a head cycle")
        for w in walk:
            state[w] = 2
    roots = [t.index for t in tree.tokens if t.head == 0]
    if len(roots) > 1:
        return Violation("multiple roots", f"tokens {roots} attach to ROOT")
    if not roots:
        return Violation("no root", "no token attaches to ROOT")
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges = tree.edges()
    for a, b, _ in edges:
        parent[find(a)] = find(b)
    if len(edges) != n - 1 or len({find(i) for i in range(n)}) != 1:
        return Violation("disconnected", "undirected edges do not span the sentence")
    return None


def _check(tree: DepTree, sentence) -> DepTree:
    violation = validate_tree(tree)
    if violation is not None:
        raise TreeValidationError(str(violation), sentence)
    return tree


def parse_conllu(text: str) -> list[DepTree]:
    """Parse a CoNLL-U document into validated dependency trees."""
    trees = []
    rows: list[Token] = []
    sent_id = None
    start_line = None

    def flush():
        nonlocal rows, sent_id, start_line
        if rows:
            label = sent_id if sent_id is not None else f"#{len(trees) + 1} (line {start_line})"
            trees.append(_check(DepTree(tuple(rows), sent_id), label))
        rows, sent_id, start_line = [], None, None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush()
            continue
        if start_line is None:
            start_line = line_no
        if line.startswith("#"):
            if line.startswith("# sent_id"):
                sent_id = line.split("=", 1)[1].strip() if "=" in line else None
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluParseError(f"expected 10 tab-separated columns, found {len(cols)}", line_no)
        tok_id = cols[0]
        if "-" in tok_id or "." in tok_id:
            continue
        try:
            index = int(tok_id)
            head = int(cols[6])
        except ValueError:
            raise ConlluParseError(f"non-integer ID or HEAD ({tok_id!r}, {cols[6]!r})", line_no) from None
        rows.append(Token(index, cols[1], head, cols[7]))
    flush()
    return trees


def read_conllu(path) -> list[DepTree]:
    return parse_conllu(Path(path).read_text(encoding="utf-8"))


def serialize_conllu(trees) -> str:
    """Write trees back out as CoNLL-U; unretained columns become ``_``."""
    blocks = []
    for tree in trees:
        lines = []
        if tree.sent_id is not None:
            lines.append(f"# sent_id = {tree.sent_id}")
        for t in tree.tokens:
            lines.append("\t".join([str(t.index), t.form, "_", "_", "_", "_", str(t.head), t.deprel, "_", "_"]))
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def make_example(tree: DepTree, aspect_span, label) -> Example:
    start, end = (int(x) for x in aspect_span)
    if not 0 <= start < end <= tree.N:
        raise DatasetError(f"aspect span [{start}, {end}) out of bounds for {tree.N} tokens")
    if isinstance(label, str):
        if label not in LABEL_TO_ID:
            raise DatasetError(f"unknown label {label!r}; expected one of {list(LABELS)}")
        label = LABEL_TO_ID[label]
    elif not 0 <= label < len(LABELS):
        raise DatasetError(f"label id {label} out of range")
    return Example(tree, (start, end), int(label))


def load_dataset(path, conllu=None) -> list[Example]:
    """Load JSONL examples, optionally aligned with a companion CoNLL-U file.

    Rows pick their companion sentence with ``sent_index`` (0-based) or, when
    absent, by row order. Inline ``heads``/``deprels`` must agree with the
    companion tree when both are present.
    """
    trees = read_conllu(conllu) if conllu is not None else None
    examples = []
    with open(path, encoding="utf-8") as fh:
        for row_no, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{row_no + 1}: invalid JSON ({exc.msg})") from None
            try:
                examples.append(_row_to_example(row, trees, row_no))
            except (DatasetError, TreeValidationError) as exc:
                raise type(exc)(f"{path}:{row_no + 1}: {exc}") from None
    return examples


def _row_to_example(row, trees, row_no) -> Example:
    for key in ("tokens", "aspect_span", "label"):
        if key not in row:
            raise DatasetError(f"missing field {key!r}")
    tokens = row["tokens"]
    inline = None
    if "heads" in row or "deprels" in row:
        if "heads" not in row or "deprels" not in row:
            raise DatasetError("inline parse needs both 'heads' and 'deprels'")
        inline = DepTree.from_lists(tokens, row["heads"], row["deprels"], row.get("sent_id"))
        _check(inline, row_no + 1)
    if trees is not None:
        idx = row.get("sent_index", row_no)
        if not 0 <= idx < len(trees):
            raise DatasetError(f"no companion sentence with index {idx}")
        tree = trees[idx]
        if tree.N != len(tokens):
            raise DatasetError(f"token count mismatch: row has {len(tokens)}, tree has {tree.N}")
        if tree.forms != list(tokens):
            raise DatasetError("row tokens differ from the companion tree's forms")
        if inline is not None and (inline.heads != tree.heads or inline.deprels != tree.deprels):
            raise DatasetError("inline heads/deprels disagree with the companion tree")
    elif inline is not None:
        tree = inline
    else:
        raise DatasetError("row has no inline parse and no companion CoNLL-U was given")
    return make_example(tree, row["aspect_span"], row["label"])


def example_to_row(ex: Example) -> dict:
    return {
        "tokens": ex.tree.forms,
        "heads": ex.tree.heads,
        "deprels": ex.tree.deprels,
        "aspect_span": list(ex.aspect_span),
        "label": LABELS[ex.label],
    }


def write_dataset(examples, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(example_to_row(ex)) + "\n")
