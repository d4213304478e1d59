"""Training loop: batches, bandit reward intervals, evaluation, checkpoints."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import bandit as bandit_ops
from .bandit import BanditState
from .conllu import LABELS
from .errors import ConfigError, NumericError
from .graph import NONE_TYPE_ID, TypeVocab, build_views
from .importance import DistanceFnConfig, distance_adjacency
from .metrics import EvalReport, eval_report
from .model import (PAD_ID, UNK_ID, AdamState, Batch, ModelConfig, ModelParams, adam_step,
                    backward, forward, loss)

log = logging.getLogger(__name__)

MODES = ("full", "no_dis", "no_type", "eq2_control")
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 0.002
    D: int = 50
    D_in: int = 300
    L: int = 2
    T: int = 10
    dropout_in: float = 0.7
    dropout_out: float = 0.1
    K0: float = 0.1
    S: float = 0.1
    K_min: float = 0.1
    K_max: float = 2.0
    R: int = 10
    interval: int = 2
    # slope search used by eq2_control, on the linear_cut function
    slope_K0: float = 1.0
    slope_S: float = 1.0
    slope_K_min: float = 1.0
    seed: int = 42
    val_frac: float = 0.1
    reward_on_test: bool = False
    mode: str = "full"
    row_norm: bool = False
    init_scale: float = 0.1

    def __post_init__(self):
        for name in ("epochs", "batch_size", "D", "D_in", "L", "T", "R", "interval"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        for name in ("lr", "S", "K0", "K_min", "K_max", "slope_S", "slope_K0", "slope_K_min"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("dropout_in", "dropout_out"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {getattr(self, name)}")
        if not self.reward_on_test and not 0.0 < self.val_frac <= 0.5:
            raise ConfigError(f"val_frac must lie in (0, 0.5], got {self.val_frac}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})

    def new_bandit(self) -> BanditState:
        if self.mode == "eq2_control":
            return BanditState(K=self.slope_K0, S=self.slope_S, K_min=self.slope_K_min,
                               K_max=float(self.T), R=self.R)
        return BanditState(K=self.K0, S=self.S, K_min=self.K_min, K_max=self.K_max, R=self.R)

    def distance_fn(self, K) -> DistanceFnConfig:
        variant = "linear_cut" if self.mode == "eq2_control" else "combined"
        return DistanceFnConfig(T=self.T, K=K, variant=variant)

    def model_config(self) -> ModelConfig:
        return ModelConfig(self.dropout_in, self.dropout_out, self.mode != "no_type", self.row_norm)


class TokenVocab:
    def __init__(self, words=()):
        self.word_to_id = {"<pad>": PAD_ID, "<unk>": UNK_ID}
        for w in words:
            self.word_to_id.setdefault(w, len(self.word_to_id))

    @classmethod
    def build(cls, examples) -> "TokenVocab":
        return cls(sorted({f for ex in examples for f in ex.tree.forms}))

    def __len__(self):
        return len(self.word_to_id)

    def encode(self, forms):
        return [self.word_to_id.get(f, UNK_ID) for f in forms]

    def words(self):
        return [w for w, i in sorted(self.word_to_id.items(), key=lambda kv: kv[1]) if i > UNK_ID]


@dataclass
class EncodedSet:
    """A split padded to its longest sentence, plus the K-dependent distance weights."""

    ids: np.ndarray
    dist: np.ndarray
    type_ids: np.ndarray
    topo: np.ndarray
    aspect: np.ndarray
    labels: np.ndarray
    lengths: np.ndarray
    a_dis: np.ndarray | None = None
    version: int = -1

    def __len__(self):
        return len(self.labels)

    @classmethod
    def build(cls, examples, tokens: TokenVocab, types: TypeVocab, T: int) -> "EncodedSet":
        n = len(examples)
        width = max(ex.tree.N for ex in examples)
        ids = np.full((n, width), PAD_ID, dtype=np.int64)
        dist = np.full((n, width, width), T, dtype=np.int64)
        type_ids = np.full((n, width, width), NONE_TYPE_ID, dtype=np.int64)
        topo = np.zeros((n, width, width))
        aspect = np.zeros((n, width))
        labels = np.array([ex.label for ex in examples], dtype=np.int64)
        lengths = np.array([ex.tree.N for ex in examples], dtype=np.int64)
        for i, ex in enumerate(examples):
            k = ex.tree.N
            views = build_views(ex.tree, types, T)
            ids[i, :k] = tokens.encode(ex.tree.forms)
            dist[i, :k, :k] = views.dist
            type_ids[i, :k, :k] = views.type_ids
            topo[i, :k, :k] = views.topo
            s, e = ex.aspect_span
            aspect[i, s:e] = 1.0 / (e - s)
        return cls(ids, dist, type_ids, topo, aspect, labels, lengths)

    def refresh(self, cfg: TrainConfig, K: float, version: int) -> None:
        """Recompute the distance weights for curvature/slope ``K``."""
        valid = (self.ids != PAD_ID).astype(np.float64)
        pair = valid[:, :, None] * valid[:, None, :]
        if cfg.mode == "no_dis":
            self.a_dis = self.topo.copy()
        else:
            self.a_dis = distance_adjacency(self.dist, cfg.distance_fn(K)) * pair
        self.version = version

    def batch(self, idx, version: int) -> Batch:
        if self.version != version:
            raise RuntimeError(f"distance cache version {self.version} != bandit version {version}")
        idx = np.asarray(idx)
        w = int(self.lengths[idx].max())
        return Batch(
            ids=self.ids[idx, :w],
            a_dis=self.a_dis[idx, :w, :w],
            type_ids=self.type_ids[idx, :w, :w],
            topo=self.topo[idx, :w, :w],
            aspect=self.aspect[idx, :w],
            labels=self.labels[idx],
            version=version,
        )


def split_train_val(examples, val_frac, rng):
    order = rng.permutation(len(examples))
    n_val = max(1, int(round(val_frac * len(examples))))
    val = [examples[i] for i in sorted(order[:n_val])]
    train = [examples[i] for i in sorted(order[n_val:])]
    return train, val


def predict(data: EncodedSet, params: ModelParams, mcfg: ModelConfig, version: int, batch_size=256):
    preds = []
    for start in range(0, len(data), batch_size):
        batch = data.batch(np.arange(start, min(start + batch_size, len(data))), version)
        logits, _ = forward(batch, params, mcfg)
        preds.append(logits.argmax(axis=1))
    return np.concatenate(preds)


def evaluate(data: EncodedSet, params: ModelParams, mcfg: ModelConfig, version: int) -> EvalReport:
    """Dropout-free evaluation of ``params`` on an encoded split."""
    return eval_report(data.labels, predict(data, params, mcfg, version), len(LABELS))


@dataclass
class TraceRow:
    b: int
    K: float
    reward: int
    frozen: bool


@dataclass
class Trainer:
    config: TrainConfig
    train_set: EncodedSet
    reward_set: EncodedSet
    eval_set: EncodedSet
    tokens: TokenVocab
    types: TypeVocab
    params: ModelParams
    adam: AdamState
    bandit: BanditState
    rng: np.random.Generator
    epoch: int = 0
    n_batches: int = 0
    version: int = 0
    trace: list = field(default_factory=list)
    history: list = field(default_factory=list)

    @classmethod
    def create(cls, train_examples, config: TrainConfig, test_examples=None) -> "Trainer":
        if not train_examples:
            raise ConfigError("training set is empty")
        split_rng, init_rng, run_rng = (np.random.default_rng(s)
                                        for s in np.random.SeedSequence(config.seed).spawn(3))
        if config.reward_on_test:
            if not test_examples:
                raise ConfigError("--reward-on-test needs a test split")
            train, reward = list(train_examples), list(test_examples)
        else:
            train, reward = split_train_val(list(train_examples), config.val_frac, split_rng)
        missing = set(range(len(LABELS))) - {ex.label for ex in train}
        if missing:
            raise ConfigError(f"training split has no examples of class(es) {sorted(LABELS[m] for m in missing)}")
        tokens = TokenVocab.build(train)
        types = TypeVocab.build(ex.tree for ex in train)
        train_set = EncodedSet.build(train, tokens, types, config.T)
        reward_set = EncodedSet.build(reward, tokens, types, config.T)
        eval_set = EncodedSet.build(test_examples, tokens, types, config.T) if test_examples else reward_set
        params = ModelParams.init(init_rng, len(tokens), config.D_in, config.D, config.L, types.U,
                                  len(LABELS), config.init_scale)
        trainer = cls(config, train_set, reward_set, eval_set, tokens, types, params,
                      AdamState(lr=config.lr), config.new_bandit(), run_rng)
        trainer._refresh()
        return trainer

    def _sets(self):
        seen = []
        for s in (self.train_set, self.reward_set, self.eval_set):
            if not any(s is t for t in seen):
                seen.append(s)
        return seen

    def _refresh(self):
        for s in self._sets():
            s.refresh(self.config, self.bandit.K, self.version)

    def _reward_interval(self):
        mcfg = self.config.model_config()
        acc = evaluate(self.reward_set, self.params, mcfg, self.version).accuracy
        r = bandit_ops.observe(self.bandit, acc)
        self.trace.append(TraceRow(self.bandit.b, self.bandit.K, r, self.bandit.frozen))
        self.version += 1
        self._refresh()

    def run_epoch(self) -> dict:
        cfg = self.config
        mcfg = cfg.model_config()
        order = self.rng.permutation(len(self.train_set))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = self.train_set.batch(order[start:start + cfg.batch_size], self.version)
            logits, cache = forward(batch, self.params, mcfg, self.rng)
            value = loss(logits, batch.labels)
            if not np.isfinite(value):
                raise NumericError(f"non-finite loss at epoch {self.epoch + 1}, batch {self.n_batches + 1}")
            losses.append(value)
            adam_step(self.params, backward(cache, self.params, mcfg), self.adam)
            self.n_batches += 1
            if self.n_batches % cfg.interval == 0 and not self.bandit.frozen:
                self._reward_interval()
        self.epoch += 1
        report = evaluate(self.eval_set, self.params, mcfg, self.version)
        entry = {"epoch": self.epoch, "loss": float(np.mean(losses)), "K": self.bandit.K,
                 "frozen": self.bandit.frozen, "eval": report.to_dict()}
        self.history.append(entry)
        log.info("epoch %d loss %.4f acc %.4f K %.2f", self.epoch, entry["loss"], report.accuracy, self.bandit.K)
        return entry

    def fit(self, epochs=None):
        target = self.config.epochs if epochs is None else self.epoch + epochs
        while self.epoch < target:
            self.run_epoch()
        return self

    def final_report(self) -> EvalReport:
        return evaluate(self.eval_set, self.params, self.config.model_config(), self.version)

    def metrics(self, trace_path="bandit_trace.csv") -> dict:
        return {
            "epochs": self.history,
            "final": self.final_report().to_dict(),
            "bandit_trace": str(trace_path),
            "config": self.config.to_dict(),
        }


@dataclass
class TrainResult:
    params: ModelParams
    trace: list
    history: list
    final: EvalReport
    trainer: Trainer


def train(train_examples, config: TrainConfig, test_examples=None) -> TrainResult:
    trainer = Trainer.create(train_examples, config, test_examples).fit()
    return TrainResult(trainer.params, trainer.trace, trainer.history, trainer.final_report(), trainer)


def ablate(config: TrainConfig, mode: str, train_examples, test_examples) -> EvalReport:
    """Train with one ablation mode and report on the test split."""
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    cfg = TrainConfig.from_dict({**config.to_dict(), "mode": mode})
    return train(train_examples, cfg, test_examples).final


def write_trace_csv(trace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["b", "K", "reward", "frozen"])
        for row in trace:
            writer.writerow([row.b, repr(float(row.K)), row.reward, int(row.frozen)])


def write_metrics_json(metrics: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")


# checkpoints: an .npz archive holding every array plus one JSON metadata string

def save_checkpoint(trainer: Trainer, path) -> None:
    arrays = {f"param/{k}": v for k, v in trainer.params.named()}
    arrays.update({f"adam_m/{k}": v for k, v in trainer.adam.m.items()})
    arrays.update({f"adam_v/{k}": v for k, v in trainer.adam.v.items()})
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "config": trainer.config.to_dict(),
        "adam": {"lr": trainer.adam.lr, "beta1": trainer.adam.beta1, "beta2": trainer.adam.beta2,
                 "eps": trainer.adam.eps, "t": trainer.adam.t},
        "bandit": trainer.bandit.to_dict(),
        "type_vocab": trainer.types.to_dict(),
        "token_vocab": trainer.tokens.words(),
        "rng": trainer.rng.bit_generator.state,
        "epoch": trainer.epoch,
        "n_batches": trainer.n_batches,
        "cache_version": trainer.version,
        "trace": [asdict(r) for r in trainer.trace],
        "history": trainer.history,
    }
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path):
    """Return ``(meta, params, adam)`` from a checkpoint file."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint format {meta.get('format_version')}")
        grab = lambda prefix: {k[len(prefix):]: z[k].copy() for k in z.files if k.startswith(prefix)}
        params = ModelParams.from_named(grab("param/").items())
        a = meta["adam"]
        adam = AdamState(lr=a["lr"], beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"], t=a["t"],
                         m=grab("adam_m/"), v=grab("adam_v/"))
    return meta, params, adam


def resume(path, train_examples, test_examples=None) -> Trainer:
    """Rebuild a trainer from a checkpoint; the data splits are re-derived from the seed."""
    meta, params, adam = load_checkpoint(path)
    config = TrainConfig.from_dict(meta["config"])
    trainer = Trainer.create(train_examples, config, test_examples)
    if trainer.tokens.words() != meta["token_vocab"] or trainer.types.to_dict() != meta["type_vocab"]:
        raise ConfigError("checkpoint vocabularies do not match the supplied training data")
    trainer.params = params
    trainer.adam = adam
    trainer.bandit = BanditState.from_dict(meta["bandit"])
    trainer.rng.bit_generator.state = meta["rng"]
    trainer.epoch = meta["epoch"]
    trainer.n_batches = meta["n_batches"]
    trainer.version = meta["cache_version"]
    trainer.trace = [TraceRow(**r) for r in meta["trace"]]
    trainer.history = meta["history"]
    trainer._refresh()
    return trainer
