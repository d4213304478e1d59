import numpy as np
import pytest

from rdgcn.conllu import validate_tree
from rdgcn.errors import ConfigError
from rdgcn.graph import bfs_distances
from rdgcn.model import induced_adjacency
from rdgcn.synthetic import MIN_DISTRACTOR_DIST, OPINIONS, generate_corpus, synthetic_splits
from rdgcn.training import (TrainConfig, Trainer, ablate, resume, save_checkpoint, train, write_trace_csv)

SMALL = dict(epochs=2, D=8, D_in=16, batch_size=16)


@pytest.fixture(scope="module")
def corpus():
    return synthetic_splits(seed=3, n_train=240, n_test=60)


class TestSynthetic:
    def test_planted_structure(self):
        for ex in generate_corpus(60, seed=0):
            assert validate_tree(ex.tree) is None
            assert 5 <= ex.tree.N <= 12
            (a,) = range(*ex.aspect_span)
            dist = bfs_distances(ex.tree)
            forms = ex.tree.forms
            near = [j for j in range(ex.tree.N) if dist[a, j] == 1 and forms[j] in OPINIONS[ex.label]]
            assert near
            others = [p for p in OPINIONS if p != ex.label]
            far = [j for j in range(ex.tree.N) if any(forms[j] in OPINIONS[p] for p in others)]
            assert far and all(dist[a, j] >= MIN_DISTRACTOR_DIST for j in far)

    def test_balanced_and_seeded(self):
        a = generate_corpus(90, seed=1)
        assert np.bincount([ex.label for ex in a]).tolist() == [30, 30, 30]
        assert a == generate_corpus(90, seed=1)

    def test_train_test_differ(self):
        tr, te = synthetic_splits(0, 50, 50)
        assert [e.tree.forms for e in tr] != [e.tree.forms for e in te]


class TestConfig:
    def test_zero_window(self):
        with pytest.raises(ConfigError):
            TrainConfig(R=0)

    def test_val_frac(self):
        with pytest.raises(ConfigError):
            TrainConfig(val_frac=0.7)

    def test_mode(self):
        with pytest.raises(ConfigError):
            TrainConfig(mode="no_everything")

    def test_missing_class(self, corpus):
        only_pos = [ex for ex in corpus[0] if ex.label == 2]
        with pytest.raises(ConfigError, match="no examples"):
            Trainer.create(only_pos, TrainConfig(**SMALL))

    def test_reward_on_test_needs_test(self, corpus):
        with pytest.raises(ConfigError):
            Trainer.create(corpus[0], TrainConfig(reward_on_test=True, **SMALL))


def test_determinism(corpus):
    a = train(*corpus[:1], TrainConfig(**SMALL), corpus[1])
    b = train(*corpus[:1], TrainConfig(**SMALL), corpus[1])
    assert [h["loss"] for h in a.history] == [h["loss"] for h in b.history]
    assert a.history == b.history


def test_different_seed_differs(corpus):
    a = train(corpus[0], TrainConfig(**SMALL), corpus[1])
    b = train(corpus[0], TrainConfig(seed=7, **SMALL), corpus[1])
    assert a.history[0]["loss"] != b.history[0]["loss"]


def test_cache_tracks_bandit(corpus):
    trainer = Trainer.create(corpus[0], TrainConfig(**SMALL), corpus[1])
    trainer.fit()
    assert trainer.trace, "bandit never stepped"
    assert trainer.train_set.version == trainer.version
    expected = trainer.config.distance_fn(trainer.bandit.K)
    from rdgcn.importance import distance_adjacency
    i = 0
    n = trainer.train_set.lengths[i]
    np.testing.assert_array_equal(trainer.train_set.a_dis[i, :n, :n],
                                  distance_adjacency(trainer.train_set.dist[i, :n, :n], expected))
    trainer.version += 1
    with pytest.raises(RuntimeError, match="version"):
        trainer.train_set.batch([0], trainer.version)


def test_reward_on_test_uses_test_split(corpus):
    trainer = Trainer.create(corpus[0], TrainConfig(reward_on_test=True, **SMALL), corpus[1])
    assert len(trainer.reward_set) == len(corpus[1])
    assert len(trainer.train_set) == len(corpus[0])


def test_val_split_carved_from_train(corpus):
    trainer = Trainer.create(corpus[0], TrainConfig(**SMALL), corpus[1])
    assert len(trainer.reward_set) == 24
    assert len(trainer.train_set) == 216


def test_resume_matches_uninterrupted(corpus, tmp_path):
    cfg = TrainConfig(**{**SMALL, "epochs": 4})
    straight = Trainer.create(corpus[0], cfg, corpus[1]).fit()

    first = Trainer.create(corpus[0], cfg, corpus[1]).fit(epochs=2)
    save_checkpoint(first, tmp_path / "ck.npz")
    resumed = resume(tmp_path / "ck.npz", corpus[0], corpus[1]).fit()

    assert resumed.history == straight.history
    for (name, a), (_, b) in zip(resumed.params.named(), straight.params.named()):
        assert np.array_equal(a, b), name
    assert resumed.bandit.to_dict() == straight.bandit.to_dict()


class TestModes:
    def test_no_type_adjacency_is_distance_only(self, corpus):
        trainer = Trainer.create(corpus[0], TrainConfig(mode="no_type", **SMALL), corpus[1])
        batch = trainer.train_set.batch(np.arange(4), trainer.version)
        a, _ = induced_adjacency(batch, trainer.params, trainer.config.model_config())
        assert np.array_equal(a, batch.a_dis)

    def test_no_dis_uses_topology(self, corpus):
        trainer = Trainer.create(corpus[0], TrainConfig(mode="no_dis", **SMALL), corpus[1])
        assert np.array_equal(trainer.train_set.a_dis, trainer.train_set.topo)

    def test_eq2_control_searches_slope(self, corpus):
        trainer = Trainer.create(corpus[0], TrainConfig(mode="eq2_control", **SMALL), corpus[1])
        assert trainer.config.distance_fn(trainer.bandit.K).variant == "linear_cut"
        assert (trainer.bandit.K_min, trainer.bandit.K_max) == (1.0, 10.0)
        trainer.fit()
        assert all(1.0 <= row.K <= 10.0 for row in trainer.trace)

    @pytest.mark.parametrize("mode", ["full", "no_dis", "no_type", "eq2_control"])
    def test_ablate_runs(self, corpus, mode):
        report = ablate(TrainConfig(**SMALL), mode, corpus[0], corpus[1])
        assert 0.0 <= report.accuracy <= 1.0
        assert np.array(report.confusion).sum() == len(corpus[1])


def test_report_consistency(corpus):
    result = train(corpus[0], TrainConfig(**SMALL), corpus[1])
    for entry in result.history:
        cm = np.array(entry["eval"]["confusion"])
        assert abs(np.trace(cm) / cm.sum() - entry["eval"]["accuracy"]) < 1e-12


def test_trace_csv(corpus, tmp_path):
    result = train(corpus[0], TrainConfig(**SMALL), corpus[1])
    write_trace_csv(result.trace, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "b,K,reward,frozen"
    assert len(lines) == len(result.trace) + 1
    b, k, r, f = lines[1].split(",")
    assert b == "1" and r in ("1", "-1") and f in ("0", "1")
