import json

import numpy as np

from rdgcn.cli import main
from rdgcn.conllu import read_conllu
from rdgcn.graph import TypeVocab, build_views, views_from_json

TRAIN_SMALL = ["--synthetic", "--n-train", "150", "--n-test", "40", "--epochs", "2", "--D", "8", "--D-in", "16"]


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestCurve:
    def test_golden_linear_cut(self, tmp_path, data_dir, capsys):
        out = tmp_path / "c.csv"
        assert run(["curve", "--variant", "linear_cut", "--K", "4", "--T", "10", "--out", str(out)], capsys)[0] == 0
        assert out.read_text() == (data_dir / "curve_linear_cut_K4_T10.csv").read_text()
        assert (tmp_path / "c.csv.manifest.json").exists()

    def test_combined_rows(self, tmp_path, capsys):
        out = tmp_path / "c.csv"
        run(["curve", "--out", str(out)], capsys)
        rows = out.read_text().splitlines()
        assert rows[0] == "t,weight"
        assert len(rows) == 12
        assert rows[1] == "0,1.0" and rows[-1] == "10,0.0"

    def test_bad_config_exit_1(self, tmp_path, capsys):
        code, _, err = run(["curve", "--variant", "linear_cut", "--K", "20", "--out", str(tmp_path / "c")], capsys)
        assert code == 1 and err.startswith("rdgcn-error: input:")


class TestBuildGraph:
    def test_golden(self, tmp_path, data_dir, capsys):
        out = tmp_path / "v.jsonl"
        assert run(["build-graph", str(data_dir / "tiny.conllu"), "--out", str(out)], capsys)[0] == 0
        assert out.read_text() == (data_dir / "tiny_views.jsonl").read_text()

    def test_round_trip(self, tmp_path, data_dir, capsys):
        out = tmp_path / "v.jsonl"
        run(["build-graph", str(data_dir / "tiny.conllu"), "--out", str(out)], capsys)
        views, vocab = views_from_json(out.read_text().splitlines()[0])
        (tree,) = read_conllu(data_dir / "tiny.conllu")
        mem = build_views(tree, TypeVocab.build([tree]))
        assert vocab == TypeVocab.build([tree])
        for field in ("dist", "type_ids", "topo"):
            assert np.array_equal(getattr(views, field), getattr(mem, field))

    def test_invalid_tree(self, tmp_path, capsys):
        bad = tmp_path / "bad.conllu"
        bad.write_text("1\ta\t_\t_\t_\t_\t2\tx\t_\t_\n2\tb\t_\t_\t_\t_\t1\tx\t_\t_\n")
        code, _, err = run(["build-graph", str(bad), "--out", str(tmp_path / "o")], capsys)
        assert code == 1
        assert "cycle" in err and len(err.strip().splitlines()) == 1


class TestTrain:
    def test_repeat_is_byte_identical(self, tmp_path, capsys):
        for name in ("a", "b"):
            assert run(["train", *TRAIN_SMALL, "--out", str(tmp_path / name)], capsys)[0] == 0
        a = (tmp_path / "a" / "metrics.json").read_bytes()
        assert a == (tmp_path / "b" / "metrics.json").read_bytes()
        assert (tmp_path / "a" / "bandit_trace.csv").read_bytes() == (tmp_path / "b" / "bandit_trace.csv").read_bytes()

    def test_outputs_and_schema(self, tmp_path, capsys):
        out = tmp_path / "run"
        code, stdout, _ = run(["train", *TRAIN_SMALL, "--mode", "no_dis", "--out", str(out)], capsys)
        assert code == 0 and "accuracy=" in stdout
        metrics = json.loads((out / "metrics.json").read_text())
        assert set(metrics) == {"epochs", "final", "bandit_trace", "config"}
        assert metrics["config"]["mode"] == "no_dis"
        assert metrics["bandit_trace"] == "bandit_trace.csv"
        assert len(metrics["epochs"]) == 2
        assert set(metrics["final"]) == {"accuracy", "macro_f1", "precision", "recall", "f1", "support", "confusion"}
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "train"
        assert set(manifest["hashes"]) == {str(out / n) for n in ("checkpoint.npz", "metrics.json", "bandit_trace.csv")}

    def test_seed_from_env(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("RDGCN_SEED", "5")
        run(["train", *TRAIN_SMALL, "--out", str(tmp_path / "e")], capsys)
        assert json.loads((tmp_path / "e" / "metrics.json").read_text())["config"]["seed"] == 5

    def test_dataset_files_and_evaluate(self, tmp_path, capsys):
        train, test = tmp_path / "train.jsonl", tmp_path / "test.jsonl"
        run(["synth", "--n", "120", "--seed", "1", "--out", str(train)], capsys)
        run(["synth", "--n", "30", "--seed", "2", "--out", str(test)], capsys)
        out = tmp_path / "run"
        code, _, _ = run(["train", "--dataset", str(train), "--test", str(test), "--epochs", "1", "--D", "8",
                          "--D-in", "8", "--out", str(out)], capsys)
        assert code == 0
        code, stdout, _ = run(["evaluate", "--checkpoint", str(out / "checkpoint.npz"), "--dataset", str(test)], capsys)
        assert code == 0
        report = json.loads(stdout)
        final = json.loads((out / "metrics.json").read_text())["final"]
        assert report == final

    def test_resume(self, tmp_path, capsys):
        run(["train", *TRAIN_SMALL, "--out", str(tmp_path / "a")], capsys)
        argv = ["train", *TRAIN_SMALL, "--out", str(tmp_path / "b"), "--resume", str(tmp_path / "a" / "checkpoint.npz")]
        assert run(argv, capsys)[0] == 0
        assert len(json.loads((tmp_path / "b" / "metrics.json").read_text())["epochs"]) == 4

    def test_missing_dataset(self, tmp_path, capsys):
        code, _, err = run(["train", "--out", str(tmp_path / "x")], capsys)
        assert code == 1 and "--dataset" in err


class TestGradCheck:
    def test_passes(self, capsys):
        code, out, _ = run(["grad-check", "--seed", "0"], capsys)
        assert code == 0
        names = [line.split("\t")[0] for line in out.splitlines()]
        assert names == ["embed", "proj", "gcn_w.0", "gcn_w.1", "type_H", "type_q", "clf_Z", "clf_b", "max"]

    def test_injected_fault(self, capsys):
        code, out, _ = run(["grad-check", "--inject-fault"], capsys)
        assert code == 2 and "FAIL" in out


class TestOracleDist:
    def test_clean(self, capsys):
        code, out, _ = run(["oracle-dist", "--trials", "200", "--seed", "1"], capsys)
        assert code == 0 and "mismatches=0" in out

    def test_single_token(self, capsys):
        assert run(["oracle-dist", "--max-n", "1", "--trials", "5"], capsys)[0] == 0

    def test_injected_off_by_one(self, capsys):
        code, out, _ = run(["oracle-dist", "--trials", "50", "--inject-fault"], capsys)
        assert code == 2 and "first_mismatch" in out
