import json

import numpy as np
import pytest

from twosdr.cli import main
from twosdr.io import read_matrix_csv, read_stack, write_matrix_csv
from twosdr.rng import make_rng


def run(*argv):
    return main(list(argv))


class TestUsage:
    def test_no_args_exits_2(self, capsys):
        with pytest.raises(SystemExit) as e:
            run()
        assert e.value.code == 2

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as e:
            run("synth", "--frobnicate")
        assert e.value.code == 2

    def test_missing_file_is_runtime_error(self, tmp_path, capsys):
        code = run("fit", "--in", str(tmp_path / "nope.stk"),
                   "--out", str(tmp_path / "m.npz"))
        assert code in (1, 2)


class TestEndToEnd:
    def test_synth_fit_metrics_pipeline(self, tmp_path, capsys):
        stack = tmp_path / "d.stk"
        model = tmp_path / "m.npz"
        report = tmp_path / "metrics.json"
        assert run("synth", "--model", "hmpca", "--sigma2", "1.1",
                   "--n", "150", "--p", "16", "--q", "16",
                   "--seed", "7", "--out", str(stack)) == 0
        truth = tmp_path / "d.truth.stk"
        assert truth.exists()
        assert (tmp_path / "d.stk.manifest.json").exists()
        assert run("fit", "--in", str(stack), "--out", str(model),
                   "--p-u", "10", "--q-u", "10") == 0
        assert run("metrics", "--model", str(model), "--in", str(stack),
                   "--truth", str(truth), "--out", str(report)) == 0
        payload = json.loads(report.read_text())
        assert "mse" in payload and payload["mse"] >= 0
        noisy_mse = float(np.mean((read_stack(stack) - read_stack(truth)) ** 2))
        assert payload["mse"] < noisy_mse

    def test_reconstruct_writes_stack(self, tmp_path):
        stack = tmp_path / "d.stk"
        model = tmp_path / "m.npz"
        recon = tmp_path / "r.stk"
        run("synth", "--model", "hmpca", "--n", "120", "--p", "14",
            "--q", "14", "--seed", "1", "--out", str(stack))
        run("fit", "--in", str(stack), "--out", str(model),
            "--p-u", "10", "--q-u", "10")
        assert run("reconstruct", "--in", str(stack), "--model", str(model),
                   "--out", str(recon)) == 0
        assert read_stack(recon).shape == read_stack(stack).shape

    def test_select_reports_ranks(self, tmp_path, capsys):
        stack = tmp_path / "d.stk"
        run("synth", "--model", "hmpca", "--n", "120", "--p", "14",
            "--q", "14", "--seed", "2", "--out", str(stack))
        assert run("select", "--in", str(stack),
                   "--p-u", "10", "--q-u", "10") == 0
        payload = json.loads(capsys.readouterr().out)
        assert "ranks" in payload and len(payload["ranks"]) == 3
        assert "sure" in payload and "gic" in payload

    def test_cluster_and_embed(self, tmp_path):
        rng = make_rng(5)
        pts = np.vstack([rng.standard_normal((20, 2)),
                         rng.standard_normal((20, 2)) + 12.0])
        scores_csv = tmp_path / "scores.csv"
        write_matrix_csv(pts, scores_csv)
        labels = tmp_path / "labels.csv"
        scan = tmp_path / "scan.csv"
        assert run("cluster", "--in", str(scores_csv), "--out", str(labels),
                   "--scan-out", str(scan), "--min-size", "5") == 0
        lab = np.loadtxt(labels, dtype=int)
        assert lab.shape == (40,) and len(np.unique(lab)) >= 2
        assert scan.exists()
        coords = tmp_path / "coords.csv"
        assert run("embed", "--in", str(scores_csv), "--out", str(coords),
                   "--perplexity", "8", "--iters", "60") == 0
        assert read_matrix_csv(coords).shape == (40, 2)

    def test_bench_table2_csv(self, tmp_path):
        out = tmp_path / "t2.csv"
        assert run("--threads", "1", "bench", "table2", "--n", "120",
                   "--reps", "2", "--out", str(out)) == 0
        header = out.read_text().splitlines()[0]
        for col in ("accuracy_gic", "accuracy_aic", "accuracy_bic"):
            assert col in header

    def test_manifest_reproducibility_fields(self, tmp_path):
        stack = tmp_path / "d.stk"
        run("synth", "--model", "pca", "--n", "20", "--p", "8", "--q", "8",
            "--seed", "9", "--out", str(stack))
        manifest = json.loads((tmp_path / "d.stk.manifest.json").read_text())
        assert manifest["arguments"]["seed"] == 9
        assert "versions" in manifest and "rng" in manifest
