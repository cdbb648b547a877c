import json

import numpy as np
import pytest

from omnikit import graph_store
from omnikit.cli import load_embedding_table, main


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def sampled(tmp_path):
    out = tmp_path / "graphs"
    assert run(["sample", "--n", 40, "--m", 3, "--rho", 0.25, "--seed", 4, "--out", out]) == 0
    return out


def test_sample_outputs_and_provenance(sampled):
    files = sorted(p.name for p in sampled.iterdir())
    assert files == [
        "graph_1.csv",
        "graph_2.csv",
        "graph_3.csv",
        "latents.csv",
        "manifest.json",
        "provenance.json",
    ]
    prov = json.loads((sampled / "provenance.json").read_text())
    assert prov["seed"] == 4
    assert prov["nu"] == [0.5, 0.5, 0.5]
    manifest = json.loads((sampled / "manifest.json").read_text())
    assert manifest["seed"] == 4
    assert manifest["command"] == "sample"
    assert len(manifest["outputs"]) == 5


def test_sample_reproducible_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["sample", "--n", 25, "--m", 2, "--rho", 0.5, "--seed", 9, "--out", out]) == 0
    for name in ("graph_1.csv", "graph_2.csv", "latents.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    csv_hashes_a = {k.split("/")[-1]: v for k, v in ma["outputs"].items() if k.endswith(".csv")}
    csv_hashes_b = {k.split("/")[-1]: v for k, v in mb["outputs"].items() if k.endswith(".csv")}
    assert csv_hashes_a == csv_hashes_b


def test_sample_rejects_negative_rho(tmp_path):
    assert run(["sample", "--n", 10, "--m", 2, "--rho", -0.5, "--out", tmp_path / "x"]) == 1


def test_omni_special_validate_build(tmp_path, sampled):
    weights = tmp_path / "c.json"
    alpha = tmp_path / "a.csv"
    assert run(["omni", "special", "--name", "M3minus", "--m", 3, "--out-weights", weights, "--out-alpha", alpha]) == 0
    got = graph_store.load_matrix(alpha)
    np.testing.assert_array_equal(got, [[2, 0, 1], [1, 2, 0], [0, 1, 2]])
    assert run(["omni", "validate", "--weights", weights]) == 0

    broken = tmp_path / "broken.json"
    tensor = json.loads(weights.read_text())
    tensor[0][1][0] = 0.9  # breaks the convex-combination sum
    broken.write_text(json.dumps(tensor))
    assert run(["omni", "validate", "--weights", broken]) == 1

    out = tmp_path / "M.csv"
    assert run(["omni", "build", "--graphs", sampled, "--weights", weights, "--out", out]) == 0
    mat = graph_store.load_matrix(out)
    assert mat.shape == (120, 120)
    assert np.abs(mat - mat.T).max() == 0


def test_embed_and_analyze(tmp_path, sampled):
    weights = tmp_path / "c.json"
    run(["omni", "special", "--name", "classical", "--m", 3, "--out-weights", weights])
    emb = tmp_path / "emb.csv"
    assert run(["embed", "--graphs", sampled, "--omni-weights", weights, "--d", 2, "--out", emb]) == 0
    coords, m, n = load_embedding_table(emb)
    assert (m, n) == (3, 40)
    assert coords.shape == (120, 2)
    assert (tmp_path / "emb.scree.png").exists()

    report_path = tmp_path / "report.json"
    truth = tmp_path / "truth.txt"
    truth.write_text("1 1 2\n")
    assert (
        run(["analyze", "--embedding", emb, "--cluster", 2, "--truth", truth, "--out", report_path]) == 0
    )
    report = json.loads(report_path.read_text())
    assert set(report) >= {"distances", "merges", "labels", "cmds", "scree", "ari", "k"}
    assert len(report["labels"]) == 3
    assert len(report["merges"]) == 2
    for name in ("distances.png", "dendrogram.png", "cmds_pairs.png", "cmds_scree.png"):
        assert (tmp_path / name).exists()


def test_embed_auto_dimension(tmp_path, sampled):
    weights = tmp_path / "c.json"
    run(["omni", "special", "--name", "classical", "--m", 3, "--out-weights", weights])
    emb = tmp_path / "emb_auto.csv"
    assert run(["embed", "--graphs", sampled, "--omni-weights", weights, "--d", "auto", "--out", emb, "--no-figures"]) == 0
    coords, _, _ = load_embedding_table(emb)
    assert coords.shape[1] >= 1


def test_corr_subcommand(tmp_path):
    alpha = tmp_path / "a.csv"
    rmat = tmp_path / "r.csv"
    out = tmp_path / "rhat.csv"
    run(["omni", "special", "--name", "M3minus", "--m", 3, "--out-alpha", alpha])
    graph_store.save_matrix(np.eye(3), rmat)
    assert run(["corr", "--alpha", alpha, "--R", rmat, "--out", out]) == 0
    got = graph_store.load_matrix(out)
    np.testing.assert_allclose(got[~np.eye(3, dtype=bool)], 2 / 3, atol=1e-12)


def test_bounds_json(capsys):
    assert run(["bounds", "--m", 30, "--rho", 0, "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert round(payload["lower_bound"], 2) == 0.54
    assert payload["upper_bound_valid"] is True


def test_bounds_prints_invalid_flag(capsys):
    assert run(["bounds", "--m", 3, "--rho", 0]) == 0
    out = capsys.readouterr().out
    assert "INVALID" in out


def test_corr2omni_cli(tmp_path):
    rmat = tmp_path / "r.csv"
    target = tmp_path / "t.csv"
    graph_store.save_matrix(np.eye(3), rmat)
    graph_store.save_matrix((2 / 3) * np.ones((3, 3)) + (1 / 3) * np.eye(3), target)
    out_alpha = tmp_path / "A.csv"
    log = tmp_path / "stress.csv"
    rc = run(
        [
            "corr2omni",
            "--R", rmat,
            "--target", target,
            "--womni",
            "--iters", 400,
            "--restarts", 3,
            "--seed", 7,
            "--out-alpha", out_alpha,
            "--out-c", tmp_path / "C.json",
            "--out-log", log,
        ]
    )
    assert rc == 0
    lines = log.read_text().splitlines()
    assert lines[0] == "iter,sigma,max_constraint_violation"
    sigmas = [float(ln.split(",")[1]) for ln in lines[1:]]
    assert all(a >= b - 1e-8 for a, b in zip(sigmas, sigmas[1:]))
    violations = [float(ln.split(",")[2]) for ln in lines[1:]]
    assert max(violations) <= 1e-8
    assert (tmp_path / "stress_trace.png").exists()
    assert (tmp_path / "alpha_heatmap.png").exists()
    alpha = graph_store.load_matrix(out_alpha)
    assert alpha.shape == (3, 3)
    np.testing.assert_allclose(alpha.sum(axis=1), 3.0, atol=1e-9)


def test_pipeline_replays_m3_experiment(tmp_path):
    config = {
        "out_dir": str(tmp_path / "artifacts"),
        "seed": 7,
        "stages": [
            {
                "stage": "corr2omni",
                "R": {"flat": 0.0, "m": 3},
                "target": {"flat": 2 / 3, "m": 3},
                "iters": 800,
                "restarts": 4,
                "out_alpha": "A.csv",
            }
        ],
    }
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config))
    assert run(["pipeline", "--config", cfg]) == 0
    alpha = graph_store.load_matrix(tmp_path / "artifacts" / "A.csv")
    reference = np.array([[2, 1, 0], [0, 2, 1], [1, 0, 2]], dtype=float)
    from itertools import permutations

    matches = any(
        np.abs(np.eye(3)[list(p)] @ reference @ np.eye(3)[list(p)].T - alpha).max() <= 1e-3
        for p in permutations(range(3))
    )
    assert matches
    assert (tmp_path / "artifacts" / "manifest.json").exists()


def test_pipeline_empty_stages(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"out_dir": str(tmp_path / "o"), "stages": []}))
    assert run(["pipeline", "--config", cfg]) == 0
    assert (tmp_path / "o" / "manifest.json").exists()


def test_pipeline_bad_path_names_stage(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "out_dir": str(tmp_path / "o"),
                "stages": [{"stage": "build", "graphs": "missing_dir", "weights": "w.json"}],
            }
        )
    )
    assert run(["pipeline", "--config", cfg]) == 2
    err = capsys.readouterr().err
    assert "stage 1 (build)" in err


def test_pipeline_unknown_stage(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"out_dir": str(tmp_path / "o"), "stages": [{"stage": "zap"}]}))
    assert run(["pipeline", "--config", cfg]) == 2


def test_pipeline_full_chain(tmp_path):
    config = {
        "out_dir": str(tmp_path / "chain"),
        "seed": 3,
        "stages": [
            {"stage": "sample", "n": 30, "m": 3, "rho": 0.3, "out": "graphs"},
            {"stage": "alignment", "graphs": "graphs", "out": "target.csv"},
            {
                "stage": "corr2omni",
                "R": "target.csv",
                "target": "target.csv",
                "iters": 60,
                "restarts": 1,
                "out_alpha": "A.csv",
                "out_c": "C.json",
            },
            {"stage": "embed", "graphs": "graphs", "weights": "C.json", "d": 2, "out": "embedding.csv"},
            {"stage": "analyze", "embedding": "embedding.csv", "cluster": 2, "out": "report.json"},
        ],
    }
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config))
    assert run(["pipeline", "--config", cfg, "--no-figures"]) == 0
    report = json.loads((tmp_path / "chain" / "report.json").read_text())
    assert report["m"] == 3


def test_repro_flat_bounds(tmp_path, capsys):
    assert run(["repro", "--experiment", "flat_bounds", "--out", tmp_path / "fb", "--seed", 1]) == 0
    out = capsys.readouterr().out
    assert "0.54" in out
    assert "PASS" in out
    assert (tmp_path / "fb" / "bounds.csv").exists()
    assert (tmp_path / "fb" / "bounds.png").exists()


def test_thread_cap_env(monkeypatch):
    from omnikit._parallel import parallel_map, worker_count

    monkeypatch.setenv("OMNIKIT_THREADS", "1")
    assert worker_count() == 1
    assert parallel_map(lambda x: x * x, [1, 2, 3]) == [1, 4, 9]
    monkeypatch.setenv("OMNIKIT_THREADS", "not-a-number")
    assert worker_count(2) >= 1


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as err:
        run(["bogus-command"])
    assert err.value.code == 2


def test_missing_input_exit_code(tmp_path):
    assert run(["corr", "--alpha", tmp_path / "nope.csv", "--R", tmp_path / "nope.csv", "--out", tmp_path / "o.csv"]) == 2


def test_alignment_target_is_correlation_like(tmp_path, sampled):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "out_dir": str(tmp_path / "al"),
                "stages": [
                    {"stage": "sample", "n": 60, "m": 3, "rho": 0.5, "out": "graphs", "seed": 5},
                    {"stage": "alignment", "graphs": "graphs", "out": "target.csv"},
                ],
            }
        )
    )
    assert run(["pipeline", "--config", cfg]) == 0
    target = graph_store.load_matrix(tmp_path / "al" / "target.csv")
    assert np.abs(target - target.T).max() == 0
    np.testing.assert_array_equal(np.diag(target), 1.0)
    off = target[~np.eye(3, dtype=bool)]
    assert (off > 0).all() and (off < 1).all()
