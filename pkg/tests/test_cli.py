import json
import os

import pandas as pd
import pytest
from click.testing import CliRunner

from colmax.cli.colmax_cli import cli
from colmax.logger import LOG_FNAME
from colmax.training import ParamSet


@pytest.fixture
def run_cli():
    runner = CliRunner()

    def _run(*args, **kwargs):
        return runner.invoke(
            cli, ["--workers", "1", *map(str, args)], **kwargs
        )

    return _run


@pytest.fixture
def bench_dir(run_cli, tmp_path):
    out = tmp_path / "bench"
    result = run_cli(
        "--seed",
        "3",
        "gen-bench",
        "--out",
        out,
        "--docs",
        200,
        "--queries",
        10,
        "--dim",
        16,
        "--avg-tokens",
        10,
        "--noise",
        0,
    )
    assert result.exit_code == 0, result.output
    return out


def test_estimate_storage(run_cli):
    result = run_cli(
        "estimate-storage",
        "--docs",
        1_000_000,
        "--avg-tokens",
        773,
        "--dim",
        4096,
        "--precision",
        "fp16",
    )
    assert result.exit_code == 0, result.output
    assert result.output.strip() == "5897.5 GiB"


def test_estimate_storage_for_model(run_cli):
    result = run_cli(
        "--format",
        "json",
        "estimate-storage",
        "--model",
        "nemotron-colembed-vl-8b-v2",
        "--dim",
        512,
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["total_gib"] == 737.2
    assert payload["floats_per_image"] == 395776


def test_estimate_storage_table(run_cli):
    result = run_cli("estimate-storage", "--table")
    assert result.exit_code == 0, result.output
    assert "13183.6" in result.output
    assert "llama-nemotron-embed-vl-1b-v2" in result.output


def test_usage_errors_exit_2(run_cli):
    assert run_cli("estimate-storage", "--bogus").exit_code == 2
    assert run_cli("estimate-storage", "--dim", 8).exit_code == 2
    assert run_cli("no-such-command").exit_code == 2


def test_domain_errors_exit_1(run_cli):
    result = run_cli(
        "estimate-storage", "--docs", 0, "--avg-tokens", 10, "--dim", 8
    )
    assert result.exit_code == 1
    assert "error: InvalidArgument:" in result.output


def test_log_file_records_resolved_config(run_cli, tmp_path):
    log_dir = tmp_path / "logs"
    result = run_cli(
        "--log-dir",
        log_dir,
        "estimate-storage",
        "--avg-tokens",
        773,
        "--dim",
        4096,
    )
    assert result.exit_code == 0, result.output
    assert "avg_tokens" not in result.output
    log = (log_dir / LOG_FNAME).read_text()
    assert "estimate-storage" in log
    for key in ("avg_tokens", "dim", "precision", "seed", "workers"):
        assert key in log


def test_malformed_trec_file_is_a_domain_error(run_cli, tmp_path):
    qrels = tmp_path / "qrels.txt"
    qrels.write_text("q1 0 d1 high\n")
    run_file = tmp_path / "run.txt"
    run_file.write_text("q1 Q0 d1 1 0.5 colmax\n")
    result = run_cli("evaluate", "--run", run_file, "--qrels", qrels)
    assert result.exit_code == 1
    assert "error: InvalidArgument:" in result.output
    assert "qrels.txt:1: rel" in result.output

    qrels.write_text("q1 0 d1 1\n")
    run_file.write_text("q1 Q0 d1 1 abc colmax\n")
    result = run_cli("evaluate", "--run", run_file, "--qrels", qrels)
    assert result.exit_code == 1
    assert "run.txt:1: score" in result.output


def test_end_to_end_zero_noise(run_cli, bench_dir, tmp_path):
    index = tmp_path / "index.cmx"
    result = run_cli(
        "build-index",
        "--corpus",
        bench_dir / "corpus.cmx",
        "--precision",
        "fp32",
        "--out",
        index,
    )
    assert result.exit_code == 0, result.output
    assert "docs=200" in result.output

    run_file = tmp_path / "run.txt"
    result = run_cli(
        "search",
        "--index",
        index,
        "--queries",
        bench_dir / "queries.cmx",
        "--k",
        10,
        "--out",
        run_file,
    )
    assert result.exit_code == 0, result.output
    lines = result.output.strip().splitlines()
    assert len(lines) == 100
    assert lines[0].split()[:4] == ["q0", "Q0", lines[0].split()[2], "1"]

    result = run_cli(
        "evaluate", "--run", run_file, "--qrels", bench_dir / "qrels.txt"
    )
    assert result.exit_code == 0, result.output
    assert result.output.strip() == "NDCG@10 = 1.0000"


def test_dim_mismatch_is_reported(run_cli, bench_dir, tmp_path):
    small = tmp_path / "small"
    result = run_cli(
        "project",
        "--corpus",
        bench_dir / "corpus.cmx",
        "--dim",
        8,
        "--method",
        "truncate",
        "--out",
        small,
    )
    assert result.exit_code == 0, result.output
    result = run_cli(
        "search",
        "--index",
        small / "corpus.cmx",
        "--queries",
        bench_dir / "queries.cmx",
    )
    assert result.exit_code == 1
    assert "error: DimMismatch:" in result.output


def test_config_file_defaults_and_precedence(run_cli, bench_dir, tmp_path):
    cfg = tmp_path / "colmax.ini"
    cfg.write_text("[search]\nk = 3\npipeline = rerank\n")
    args = [
        "search",
        "--index",
        bench_dir / "corpus.cmx",
        "--queries",
        bench_dir / "queries.cmx",
    ]
    from_file = run_cli("--config", cfg, *args)
    assert from_file.exit_code == 0, from_file.output
    assert len(from_file.output.strip().splitlines()) == 30
    assert from_file.output.split()[5] == "rerank"
    from_flag = run_cli("--config", cfg, *args, "--k", 5)
    assert len(from_flag.output.strip().splitlines()) == 50


def test_seed_from_environment(run_cli, tmp_path):
    paths = []
    for name, env in [("a", "7"), ("b", "7"), ("c", "8")]:
        out = tmp_path / name
        result = run_cli(
            "gen-bench",
            "--out",
            out,
            "--docs",
            50,
            "--queries",
            5,
            "--dim",
            8,
            "--avg-tokens",
            9,
            env={"COLMAX_SEED": env},
        )
        assert result.exit_code == 0, result.output
        paths.append((out / "corpus.cmx").read_bytes())
    assert paths[0] == paths[1]
    assert paths[0] != paths[2]


def test_quantize_and_json_output(run_cli, bench_dir, tmp_path):
    result = run_cli(
        "--format",
        "json",
        "quantize",
        "--index",
        bench_dir / "corpus.cmx",
        "--precision",
        "int8",
        "--out",
        tmp_path / "int8.cmx",
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["precision"] == "int8"
    assert payload["payload_bytes"] < payload["source_payload_bytes"]
    assert 0 < payload["max_abs_error"] < 0.01


def test_mine_negatives(run_cli, bench_dir, tmp_path):
    out = tmp_path / "triplets.jsonl"
    result = run_cli(
        "mine-negatives",
        "--index",
        bench_dir / "corpus.cmx",
        "--queries",
        bench_dir / "queries.cmx",
        "--qrels",
        bench_dir / "qrels.txt",
        "--k",
        3,
        "--out",
        out,
    )
    assert result.exit_code == 0, result.output
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(rows) == 10
    for row in rows:
        assert len(row["negative_ids"]) == 3
        assert row["positive_id"] not in row["negative_ids"]


def test_sample_clusters(run_cli, bench_dir, tmp_path):
    out = tmp_path / "clusters"
    result = run_cli(
        "sample-clusters",
        "--index",
        bench_dir / "corpus.cmx",
        "--k-max",
        4,
        "--references",
        5,
        "--pca-dim",
        8,
        "--per-cluster",
        3,
        "--out",
        out,
    )
    assert result.exit_code == 0, result.output
    assignments = pd.read_csv(out / "cluster_assignments.csv")
    assert len(assignments) == 200
    gap = pd.read_csv(out / "gap_curve.csv")
    assert list(gap.k) == [1, 2, 3, 4]
    sample = (out / "sampled_doc_ids.txt").read_text().split()
    assert len(sample) == len(set(sample)) <= 12


def test_project_pca_writes_projection(run_cli, bench_dir, tmp_path):
    out = tmp_path / "pca"
    result = run_cli(
        "project",
        "--corpus",
        bench_dir / "corpus.cmx",
        "--queries",
        bench_dir / "queries.cmx",
        "--dim",
        4,
        "--out",
        out,
    )
    assert result.exit_code == 0, result.output
    for fname in ["projection.npz", "corpus.cmx", "queries.cmx"]:
        assert os.path.isfile(out / fname)


def test_merge(run_cli, tmp_path):
    a = ParamSet({"w": [2.0], "b": [0.0]}).save(str(tmp_path / "a.json"))
    b = ParamSet({"w": [4.0], "b": [2.0]}).save(str(tmp_path / "b.json"))
    out = tmp_path / "merged.json"
    result = run_cli("merge", a, b, "--weights", "1,3", "--out", out)
    assert result.exit_code == 0, result.output
    merged = ParamSet.load(str(out))
    assert merged["w"].tolist() == [3.5]
    assert merged["b"].tolist() == [1.5]
    bad = run_cli("merge", a, b, "--weights", "1,x", "--out", out)
    assert bad.exit_code == 2


def test_ablate_published(run_cli, tmp_path):
    out = tmp_path / "ablation"
    result = run_cli(
        "ablate",
        "--published",
        "nemotron-colembed-vl-8b-v2",
        "--entry",
        "4096:62.29",
        "--entry",
        "512:59.81",
        "--entry",
        "128:59.40",
        "--out",
        out,
    )
    assert result.exit_code == 0, result.output
    df = pd.read_csv(out / "ablation.csv")
    assert df.storage_pct.tolist() == [100, 13, 3]
    assert df.ndcg_pct.tolist() == [100.0, 96.02, 95.36]
    assert df.storage_gib.tolist() == [5897.5, 737.2, 184.3]
    assert "96.02%" in (out / "ablation.md").read_text()


def test_ablate_benchmark(run_cli, bench_dir, tmp_path):
    out = tmp_path / "ablation"
    result = run_cli(
        "ablate",
        "--corpus",
        bench_dir / "corpus.cmx",
        "--queries",
        bench_dir / "queries.cmx",
        "--qrels",
        bench_dir / "qrels.txt",
        "--dims",
        "16",
        "--precisions",
        "fp32,binary",
        "--out",
        out,
        "--plot",
    )
    assert result.exit_code == 0, result.output
    df = pd.read_csv(out / "ablation.csv")
    assert df.label.tolist() == ["16-fp32", "16-binary"]
    assert df.ndcg_pct[0] == 100.0
    assert df.storage_pct.tolist() == [100, 3]
    assert os.path.isfile(out / "ablation.png")
