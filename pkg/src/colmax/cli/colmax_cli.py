import json
import logging
import os
from typing import Dict, List

import click
import numpy as np
import tabulate

from ..config import (
    DEFAULT_K,
    DEFAULT_MINING_THRESHOLD,
    DEFAULT_PCA_DIM,
    DEFAULT_SEED,
    OUTPUT_DIR,
    SEED_ENV,
    WORKERS_ENV,
    default_workers,
    load_config_file,
)
from ..curation import (
    MarginType,
    cluster_sizes,
    cluster_uniform_sample,
    gap_statistic_select_k,
    kmeans,
    mine_many,
    reduce_for_clustering,
    write_assignments,
    write_triplets,
)
from ..data import Qrels, RunResult, save_json
from ..errors import ColmaxError, IoFailure
from ..evaluation import (
    Pipeline,
    PlantedStructureConfig,
    TokenCountDistribution,
    ablation_from_published,
    ablation_markdown,
    generate_synthetic_benchmark,
    ndcg_at_k,
    run_ablation,
    run_pipeline,
    write_ablation_csv,
)
from ..evaluation.ablation import DEFAULT_PROJECTION_SAMPLE
from ..evaluation.synthetic import DEFAULT_QUERY_NOISE, TokenKind
from ..file_management import (
    ABLATION_CSV,
    ABLATION_MD,
    ASSIGNMENTS_FNAME,
    CORPUS_INDEX_FNAME,
    GAP_CURVE_FNAME,
    PROJECTION_FNAME,
    QUERIES_INDEX_FNAME,
    RUN_CONFIG_FNAME,
    SAMPLE_FNAME,
    mkdir,
    write_lines,
)
from ..logger import LOGGER_NAME, setup_logger, timestamp
from ..model import MultiVector, Precision, SimilarityKind
from ..store import (
    MODEL_PRESETS,
    apply_projection,
    build_index,
    estimate_model_storage,
    estimate_storage,
    fit_projection,
    load_index,
    storage_table,
    truncate_dims,
)
from ..training import MergeSpec, ParamSet, merge_models
from ..utils import rng_for, tabulate_config, tabulate_environ_vars

PROG = "colmax"

logger = logging.getLogger(LOGGER_NAME)

PRECISIONS = click.Choice([p.value for p in Precision], case_sensitive=False)


class ColmaxGroup(click.Group):
    """Maps domain errors to ``error: <code>: <message>`` and exit code 1."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ColmaxError as e:
            click.echo(f"error: {e.code}: {e}", err=True)
            ctx.exit(1)


def _load_config(ctx, param, value):
    """Feed a config file to click as defaults for the group and every
    subcommand (keys are option names, ``avg-tokens`` or ``avg_tokens``)."""
    if not value:
        return value
    try:
        flat = load_config_file(value)
    except IoFailure as e:
        raise click.BadParameter(str(e), ctx=ctx, param=param)
    ctx.default_map = {
        **flat,
        **{name: dict(flat) for name in ctx.command.commands},
    }
    return value


def _int_list(ctx, param, value):
    if value is None or isinstance(value, (list, tuple)):
        return value
    try:
        return [int(v) for v in str(value).split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma separated ints: {value}")


def _str_list(ctx, param, value):
    if value is None or isinstance(value, (list, tuple)):
        return value
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _start(ctx: click.Context) -> Dict:
    """Log (and return) the fully-resolved configuration of this run."""
    config = {**ctx.obj, **ctx.params}
    logger.info(
        f"{PROG} {ctx.info_name} [{timestamp()}]\n{tabulate_config(config)}"
    )
    return config


def _emit(ctx: click.Context, lines: List[str], payload):
    """One result per line, or a single JSON document with --format json."""
    if ctx.obj["format"] == "json":
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        for line in lines:
            click.echo(line)


def _read_multivectors(path: str) -> List[MultiVector]:
    """MultiVectors from a ``.cmx`` index or an ``.npz`` of
    ``doc_id -> (tokens x dim)`` arrays."""
    if path.endswith(".npz"):
        try:
            with np.load(path) as data:
                return [MultiVector(k, data[k]) for k in data.files]
        except (OSError, ValueError) as e:
            raise IoFailure(f"cannot read {path}: {e}") from e
    return list(load_index(path))


def _sample_rows(tokens: np.ndarray, n: int, seed: int) -> np.ndarray:
    if len(tokens) <= n:
        return tokens
    picks = rng_for(seed).choice(len(tokens), size=n, replace=False)
    return tokens[np.sort(picks)]


k_option = click.option(
    "--k",
    type=click.IntRange(min=1),
    default=DEFAULT_K,
    show_default=True,
)
out_dir_option = click.option(
    "--out",
    type=click.Path(file_okay=False),
    default=OUTPUT_DIR,
    show_default=True,
)


@click.group(cls=ColmaxGroup, name=PROG)
@click.option(
    "--config",
    type=click.Path(dir_okay=False),
    callback=_load_config,
    is_eager=True,
    expose_value=False,
    help="Flat key = value file of defaults (CLI flags take precedence)",
)
@click.option(
    "--seed",
    type=int,
    envvar=SEED_ENV,
    default=DEFAULT_SEED,
    show_default=True,
    help=f"Master seed (falls back to ${SEED_ENV})",
)
@click.option(
    "--workers",
    type=click.IntRange(min=1),
    envvar=WORKERS_ENV,
    default=default_workers,
    help="Parallel workers for search/evaluation (default: all cores)",
)
@click.option(
    "--format",
    type=click.Choice(["text", "json"]),
    default="text",
    show_default=True,
)
@click.option("-v", "--verbose", count=True, help="-v info, -vv debug")
@click.option(
    "--log-dir",
    type=click.Path(file_okay=False),
    default="",
    help="Also write colmax.log into this directory",
)
@click.pass_context
def cli(ctx, seed, workers, format, verbose, log_dir):
    """Late-interaction retrieval and data-curation toolkit."""
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(verbose, 2)]
    setup_logger(LOGGER_NAME, outdir=log_dir, level=level, clean=True)
    logger.debug(f"Environment:\n{tabulate_environ_vars()}")
    ctx.obj = dict(seed=seed, workers=workers, format=format)


@cli.command("gen-bench")
@out_dir_option
@click.option("--docs", type=int, default=10_000, show_default=True)
@click.option("--queries", type=int, default=200, show_default=True)
@click.option("--dim", type=int, default=64, show_default=True)
@click.option("--avg-tokens", type=float, default=50.0, show_default=True)
@click.option("--min-tokens", type=int, default=8, show_default=True)
@click.option("--fixed-tokens", is_flag=True, help="Every doc has avg-tokens")
@click.option("--topics", type=int, default=32, show_default=True)
@click.option("--topics-per-doc", type=int, default=2, show_default=True)
@click.option("--query-tokens", type=int, default=8, show_default=True)
@click.option(
    "--noise", type=float, default=DEFAULT_QUERY_NOISE, show_default=True
)
@click.option("--extra-positives", type=int, default=0, show_default=True)
@click.option(
    "--token-kind",
    type=click.Choice([k.value for k in TokenKind]),
    default=TokenKind.GAUSSIAN.value,
    show_default=True,
)
@click.pass_context
def gen_bench_cmd(
    ctx,
    out,
    docs,
    queries,
    dim,
    avg_tokens,
    min_tokens,
    fixed_tokens,
    topics,
    topics_per_doc,
    query_tokens,
    noise,
    extra_positives,
    token_kind,
):
    """Generate a synthetic benchmark (corpus, queries, qrels)."""
    config = _start(ctx)
    bench = generate_synthetic_benchmark(
        seed=ctx.obj["seed"],
        n_docs=docs,
        n_queries=queries,
        dim=dim,
        token_count_distribution=TokenCountDistribution(
            mean=avg_tokens,
            minimum=min_tokens,
            kind="fixed" if fixed_tokens else "poisson",
        ),
        planted_structure_config=PlantedStructureConfig(
            n_topics=topics,
            topics_per_doc=topics_per_doc,
            query_tokens=query_tokens,
            query_noise=noise,
            extra_positives=extra_positives,
            token_kind=token_kind,
        ),
    )
    paths = bench.save(out)
    save_json(os.path.join(out, RUN_CONFIG_FNAME), config)
    _emit(ctx, [f"{k} {v}" for k, v in paths.items()], paths)


@cli.command("build-index")
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option(
    "--precision", type=PRECISIONS, default="fp16", show_default=True
)
@click.option("--normalize/--no-normalize", default=True, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def build_index_cmd(ctx, corpus, precision, normalize, out):
    """Quantize a corpus (.cmx or .npz) into a sealed index file."""
    _start(ctx)
    index = build_index(_read_multivectors(corpus), precision, normalize, out)
    payload = dict(
        path=out,
        docs=index.doc_count,
        dim=index.dim,
        precision=index.precision.value,
        payload_bytes=index.nbytes_payload,
    )
    _emit(ctx, [" ".join(f"{k}={v}" for k, v in payload.items())], payload)


@cli.command("quantize")
@click.option("--index", type=click.Path(exists=True), required=True)
@click.option("--precision", type=PRECISIONS, required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def quantize_cmd(ctx, index, precision, out):
    """Re-encode an index at another precision and report the error."""
    _start(ctx)
    source = load_index(index)
    target = build_index(iter(source), precision, source.normalized, out)
    err = np.abs(
        target.tokens.astype(np.float64) - source.tokens.astype(np.float64)
    )
    payload = dict(
        path=out,
        precision=target.precision.value,
        payload_bytes=target.nbytes_payload,
        source_payload_bytes=source.nbytes_payload,
        max_abs_error=float(err.max()),
        mean_abs_error=float(err.mean()),
    )
    _emit(ctx, [f"{k} {v}" for k, v in payload.items()], payload)


@cli.command("search")
@click.option("--index", type=click.Path(exists=True), required=True)
@click.option("--queries", type=click.Path(exists=True), required=True)
@k_option
@click.option(
    "--sim",
    type=click.Choice([s.value for s in SimilarityKind]),
    default=SimilarityKind.DOT.value,
    show_default=True,
)
@click.option(
    "--pipeline",
    type=click.Choice([p.value for p in Pipeline]),
    default=Pipeline.MAXSIM.value,
    show_default=True,
)
@click.option(
    "--first-stage-k",
    type=click.IntRange(min=1),
    default=50,
    show_default=True,
)
@click.option("--out", type=click.Path(dir_okay=False), help="TREC run file")
@click.pass_context
def search_cmd(ctx, index, queries, k, sim, pipeline, first_stage_k, out):
    """Top-k retrieval for every query; prints TREC run lines."""
    _start(ctx)
    run = run_pipeline(
        _read_multivectors(queries),
        load_index(index),
        pipeline,
        k=k,
        first_stage_k=first_stage_k,
        sim=sim,
        workers=ctx.obj["workers"],
    )
    if out:
        run.save(out)
    lines = [
        f"{q} Q0 {d} {rank} {score:.6f} {pipeline}"
        for q in run
        for rank, (d, score) in enumerate(run[q], start=1)
    ]
    payload = {q: [dict(doc_id=d, score=s) for d, s in run[q]] for q in run}
    _emit(ctx, lines, payload)


@cli.command("evaluate")
@click.option("--run", type=click.Path(exists=True), required=True)
@click.option("--qrels", type=click.Path(exists=True), required=True)
@k_option
@click.option("--per-query", is_flag=True)
@click.pass_context
def evaluate_cmd(ctx, run, qrels, k, per_query):
    """NDCG@k of a TREC run against TREC qrels."""
    _start(ctx)
    report = ndcg_at_k(RunResult.load(run), Qrels.load(qrels), k)
    lines = [f"NDCG@{k} = {report.mean:.4f}"]
    if per_query:
        lines += [f"{q} {v:.4f}" for q, v in sorted(report.per_query.items())]
    _emit(ctx, lines, report.to_dict())


@cli.command("estimate-storage")
@click.option("--docs", type=int, default=1_000_000, show_default=True)
@click.option("--avg-tokens", type=float, default=None)
@click.option("--dim", type=int, default=None)
@click.option(
    "--precision", type=PRECISIONS, default="fp16", show_default=True
)
@click.option(
    "--model",
    type=click.Choice(sorted(MODEL_PRESETS)),
    default=None,
    help="Take dim and tokens per page from a known model",
)
@click.option("--table", is_flag=True, help="Storage for every known model")
@click.pass_context
def estimate_storage_cmd(ctx, docs, avg_tokens, dim, precision, model, table):
    """Bytes needed to store multi-vector embeddings (GiB)."""
    _start(ctx)
    if table:
        df = storage_table(n_docs=docs, precision=precision)
        text = tabulate.tabulate(
            df, headers="keys", tablefmt="github", showindex=False
        )
        _emit(ctx, text.splitlines(), df.to_dict(orient="records"))
        return
    if model:
        estimate = estimate_model_storage(model, docs, precision, dim)
    elif avg_tokens is None or dim is None:
        raise click.UsageError("give --avg-tokens and --dim, or --model")
    else:
        estimate = estimate_storage(docs, avg_tokens, dim, precision)
    _emit(ctx, [str(estimate)], estimate.to_dict())


@cli.command("mine-negatives")
@click.option("--index", type=click.Path(exists=True), required=True)
@click.option("--queries", type=click.Path(exists=True), required=True)
@click.option("--qrels", type=click.Path(exists=True), required=True)
@click.option("--k", type=int, default=4, show_default=True)
@click.option(
    "--threshold",
    type=float,
    default=DEFAULT_MINING_THRESHOLD,
    show_default=True,
)
@click.option(
    "--margin-type",
    type=click.Choice([m.value for m in MarginType]),
    default=MarginType.PERC.value,
    show_default=True,
)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def mine_negatives_cmd(
    ctx, index, queries, qrels, k, threshold, margin_type, out
):
    """Hard negatives per judged query, scored by MaxSim over the index."""
    _start(ctx)
    judgments = Qrels.load(qrels)
    judged = [
        q for q in _read_multivectors(queries) if judgments.relevant(q.id)
    ]
    triplets = mine_many(
        judged,
        {q.id: judgments.best_positive(q.id) for q in judged},
        load_index(index),
        k,
        threshold,
        margin_type,
        workers=ctx.obj["workers"],
    )
    write_triplets(out, triplets)
    lines = [
        " ".join([t.query_id, t.positive_id, *t.negative_ids])
        for t in triplets
    ]
    _emit(ctx, lines, [t.to_dict() for t in triplets])


@cli.command("sample-clusters")
@click.option("--index", type=click.Path(exists=True), required=True)
@click.option("--k", type=int, default=None, help="Skip the gap statistic")
@click.option("--k-max", type=int, default=20, show_default=True)
@click.option("--references", type=int, default=10, show_default=True)
@click.option(
    "--pca-dim",
    type=int,
    default=DEFAULT_PCA_DIM,
    show_default=True,
    help="0 clusters the pooled vectors without reduction",
)
@click.option(
    "--per-cluster",
    type=click.IntRange(min=1),
    default=10,
    show_default=True,
)
@click.option("--max-iters", type=int, default=300, show_default=True)
@out_dir_option
@click.option("--plot", is_flag=True, help="Save the gap curve figure")
@click.pass_context
def sample_clusters_cmd(
    ctx,
    index,
    k,
    k_max,
    references,
    pca_dim,
    per_cluster,
    max_iters,
    out,
    plot,
):
    """Cluster pooled doc embeddings and sample uniformly per cluster."""
    _start(ctx)
    seed = ctx.obj["seed"]
    handle = load_index(index)
    points = handle.pooled_matrix()
    if pca_dim:
        points = reduce_for_clustering(points, pca_dim)
    mkdir(out)
    if k is None:
        curve = gap_statistic_select_k(
            points, k_max, references, seed, max_iters, ctx.obj["workers"]
        )
        curve.save(os.path.join(out, GAP_CURVE_FNAME))
        if plot:
            from ..plotting import plot_gap_curve
            from ..plotting.labels import GAP_CURVE_PLOT

            plot_gap_curve(curve, os.path.join(out, GAP_CURVE_PLOT))
        k = curve.chosen_k
    assignments = kmeans(points, k, seed, max_iters).assignments(
        handle.doc_ids
    )
    write_assignments(os.path.join(out, ASSIGNMENTS_FNAME), assignments)
    sample = cluster_uniform_sample(assignments, per_cluster, seed)
    write_lines(os.path.join(out, SAMPLE_FNAME), (f"{d}\n" for d in sample))
    logger.info(f"Cluster sizes (k={k}): {cluster_sizes(assignments)}")
    _emit(ctx, sample, dict(k=k, sample=sample))


@cli.command("project")
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--queries", type=click.Path(exists=True), default=None)
@click.option("--dim", type=int, required=True)
@click.option(
    "--method",
    type=click.Choice(["pca", "truncate"]),
    default="pca",
    show_default=True,
)
@click.option(
    "--fit-sample",
    type=int,
    default=DEFAULT_PROJECTION_SAMPLE,
    show_default=True,
    help="Max corpus tokens used to fit the PCA projection",
)
@click.option(
    "--renormalize/--no-renormalize", default=True, show_default=True
)
@out_dir_option
@click.pass_context
def project_cmd(
    ctx, corpus, queries, dim, method, fit_sample, renormalize, out
):
    """Reduce the embedding dim of a corpus (and its queries)."""
    _start(ctx)
    docs = _read_multivectors(corpus)
    mkdir(out)
    paths = {}
    if method == "pca":
        tokens = np.concatenate([mv.tokens for mv in docs])
        projection = fit_projection(
            _sample_rows(tokens, fit_sample, ctx.obj["seed"]), dim
        )
        paths["projection"] = projection.save(
            os.path.join(out, PROJECTION_FNAME)
        )

        def reduce(mv):
            return apply_projection(mv, projection, renormalize)

    else:

        def reduce(mv):
            return truncate_dims(mv, dim, renormalize)

    paths["corpus"] = os.path.join(out, CORPUS_INDEX_FNAME)
    build_index(map(reduce, docs), Precision.FP32, False, paths["corpus"])
    if queries:
        paths["queries"] = os.path.join(out, QUERIES_INDEX_FNAME)
        qs = _read_multivectors(queries)
        build_index(map(reduce, qs), Precision.FP32, False, paths["queries"])
    _emit(ctx, [f"{k} {v}" for k, v in paths.items()], paths)


@cli.command("merge")
@click.argument(
    "members", nargs=-1, required=True, type=click.Path(exists=True)
)
@click.option("--weights", callback=_str_list, help="e.g. 0.5,0.5")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def merge_cmd(ctx, members, weights, out):
    """Weighted average of parameter sets (JSON manifest + fp32 blob)."""
    _start(ctx)
    params = [ParamSet.load(m) for m in members]
    if weights is None:
        spec = MergeSpec.uniform(params)
    else:
        try:
            values = [float(w) for w in weights]
        except ValueError:
            raise click.BadParameter(f"weights must be numbers: {weights}")
        spec = MergeSpec(params, values)
    merged = merge_models(spec)
    merged.save(out)
    payload = dict(path=out, members=len(params), weights=spec.weights)
    _emit(ctx, [f"{out} {len(merged)} parameters"], payload)


@cli.command("ablate")
@click.option("--corpus", type=click.Path(exists=True), default=None)
@click.option("--queries", type=click.Path(exists=True), default=None)
@click.option("--qrels", type=click.Path(exists=True), default=None)
@click.option("--dims", callback=_int_list, help="e.g. 64,32,16")
@click.option(
    "--precisions",
    callback=_str_list,
    default="fp32",
    show_default=True,
    help="e.g. fp32,int8,binary",
)
@k_option
@click.option("--storage-docs", type=int, default=1_000_000, show_default=True)
@click.option(
    "--published",
    type=click.Choice(sorted(MODEL_PRESETS)),
    default=None,
    help="Recompute percentages from published DIM:NDCG entries",
)
@click.option(
    "--entry", "entries", multiple=True, help="DIM:NDCG (with --published)"
)
@out_dir_option
@click.option("--plot", is_flag=True)
@click.pass_context
def ablate_cmd(
    ctx,
    corpus,
    queries,
    qrels,
    dims,
    precisions,
    k,
    storage_docs,
    published,
    entries,
    out,
    plot,
):
    """Storage vs NDCG for reduced dims / precisions (first = baseline)."""
    _start(ctx)
    if published:
        try:
            pairs = [(int(d), float(n)) for d, n in _split_entries(entries)]
        except ValueError:
            raise click.BadParameter(f"entries must be DIM:NDCG: {entries}")
        rows = ablation_from_published(published, pairs, storage_docs)
    else:
        if not (corpus and queries and qrels):
            raise click.UsageError("give --corpus, --queries and --qrels")
        docs = _read_multivectors(corpus)
        rows = run_ablation(
            docs,
            _read_multivectors(queries),
            Qrels.load(qrels),
            dims or [docs[0].dim],
            [Precision.parse(p) for p in precisions],
            k=k,
            seed=ctx.obj["seed"],
            storage_n_docs=storage_docs,
            workers=ctx.obj["workers"],
        )
    mkdir(out)
    write_ablation_csv(os.path.join(out, ABLATION_CSV), rows)
    markdown = ablation_markdown(rows)
    write_lines(os.path.join(out, ABLATION_MD), [markdown + "\n"])
    if plot:
        from ..plotting import plot_ablation
        from ..plotting.labels import ABLATION_PLOT

        plot_ablation(rows, os.path.join(out, ABLATION_PLOT))
    _emit(ctx, markdown.splitlines(), [r.to_record() for r in rows])


def _split_entries(entries):
    for e in entries:
        dim, sep, ndcg = e.partition(":")
        if not sep:
            raise ValueError(e)
        yield dim, ndcg


def main():
    cli(prog_name=PROG)


if __name__ == "__main__":
    main()
