"""Command line interface.

Subcommands cover the full workflow: ``fit`` a model on a JSON-lines
corpus, ``predict`` labels for held-out documents, ``evaluate``
classification quality and perplexity, ``terms`` to inspect topics,
``generate`` synthetic corpora, and ``bench`` to measure sampling
throughput across worker counts.

Reports are tab-separated files; pass ``--figures DIR`` where offered
to also render plots from the just-written report.  Usage errors exit
with status 2, runtime failures with 1.
"""

from __future__ import annotations

import functools
import logging
import statistics
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import __version__
from .corpus import (
    Corpus,
    CorpusFormatError,
    PreprocessOptions,
    SeedDictionary,
    load_corpus,
    load_stopwords,
    match_seeds,
    save_corpus,
    save_seed_dictionary,
)
from .evaluate import (
    generate_synthetic,
    micro_f1,
    seed_dictionary_from_distributions,
    synthetic_word_distributions,
    topic_frequency,
)
from .inference import perplexity, predict, save_predictions
from .model import ModelConfig, ModelFormatError, load_model, save_model
from .parallel import fit as fit_model
from .plots import (
    format_table,
    render_bench_figures,
    render_eval_figures,
    render_fit_figures,
    write_tsv,
)

_ERRORS = (
    CorpusFormatError,
    ModelFormatError,
    ValueError,
    RuntimeError,
    KeyError,
    OSError,
)


def _fail_on_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _ERRORS as e:
            if isinstance(e, KeyError) and e.args:
                msg = e.args[0]
            else:
                msg = str(e)
            click.echo(f"error: {msg}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.version_option(version=__version__)
@click.option("-v", "--verbose", count=True, help="Log progress to stderr.")
def main(verbose: int) -> None:
    """Topic modeling for short, ordered texts."""
    level = logging.WARNING if verbose == 0 else logging.INFO
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s"
    )


def _load_preprocessed(
    corpus_path: str,
    stopwords_path: str | None,
    dictionary: SeedDictionary | None,
    min_count: int,
    lowercase: bool = True,
) -> Corpus:
    stop = load_stopwords(stopwords_path) if stopwords_path else frozenset()
    options = PreprocessOptions(lowercase=lowercase, stopwords=stop)
    return load_corpus(
        corpus_path,
        options=options,
        seed_dictionary=dictionary,
        min_count=min_count,
    )


def _model_dictionary(state) -> SeedDictionary | None:
    if state.seed_patterns:
        return SeedDictionary(state.seed_patterns)
    return None


def _config_or_usage(**kwargs) -> ModelConfig:
    """Bad flag values are usage errors (exit 2), not runtime failures."""
    try:
        return ModelConfig(**kwargs)
    except ValueError as e:
        raise click.UsageError(str(e))


@main.command()
@click.argument("corpus_path", metavar="CORPUS", type=click.Path(dir_okay=False))
@click.option("--k", type=int, required=True, help="Total number of topics.")
@click.option("--seeds", "seeds_path", type=click.Path(dir_okay=False), help="Seed dictionary; omit for a fully unsupervised fit.")
@click.option("--stopwords", "stopwords_path", type=click.Path(dir_okay=False), help="Stop-word file, one word per line.")
@click.option("--min-count", default=10, show_default=True, help="Drop terms rarer than this.")
@click.option("--lowercase/--no-lowercase", default=True, show_default=True)
@click.option("--alpha", default=0.5, show_default=True, help="Base document-topic prior.")
@click.option("--beta", default=0.1, show_default=True, help="Topic-word smoothing.")
@click.option("--gamma", default=0.0, show_default=True, help="Carry-over weight from a document's chain predecessor.")
@click.option("--nu", default=0.0, show_default=True, help="Prior adjustment strength; 0 keeps priors symmetric.")
@click.option("--seed-weight", default=0.01, show_default=True, help="Pseudo-count weight per seed word, as a fraction of tokens/V.")
@click.option("--max-iter", default=2000, show_default=True, help="Total Gibbs sweeps (multiple of 10).")
@click.option("--batch-size", default=0.01, show_default=True, help="Fraction of documents per batch.")
@click.option("--workers", default=1, show_default=True, envvar="ASYMLDA_WORKERS", help="Sampling workers; env ASYMLDA_WORKERS sets the default.")
@click.option("--auto-stop/--no-auto-stop", default=False, show_default=True, help="Stop when the between-sweep change count rises.")
@click.option("--predict-iter", default=100, show_default=True, help="Default sweeps for later prediction.")
@click.option("--rng-seed", default=1, show_default=True)
@click.option("--model", "model_path", default="model.json", show_default=True, help="Where to write the fitted model.")
@click.option("--report", "report_path", default="fit_report.tsv", show_default=True)
@click.option("--figures", "figures_dir", type=click.Path(file_okay=False), help="Render figures from the report into this directory.")
@_fail_on_errors
def fit(
    corpus_path,
    k,
    seeds_path,
    stopwords_path,
    min_count,
    lowercase,
    alpha,
    beta,
    gamma,
    nu,
    seed_weight,
    max_iter,
    batch_size,
    workers,
    auto_stop,
    predict_iter,
    rng_seed,
    model_path,
    report_path,
    figures_dir,
):
    """Fit a model on CORPUS (JSON lines)."""
    config = _config_or_usage(
        k=k,
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        nu=nu,
        seed_weight=seed_weight,
        max_iter=max_iter,
        batch_size=batch_size,
        workers=workers,
        auto_stop=auto_stop,
        predict_iter=predict_iter,
        rng_seed=rng_seed,
    )
    dictionary = SeedDictionary.from_file(seeds_path) if seeds_path else None
    corpus = _load_preprocessed(
        corpus_path, stopwords_path, dictionary, min_count, lowercase
    )
    seeds = match_seeds(corpus.vocabulary, dictionary) if dictionary else None
    if seeds and seeds.n_seeded > k:
        raise click.UsageError(
            f"seed dictionary defines {seeds.n_seeded} topics but --k is {k}"
        )
    click.echo(f"fitting {corpus!r} with k={k}, workers={workers}", err=True)
    state, report = fit_model(corpus, config, seeds)
    save_model(state, model_path)
    write_tsv(report_path, report.to_rows())

    stopped = "stopped early" if report.converged_early else "ran to max_iter"
    click.echo(
        f"{report.iterations_run} sweeps in {report.elapsed_seconds:.1f}s "
        f"({stopped})"
    )
    rows = [("topic", "alpha", "top terms")]
    for ki, label in enumerate(state.topic_labels):
        terms = ", ".join(t for t, _ in state.top_terms(ki, 8))
        rows.append((label, f"{state.alpha_k[ki]:.3f}", terms))
    click.echo(format_table(rows))
    click.echo(f"model written to {model_path}")
    click.echo(f"report written to {report_path}")
    if figures_dir:
        for p in render_fit_figures(report_path, figures_dir):
            click.echo(f"figure written to {p}")


@main.command(name="predict")
@click.argument("model_path", metavar="MODEL", type=click.Path(dir_okay=False))
@click.argument("corpus_path", metavar="CORPUS", type=click.Path(dir_okay=False))
@click.option("--output", "output_path", default="predictions.jsonl", show_default=True)
@click.option("--predict-iter", type=int, default=None, help="Sweeps per document; defaults to the model's setting.")
@click.option("--seeded-only-labels", is_flag=True, help="Choose labels among seeded topics only.")
@click.option("--stopwords", "stopwords_path", type=click.Path(dir_okay=False), help="Stop-word file used at fit time.")
@click.option("--rng-seed", type=int, default=None, help="Defaults to the model's seed.")
@_fail_on_errors
def predict_cmd(
    model_path,
    corpus_path,
    output_path,
    predict_iter,
    seeded_only_labels,
    stopwords_path,
    rng_seed,
):
    """Label the documents of CORPUS with a fitted MODEL."""
    if predict_iter is not None and predict_iter < 1:
        raise click.UsageError("--predict-iter must be a positive integer")
    state = load_model(model_path)
    corpus = _load_preprocessed(
        corpus_path, stopwords_path, _model_dictionary(state), min_count=1
    )
    result = predict(
        state,
        corpus,
        iterations=predict_iter,
        rng=rng_seed,
        seeded_only=seeded_only_labels,
    )
    save_predictions(result, output_path)
    click.echo(f"{len(result.doc_ids)} predictions written to {output_path}")


@main.command()
@click.argument("model_path", metavar="MODEL", type=click.Path(dir_okay=False))
@click.argument("corpus_path", metavar="CORPUS", type=click.Path(dir_okay=False))
@click.option("--group-by", "group_key", default=None, help="Metadata key for frequency grouping, e.g. meta.year.")
@click.option("--report", "report_path", default="eval_report.tsv", show_default=True)
@click.option("--figures", "figures_dir", type=click.Path(file_okay=False), help="Render figures from the report into this directory.")
@click.option("--save-predictions", "predictions_path", type=click.Path(dir_okay=False), help="Also write the predictions used for scoring.")
@click.option("--predict-iter", type=int, default=None, help="Sweeps per document; defaults to the model's setting.")
@click.option("--seeded-only-labels", is_flag=True, help="Choose labels among seeded topics only.")
@click.option("--stopwords", "stopwords_path", type=click.Path(dir_okay=False), help="Stop-word file used at fit time.")
@click.option("--rng-seed", type=int, default=None, help="Defaults to the model's seed.")
@_fail_on_errors
def evaluate(
    model_path,
    corpus_path,
    group_key,
    report_path,
    figures_dir,
    predictions_path,
    predict_iter,
    seeded_only_labels,
    stopwords_path,
    rng_seed,
):
    """Score MODEL on CORPUS: classification, perplexity, frequencies.

    Classification scores need gold labels on the corpus records; the
    class set is the model's seeded topics (all topics for unseeded
    models).  Frequencies count predicted labels, optionally per
    metadata group.
    """
    if predict_iter is not None and predict_iter < 1:
        raise click.UsageError("--predict-iter must be a positive integer")
    state = load_model(model_path)
    corpus = _load_preprocessed(
        corpus_path, stopwords_path, _model_dictionary(state), min_count=1
    )
    result = predict(
        state,
        corpus,
        iterations=predict_iter,
        rng=rng_seed,
        seeded_only=seeded_only_labels,
    )
    if predictions_path:
        save_predictions(result, predictions_path)
    pred_map = result.as_mapping()

    rows: list[tuple[str, str]] = [
        ("n_documents", str(len(corpus))),
    ]
    gold = {d.id: d.label for d in corpus.documents if d.label is not None}
    if gold:
        if state.n_seeded:
            classes = state.topic_labels[: state.n_seeded]
        else:
            classes = list(state.topic_labels)
        f1 = micro_f1(pred_map, gold, classes)
        rows += f1.to_rows()
        table = [("class", "precision", "recall", "f1", "support")]
        for c in f1.classes:
            s = f1.per_class[c]
            table.append(
                (
                    c,
                    f"{s.precision:.3f}",
                    f"{s.recall:.3f}",
                    f"{s.f1:.3f}",
                    str(s.support),
                )
            )
        table.append(
            (
                "micro",
                f"{f1.micro_precision:.3f}",
                f"{f1.micro_recall:.3f}",
                f"{f1.micro_f1:.3f}",
                str(len(gold)),
            )
        )
        click.echo(format_table(table))
    else:
        click.echo(
            "no gold labels in the corpus; classification scores skipped",
            err=True,
        )

    ppl = perplexity(state, corpus, result.theta)
    rows.append(("perplexity", f"{ppl:.4f}"))
    click.echo(f"  perplexity  {ppl:.4f}")

    freq = topic_frequency(
        pred_map, corpus, group_key=group_key, labels=list(state.topic_labels)
    )
    for gi, g in enumerate(freq.groups):
        for li, lab in enumerate(freq.labels):
            rows.append((f"count[{g}][{lab}]", str(int(freq.counts[gi, li]))))
    click.echo(format_table(freq.to_rows()))

    write_tsv(report_path, rows)
    click.echo(f"report written to {report_path}")
    if figures_dir:
        for p in render_eval_figures(report_path, figures_dir):
            click.echo(f"figure written to {p}")


@main.command()
@click.argument("model_path", metavar="MODEL", type=click.Path(dir_okay=False))
@click.option("--n", default=10, show_default=True, help="Terms per topic.")
@click.option("--topic", "topic_label", default=None, help="Show a single topic by label.")
@click.option("--output", "output_path", type=click.Path(dir_okay=False), help="Also write the terms as TSV.")
@_fail_on_errors
def terms(model_path, n, topic_label, output_path):
    """Show the highest-probability terms of each topic."""
    state = load_model(model_path)
    if topic_label is not None:
        indices = [state.label_index(topic_label)]
    else:
        indices = list(range(state.n_topics))
    table = [("topic", "alpha", "term", "probability")]
    for k in indices:
        for term, prob in state.top_terms(k, n):
            table.append(
                (state.topic_labels[k], f"{state.alpha_k[k]:.3f}", term, f"{prob:.5f}")
            )
    click.echo(format_table(table))
    if output_path:
        write_tsv(output_path, table)
        click.echo(f"terms written to {output_path}")


@main.command()
@click.option("--output", "output_path", default="synthetic.jsonl", show_default=True)
@click.option("--seeds-out", "seeds_path", type=click.Path(dir_okay=False), help="Also write a matching seed dictionary.")
@click.option("--classes", default=6, show_default=True)
@click.option("--docs", default=10000, show_default=True)
@click.option("--proportions", default=None, help="Comma-separated class weights, e.g. 43,28,18,7,6,4.")
@click.option("--dedicated", default=60, show_default=True, help="Class-specific words per class.")
@click.option("--shared", default=200, show_default=True, help="Shared (signal-free) words.")
@click.option("--shared-mass", default=0.4, show_default=True, help="Probability mass on shared words.")
@click.option("--mean-length", default=12.8, show_default=True)
@click.option("--chain-length", default=5, show_default=True)
@click.option("--persistence", default=0.7, show_default=True, help="Probability the next document keeps the chain's class.")
@click.option("--mixture-weight", default=0.85, show_default=True, help="Fraction of tokens drawn from the document's own class.")
@click.option("--seed-words", default=5, show_default=True, help="Seed patterns per class in --seeds-out.")
@click.option("--year-range", default=None, help="lo:hi adds a meta.year per chain.")
@click.option("--rng-seed", default=0, show_default=True)
@_fail_on_errors
def generate(
    output_path,
    seeds_path,
    classes,
    docs,
    proportions,
    dedicated,
    shared,
    shared_mass,
    mean_length,
    chain_length,
    persistence,
    mixture_weight,
    seed_words,
    year_range,
    rng_seed,
):
    """Generate a labeled synthetic corpus of chained short documents."""
    if classes < 1 or docs < 1 or chain_length < 1:
        raise click.UsageError("--classes, --docs and --chain-length must be >= 1")
    if proportions:
        try:
            props = np.array([float(x) for x in proportions.split(",")])
        except ValueError:
            raise click.UsageError("--proportions takes comma-separated numbers")
        if props.shape[0] != classes:
            raise click.UsageError(
                f"--proportions lists {props.shape[0]} weights for "
                f"{classes} classes"
            )
    else:
        props = np.ones(classes)
    years = None
    if year_range:
        lo, _, hi = year_range.partition(":")
        try:
            years = (int(lo), int(hi))
        except ValueError:
            raise click.UsageError("--year-range takes lo:hi integers")
    terms, topic_word = synthetic_word_distributions(
        classes,
        n_dedicated=dedicated,
        n_shared=shared,
        shared_mass=shared_mass,
        rng=rng_seed,
    )
    labels = [f"class{c}" for c in range(classes)]
    data = generate_synthetic(
        props,
        topic_word,
        n_docs=docs,
        mean_length=mean_length,
        chain_length=chain_length,
        rng=rng_seed,
        labels=labels,
        terms=terms,
        persistence=persistence,
        mixture_weight=mixture_weight,
        year_range=years,
    )
    save_corpus(data.corpus, output_path)
    click.echo(
        f"{len(data.corpus)} documents, {data.corpus.total_tokens} tokens "
        f"written to {output_path}"
    )
    if seeds_path:
        sdict = seed_dictionary_from_distributions(
            topic_word, terms, labels, n_words=seed_words
        )
        save_seed_dictionary(sdict, seeds_path)
        click.echo(f"seed dictionary written to {seeds_path}")


@main.command()
@click.argument("corpus_path", metavar="CORPUS", type=click.Path(dir_okay=False))
@click.option("--workers", "workers_list", default="1,2,4,8", show_default=True, help="Comma-separated worker counts.")
@click.option("--k", "k_list", default="50", show_default=True, help="Comma-separated topic counts.")
@click.option("--reps", default=5, show_default=True, help="Fits per configuration.")
@click.option("--max-iter", default=100, show_default=True, help="Sweeps per fit.")
@click.option("--batch-size", default=0.01, show_default=True)
@click.option("--min-count", default=1, show_default=True)
@click.option("--rng-seed", default=1, show_default=True)
@click.option("--output", "output_path", default="bench.tsv", show_default=True)
@click.option("--figures", "figures_dir", type=click.Path(file_okay=False), help="Render a scaling figure from the output table.")
@_fail_on_errors
def bench(
    corpus_path,
    workers_list,
    k_list,
    reps,
    max_iter,
    batch_size,
    min_count,
    rng_seed,
    output_path,
    figures_dir,
):
    """Measure fitting wall-clock time across worker and topic counts."""
    try:
        worker_counts = [int(x) for x in workers_list.split(",")]
        k_counts = [int(x) for x in k_list.split(",")]
    except ValueError:
        raise click.UsageError("--workers and --k take comma-separated integers")
    if reps < 1:
        raise click.UsageError("--reps must be a positive integer")
    configs = {
        (k, workers): _config_or_usage(
            k=k,
            max_iter=max_iter,
            batch_size=batch_size,
            workers=workers,
            rng_seed=rng_seed,
        )
        for k in k_counts
        for workers in worker_counts
    }
    corpus = _load_preprocessed(corpus_path, None, None, min_count)

    # warm up the compiled kernels on a small slice so the first timed
    # fit does not pay compilation cost
    warm_docs = corpus.documents[: min(50, len(corpus))]
    warm = Corpus(warm_docs, corpus.vocabulary)
    if warm.total_tokens:
        warm_config = ModelConfig(
            k=2, max_iter=10, batch_size=1.0, workers=1, rng_seed=rng_seed
        )
        fit_model(warm, warm_config)

    rows: list[tuple[str, ...]] = [("k", "workers", "rep", "elapsed_seconds")]
    for k in k_counts:
        for workers in worker_counts:
            config = configs[(k, workers)]
            for rep in range(reps):
                rep_config = replace(config, rng_seed=rng_seed + rep)
                _, report = fit_model(corpus, rep_config)
                rows.append(
                    (str(k), str(workers), str(rep), f"{report.elapsed_seconds:.3f}")
                )
                click.echo(
                    f"k={k} workers={workers} rep={rep}: "
                    f"{report.elapsed_seconds:.2f}s",
                    err=True,
                )
    write_tsv(output_path, rows)

    table = [("k", "workers", "mean_seconds")]
    for k in k_counts:
        for workers in worker_counts:
            mean = statistics.mean(
                float(r[3])
                for r in rows[1:]
                if r[0] == str(k) and r[1] == str(workers)
            )
            table.append((str(k), str(workers), f"{mean:.3f}"))
    click.echo(format_table(table))
    click.echo(f"benchmark written to {output_path}")
    if figures_dir:
        for p in render_bench_figures(output_path, figures_dir):
            click.echo(f"figure written to {p}")


if __name__ == "__main__":
    main()
