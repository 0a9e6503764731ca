"""End-to-end acceptance checks, one test per numbered criterion.

Each test prints one ``criterion N: PASS/FAIL (...)`` line before
asserting, so a plain ``pytest -s tests/test_acceptance.py`` reads as a
checklist.  Criterion 6 measures thread scaling and is skipped on
hosts with fewer than 8 cores, where the ratio it bounds is
meaningless.
"""

import itertools
import os
import time

import numpy as np
import pytest
from scipy.special import gammaln, logsumexp

from asymlda.corpus import match_seeds
from asymlda.evaluate import (
    generate_synthetic,
    micro_f1,
    seed_dictionary_from_distributions,
    synthetic_word_distributions,
    topic_frequency,
)
from asymlda.inference import perplexity, predict
from asymlda.model import ModelConfig
from asymlda.parallel import fit
from asymlda.sampler import adjust_priors, fit_serial, initialize, sweep

from conftest import build_state, make_corpus


def _line(num, ok, detail):
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")


# Imbalanced six-class benchmark shared by criteria 4 and 5.  The
# class shares follow a long-tailed 43/28/18/7/6/4 split so the three
# rare classes sit within a few percent of each other.
PROPS = np.array([43.0, 28.0, 18.0, 7.0, 6.0, 4.0])


def _imbalanced_data(seed):
    terms, topic_word = synthetic_word_distributions(
        6, n_dedicated=60, n_shared=200, shared_mass=0.4, rng=seed
    )
    data = generate_synthetic(
        PROPS,
        topic_word,
        n_docs=10_000,
        mean_length=12.8,
        chain_length=5,
        rng=seed,
        terms=terms,
        persistence=0.7,
        mixture_weight=0.78,
    )
    sdict = seed_dictionary_from_distributions(
        topic_word, terms, data.labels, n_words=15
    )
    seeds = match_seeds(data.corpus.vocabulary, sdict)
    return data, seeds


def _imbalanced_fit(data, seeds, seed, nu, max_iter, auto_stop=False):
    config = ModelConfig(
        k=8,
        alpha=0.5,
        beta=0.1,
        gamma=0.5,
        nu=nu,
        seed_weight=0.5,
        max_iter=max_iter,
        batch_size=0.01,
        workers=1,
        rng_seed=seed,
        auto_stop=auto_stop,
    )
    state, report = fit(data.corpus, config, seeds)
    pred = predict(state, data.corpus, iterations=100, rng=seed)
    f1 = micro_f1(pred.as_mapping(), data.gold, data.labels).micro_f1
    return state, report, f1


def _enumerated_coassignment(doc_word_ids, v, k, alpha, beta):
    """Pairwise P(z_i == z_j) from the exact collapsed posterior.

    Sums the unnormalized posterior over all k^N assignments; terms
    constant in z are dropped.
    """
    token_doc = [d for d, ws in enumerate(doc_word_ids) for _ in ws]
    token_word = [w for ws in doc_word_ids for w in ws]
    n = len(token_word)
    n_docs = len(doc_word_ids)
    assigns = list(itertools.product(range(k), repeat=n))
    logw = np.empty(len(assigns))
    for idx, z in enumerate(assigns):
        doc_topic = np.zeros((n_docs, k))
        word_topic = np.zeros((k, v))
        for i in range(n):
            doc_topic[token_doc[i], z[i]] += 1
            word_topic[z[i], token_word[i]] += 1
        logw[idx] = (
            gammaln(alpha + doc_topic).sum()
            + gammaln(beta + word_topic).sum()
            - gammaln(v * beta + word_topic.sum(axis=1)).sum()
        )
    post = np.exp(logw - logsumexp(logw))
    co = np.zeros((n, n))
    for idx, z in enumerate(assigns):
        za = np.asarray(z)
        co += post[idx] * (za[:, None] == za[None, :])
    return co


def test_criterion_1_gibbs_oracle():
    cases = [
        ("a", [[0, 1], [0, 1]], 2, 0.5, 0.5),
        ("b", [[0, 0, 1, 2], [1, 2, 3], [0, 3, 3]], 4, 0.5, 0.1),
        ("c", [[0, 1, 0, 1]], 2, 1.0, 0.2),
    ]
    errs, slowest = {}, 0.0
    for name, docs, v, alpha, beta in cases:
        t0 = time.perf_counter()
        oracle = _enumerated_coassignment(docs, v, 2, alpha, beta)
        corpus = make_corpus(docs, n_terms=v)
        config = ModelConfig(
            k=2, alpha=alpha, beta=beta, gamma=0.0, nu=0.0, rng_seed=11
        )
        state = initialize(corpus, config)
        for _ in range(2_000):
            sweep(state)
        acc = np.zeros_like(oracle)
        samples = 200_000
        for _ in range(samples):
            sweep(state)
            acc += state.z[:, None] == state.z[None, :]
        elapsed = time.perf_counter() - t0
        slowest = max(slowest, elapsed)
        iu = np.triu_indices(oracle.shape[0], 1)
        errs[name] = np.abs(acc[iu] / samples - oracle[iu]).max()
    ok = all(e <= 0.02 for e in errs.values()) and slowest < 60.0
    detail = (
        ", ".join(f"{n} max|err|={e:.4f}" for n, e in errs.items())
        + f", each <= 0.02, slowest corpus {slowest:.1f}s"
    )
    _line(1, ok, detail)
    assert ok, detail


def _reduction_data():
    terms, topic_word = synthetic_word_distributions(
        3, n_dedicated=30, n_shared=60, shared_mass=0.3, rng=2
    )
    data = generate_synthetic(
        np.array([5.0, 3.0, 2.0]),
        topic_word,
        n_docs=800,
        mean_length=10.0,
        chain_length=4,
        rng=2,
        terms=terms,
        persistence=0.7,
        mixture_weight=0.8,
    )
    sdict = seed_dictionary_from_distributions(
        topic_word, terms, data.labels, n_words=8
    )
    return data, match_seeds(data.corpus.vocabulary, sdict)


def test_criterion_2_reduction_identities():
    data, seeds = _reduction_data()

    def config(**kw):
        base = dict(
            k=5,
            alpha=0.5,
            beta=0.1,
            gamma=0.5,
            nu=0.3,
            seed_weight=0.5,
            max_iter=50,
            batch_size=0.02,
            workers=1,
            rng_seed=3,
            auto_stop=False,
        )
        base.update(kw)
        return ModelConfig(**base)

    s_a, r_a = fit_serial(data.corpus, config(), seeds)
    s_b, r_b = fit(data.corpus, config(), seeds)
    serial_ok = (
        s_a.digest() == s_b.digest()
        and r_a.delta_history == r_b.delta_history
        and np.array_equal(r_a.alpha_trajectory, r_b.alpha_trajectory)
    )

    s_plain, r_plain = fit(data.corpus, config(nu=0.0, gamma=0.0), None)
    plain_ok = bool(
        np.all(r_plain.alpha_trajectory == 0.5)
        and np.all(s_plain.alpha_k == 0.5)
    )

    rerun_ok = True
    for workers in (1, 4):
        runs = [
            fit(data.corpus, config(workers=workers, rng_seed=7), seeds)
            for _ in range(2)
        ]
        rerun_ok &= runs[0][0].digest() == runs[1][0].digest()
        rerun_ok &= runs[0][1].delta_history == runs[1][1].delta_history

    ok = serial_ok and plain_ok and rerun_ok
    detail = (
        f"serial == 1-worker fit: {serial_ok}; alpha stays flat with "
        f"nu=0, gamma=0, no seeds: {plain_ok}; same-seed reruns "
        f"bit-identical at workers 1 and 4: {rerun_ok}"
    )
    _line(2, ok, detail)
    assert ok, detail


def test_criterion_3_prior_conservation():
    # Step sizes are capped at half the slack nu*alpha, as in a real
    # fit where eps_k = nu*alpha/M_k and net block deltas stay well
    # below M_k.  Individual priors still hit the floor regularly.
    rng = np.random.default_rng(7)
    worst_drift, worst_floor = 0.0, 0.0
    for nu in (0.1, 0.3, 0.6, 0.9):
        for _ in range(4):
            k = int(rng.integers(2, 13))
            alpha = float(rng.uniform(0.05, 2.0))
            floor = (1.0 - nu) * alpha
            alpha_k = floor + nu * k * alpha * rng.dirichlet(np.ones(k))
            state = build_state(
                np.zeros((k, 4)), np.zeros((1, k)), alpha=alpha_k, nu=nu
            )
            state.eps_k[:] = rng.uniform(0.1, 1.0, size=k) * (
                nu * alpha / 6_000.0
            )
            for _ in range(25):
                deltas = rng.integers(-3000, 3001, size=k).astype(np.float64)
                adjust_priors(state, deltas)
                drift = abs(state.alpha_k.sum() - k * alpha)
                breach = max(0.0, floor - state.alpha_k.min())
                worst_drift = max(worst_drift, drift / (k * alpha))
                worst_floor = max(worst_floor, breach)
                assert drift <= 1e-9 * k * alpha
                assert state.alpha_k.min() >= floor - 1e-12
    ok = worst_drift <= 1e-9 and worst_floor <= 1e-12
    detail = (
        f"100 steps on 4 random states at each nu in (0.1, 0.3, 0.6, "
        f"0.9): worst relative sum drift {worst_drift:.2e} <= 1e-9, "
        f"worst floor breach {worst_floor:.2e} <= 1e-12"
    )
    _line(3, ok, detail)
    assert ok, detail


def test_criterion_4_imbalance_recovery():
    gaps, rank_hits = [], 0
    for seed in range(5):
        data, seeds = _imbalanced_data(seed)
        state, _, f1_adjusted = _imbalanced_fit(data, seeds, seed, 0.3, 150)
        _, _, f1_flat = _imbalanced_fit(data, seeds, seed, 0.0, 150)
        gaps.append(f1_adjusted - f1_flat)
        rank_hits += np.argsort(-state.alpha_k[:6]).tolist() == list(range(6))
    mean_gap = float(np.mean(gaps))
    ok = mean_gap >= 0.03 and rank_hits >= 4
    detail = (
        f"mean F1 gap {mean_gap:+.4f} >= 0.03, fitted alpha matches the "
        f"gold frequency order in {rank_hits}/5 seeds (need 4)"
    )
    _line(4, ok, detail)
    assert ok, detail


def test_criterion_5_convergence_detection():
    successes = 0
    stops, diffs = [], []
    for seed in range(10):
        data, seeds = _imbalanced_data(seed)
        _, report, f1_auto = _imbalanced_fit(
            data, seeds, seed, 0.3, 2_000, auto_stop=True
        )
        _, _, f1_full = _imbalanced_fit(data, seeds, seed, 0.3, 2_000)
        stops.append(report.iterations_run)
        diffs.append(abs(f1_auto - f1_full))
        successes += report.iterations_run <= 400 and diffs[-1] <= 0.02
    ok = successes >= 8
    detail = (
        f"{successes}/10 seeds stopped within 400 sweeps and matched the "
        f"2000-sweep F1 within 0.02 (need 8); stops "
        f"{min(stops)}..{max(stops)}, worst |dF1| {max(diffs):.4f}"
    )
    _line(5, ok, detail)
    assert ok, detail


@pytest.mark.skipif(
    (os.cpu_count() or 1) < 8,
    reason=f"thread scaling needs an 8-core host; os.cpu_count() "
    f"reports {os.cpu_count()}",
)
def test_criterion_6_scaling():
    t_start = time.perf_counter()
    terms, topic_word = synthetic_word_distributions(
        50, n_dedicated=60, n_shared=200, shared_mass=0.4, rng=0
    )
    data = generate_synthetic(
        np.ones(50),
        topic_word,
        n_docs=800_000,
        mean_length=12.8,
        chain_length=5,
        rng=0,
        terms=terms,
        persistence=0.7,
        mixture_weight=0.78,
    )
    assert data.corpus.total_tokens >= 10_000_000
    times = {}
    for workers in (1, 8):
        config = ModelConfig(
            k=50,
            alpha=0.5,
            beta=0.1,
            gamma=0.5,
            nu=0.3,
            max_iter=30,
            batch_size=0.005,
            workers=workers,
            rng_seed=0,
        )
        t0 = time.perf_counter()
        fit(data.corpus, config)
        times[workers] = time.perf_counter() - t0
    total = time.perf_counter() - t_start
    ok = times[8] <= times[1] / 3.0 and total <= 1800.0
    detail = (
        f"{data.corpus.total_tokens} tokens, k=50: 1 worker "
        f"{times[1]:.1f}s, 8 workers {times[8]:.1f}s (need <= 1/3), "
        f"total {total:.0f}s <= 1800s"
    )
    _line(6, ok, detail)
    assert ok, detail


def test_criterion_7_perplexity_sanity():
    docs = [[0, 1, 2], [3, 4, 5, 6], [0, 6]]
    corpus = make_corpus(docs, n_terms=7)
    state = build_state(np.zeros((3, 7)), np.zeros((len(docs), 3)))
    theta = np.full((len(docs), 3), 1.0 / 3.0)
    rel = abs(perplexity(state, corpus, theta) - 7.0) / 7.0
    uniform_ok = rel <= 1e-9

    permuted_hits = 0
    for seed in range(5):
        terms, topic_word = synthetic_word_distributions(
            3, n_dedicated=30, n_shared=60, shared_mass=0.3, rng=seed
        )
        train = generate_synthetic(
            np.array([4.0, 3.0, 3.0]),
            topic_word,
            n_docs=600,
            mean_length=12.0,
            chain_length=4,
            rng=seed,
            terms=terms,
            persistence=0.7,
            mixture_weight=0.85,
        )
        test = generate_synthetic(
            np.array([4.0, 3.0, 3.0]),
            topic_word,
            n_docs=300,
            mean_length=12.0,
            chain_length=4,
            rng=seed + 1_000,
            terms=terms,
            persistence=0.7,
            mixture_weight=0.85,
        )
        sdict = seed_dictionary_from_distributions(
            topic_word, terms, train.labels, n_words=8
        )
        seeds = match_seeds(train.corpus.vocabulary, sdict)
        config = ModelConfig(
            k=3,
            alpha=0.5,
            beta=0.1,
            gamma=0.0,
            nu=0.0,
            seed_weight=0.5,
            max_iter=120,
            batch_size=0.02,
            workers=1,
            rng_seed=seed,
        )
        state, _ = fit(train.corpus, config, seeds)
        theta = predict(state, test.corpus, iterations=60, rng=seed).theta
        matched = perplexity(state, test.corpus, theta)
        permuted = perplexity(state, test.corpus, theta[:, [1, 2, 0]])
        permuted_hits += matched < permuted
    ok = uniform_ok and permuted_hits == 5
    detail = (
        f"uniform-model perplexity off by {rel:.1e} relative (<= 1e-9); "
        f"matched theta beats label-permuted theta in {permuted_hits}/5 "
        f"seeds"
    )
    _line(7, ok, detail)
    assert ok, detail


def test_criterion_8_metric_unit_suite():
    preds = {"d1": "A", "d2": "B", "d3": "B", "d4": "B"}
    gold = {"d1": "A", "d2": "A", "d3": "B", "d4": "B"}
    report = micro_f1(preds, gold, ["A", "B"])
    pooled_ok = (
        report.micro_f1 == 0.75
        and report.per_class["A"].tp == 1
        and report.per_class["A"].fn == 1
        and report.per_class["B"].fp == 1
    )

    out = micro_f1({"d1": "x", "d2": "y"}, {"d1": "x", "d2": "x"}, ["x"])
    out_ok = (
        out.micro_precision == 1.0
        and out.micro_recall == 0.5
        and out.micro_f1 == 2.0 / 3.0
    )

    years = [{"year": "1990"}] * 3 + [{"year": "1991"}] * 3
    corpus = make_corpus([[0]] * 6, n_terms=1, metas=years)
    freq_preds = dict(
        zip(
            [f"d{i}" for i in range(6)],
            ["war", "peace", "peace", "war", "war", "peace"],
        )
    )
    table = topic_frequency(
        freq_preds, corpus, group_key="year", labels=["war", "peace"]
    )
    freq_ok = (
        table.groups == ["1990", "1991"]
        and table.labels == ["war", "peace"]
        and np.array_equal(table.counts, [[1, 2], [2, 1]])
        and np.allclose(table.proportions().sum(axis=1), 1.0)
    )

    rng = np.random.default_rng(13)
    identity_hits = 0
    for _ in range(1_000):
        classes = [f"c{i}" for i in range(rng.integers(2, 7))]
        n = int(rng.integers(1, 51))
        ids = [f"d{i}" for i in range(n)]
        g = dict(zip(ids, rng.choice(classes, size=n)))
        p = dict(zip(ids, rng.choice(classes, size=n)))
        accuracy = sum(p[i] == g[i] for i in ids) / n
        identity_hits += micro_f1(p, g, classes).micro_f1 == accuracy
    ok = pooled_ok and out_ok and freq_ok and identity_hits == 1_000
    detail = (
        f"pooled F1 == 0.75: {pooled_ok}; out-of-class F1 == 2/3: "
        f"{out_ok}; grouped counts exact: {freq_ok}; micro F1 == "
        f"accuracy on {identity_hits}/1000 random in-class label sets"
    )
    _line(8, ok, detail)
    assert ok, detail
