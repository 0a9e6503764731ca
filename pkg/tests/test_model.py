"""ModelConfig validation, count-derived distributions, persistence."""

import dataclasses
import json

import numpy as np
import pytest

from asymlda.corpus import SeedDictionary, match_seeds
from asymlda.model import (
    ModelConfig,
    ModelFormatError,
    ModelState,
    load_model,
    save_model,
)
from asymlda.sampler import initialize, sweep

from conftest import build_state, make_corpus


class TestModelConfig:
    def test_defaults(self):
        c = ModelConfig(k=8)
        assert c.alpha == 0.5
        assert c.beta == 0.1
        assert c.gamma == 0.0
        assert c.nu == 0.0
        assert c.seed_weight == 0.01
        assert c.max_iter == 2000
        assert c.batch_size == 0.01
        assert c.workers == 1
        assert c.auto_stop is False

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"k": 0},
            {"k": 2, "alpha": 0.0},
            {"k": 2, "alpha": -1.0},
            {"k": 2, "beta": 0.0},
            {"k": 2, "gamma": -0.1},
            {"k": 2, "gamma": 1.5},
            {"k": 2, "nu": 1.0},
            {"k": 2, "nu": -0.2},
            {"k": 2, "seed_weight": -0.01},
            {"k": 2, "max_iter": 0},
            {"k": 2, "max_iter": 15},
            {"k": 2, "batch_size": 0.0},
            {"k": 2, "batch_size": 1.2},
            {"k": 2, "workers": 0},
            {"k": 2, "predict_iter": 0},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            ModelConfig(**kwargs)

    def test_boundary_values_accepted(self):
        ModelConfig(k=1, gamma=1.0, nu=0.0, batch_size=1.0, seed_weight=0.0)
        ModelConfig(k=2, nu=0.999, max_iter=10)


class TestTheta:
    def test_symmetric_prior(self):
        s = build_state(np.zeros((2, 3)), [[3, 1]], alpha=0.5)
        assert np.allclose(s.theta(0), [0.7, 0.3])

    def test_empty_document_is_prior(self):
        s = build_state(np.zeros((2, 3)), [[0, 0]], alpha=0.5)
        assert np.allclose(s.theta(0), [0.5, 0.5])

    def test_asymmetric_prior(self):
        s = build_state(np.zeros((3, 2)), [[2, 0, 0]], alpha=[0.9, 0.3, 0.3])
        assert np.allclose(s.theta(0), np.array([2.9, 0.3, 0.3]) / 3.5)

    def test_rows_sum_to_one(self, rng):
        dt = rng.integers(0, 7, size=(5, 4)).astype(float)
        s = build_state(np.zeros((4, 3)), dt, alpha=[0.2, 0.4, 0.1, 0.8])
        tm = s.theta_matrix()
        assert np.allclose(tm.sum(axis=1), 1.0, atol=1e-12)
        for d in range(5):
            assert np.allclose(tm[d], s.theta(d))


class TestPhi:
    def test_smoothed_counts(self):
        s = build_state([[4, 0]], [[4]], beta=0.1)
        assert np.allclose(s.phi(0), [4.1 / 4.2, 0.1 / 4.2])

    def test_empty_topic_is_uniform(self):
        s = build_state([[0, 0, 0], [1, 1, 0]], [[0, 2]], beta=0.1)
        assert np.allclose(s.phi(0), 1.0 / 3)

    def test_seed_counts_included(self):
        s = build_state(
            [[0, 1]], [[1]], beta=0.5, seed_word_topic=[[2.0, 0.0]]
        )
        assert np.allclose(s.phi(0), [2.5 / 4.0, 1.5 / 4.0])

    def test_matrix_matches_rows_and_sums(self, rng):
        wt = rng.integers(0, 9, size=(3, 6)).astype(float)
        s = build_state(wt, [[1, 1, 1]], beta=0.25)
        pm = s.phi_matrix()
        assert pm.shape == (3, 6)
        assert np.allclose(pm.sum(axis=1), 1.0, atol=1e-12)
        for k in range(3):
            assert np.allclose(pm[k], s.phi(k))


class TestSamplingWeights:
    def test_fresh_state_is_symmetric(self):
        s = build_state(np.zeros((3, 4)), [[0, 0, 0]], alpha=0.5, beta=0.1)
        w = s.sampling_weights(0, 2)
        assert np.allclose(w, w[0])

    def test_flat_prior_case(self):
        s = build_state(
            [[2, 2], [0, 4]], [[1, 0]], alpha=0.5, beta=0.5
        )
        w = s.sampling_weights(0, 0)
        assert np.allclose(w, [0.75, 0.05])

    def test_chain_carry_over(self):
        s = build_state(
            [[2, 2], [0, 4]],
            [[3, 1], [1, 0]],
            alpha=0.5,
            beta=0.5,
            gamma=0.5,
            prev_doc=[-1, 0],
        )
        a = s.effective_alpha(1)
        assert np.allclose(a, [0.5 + 0.5 * 0.7, 0.5 + 0.5 * 0.3])
        w = s.sampling_weights(1, 0)
        expect = (np.array([1, 0]) + a) * np.array([2.5, 0.5]) / 5.0
        assert np.allclose(w, expect)

    def test_no_predecessor_ignores_gamma(self):
        s = build_state(
            [[2, 2], [0, 4]], [[1, 0]], alpha=0.5, beta=0.5,
            gamma=0.9, prev_doc=[-1],
        )
        assert np.allclose(s.effective_alpha(0), [0.5, 0.5])

    def test_topic_permutation_equivariance(self, rng):
        wt = rng.integers(0, 6, size=(4, 5)).astype(float)
        dt = rng.integers(0, 5, size=(2, 4)).astype(float)
        alpha = rng.uniform(0.1, 1.0, size=4)
        s = build_state(wt, dt, alpha=alpha, beta=0.3)
        perm = rng.permutation(4)
        sp = build_state(wt[perm], dt[:, perm], alpha=alpha[perm], beta=0.3)
        for v in range(5):
            assert np.allclose(
                s.sampling_weights(1, v)[perm], sp.sampling_weights(1, v)
            )

    def test_weights_positive(self, rng):
        wt = rng.integers(0, 6, size=(3, 4)).astype(float)
        s = build_state(wt, rng.integers(0, 4, size=(1, 3)).astype(float))
        for v in range(4):
            assert (s.sampling_weights(0, v) > 0).all()


class TestTopTerms:
    def test_ranking(self):
        s = build_state([[5, 1, 3]], [[9]], beta=0.1)
        got = s.top_terms(0, n=2)
        assert [t for t, _ in got] == ["w0", "w2"]
        assert got[0][1] > got[1][1]

    def test_tie_breaks_to_lower_index(self):
        s = build_state([[2, 3, 3, 1]], [[9]], beta=0.1)
        got = [t for t, _ in s.top_terms(0, n=3)]
        assert got == ["w1", "w2", "w0"]

    def test_n_larger_than_vocab(self):
        s = build_state([[1, 0]], [[1]])
        assert len(s.top_terms(0, n=10)) == 2

    def test_n_zero(self):
        s = build_state([[1, 0]], [[1]])
        assert s.top_terms(0, n=0) == []


class TestLabelIndex:
    def test_known_and_unknown(self):
        s = build_state([[1]], [[1]], topic_labels=["econ"])
        assert s.label_index("econ") == 0
        with pytest.raises(KeyError):
            s.label_index("nope")


def fitted_state(gamma=0.0, nu=0.0, seed=3):
    corpus = make_corpus(
        [[0, 1, 0], [2, 3], [0, 2, 3, 3], [1, 1], [3, 0]],
        parents=[None, ("p", 0), ("p", 1), None, ("q", 0)],
    )
    d = SeedDictionary({"alpha": ["w0"], "beta": ["w3"]})
    seeds = match_seeds(corpus.vocabulary, d)
    config = ModelConfig(
        k=3, alpha=0.4, beta=0.2, gamma=gamma, nu=nu,
        seed_weight=0.5, max_iter=20, rng_seed=seed,
    )
    state = initialize(corpus, config, seeds)
    for _ in range(5):
        sweep(state)
    return state


class TestPersistence:
    def test_round_trip_exact(self, tmp_path):
        s = fitted_state(gamma=0.3)
        p = tmp_path / "m.json"
        save_model(s, p)
        r = load_model(p)
        assert r.config == s.config
        assert r.vocabulary.terms == s.vocabulary.terms
        assert r.topic_labels == s.topic_labels
        assert r.n_seeded == s.n_seeded
        assert np.array_equal(r.alpha_k, s.alpha_k)
        assert np.array_equal(r.topic_word_counts, s.topic_word_counts)
        assert np.array_equal(r.seed_counts, s.seed_counts)
        assert np.array_equal(r.topic_totals, s.topic_totals)
        assert np.allclose(r.phi_matrix(), s.phi_matrix(), atol=0)
        assert r.seed_patterns == s.seed_patterns

    def test_loaded_model_has_no_token_state(self, tmp_path):
        s = fitted_state()
        p = tmp_path / "m.json"
        save_model(s, p)
        r = load_model(p)
        assert r.z is None
        with pytest.raises(RuntimeError):
            r.theta(0)

    def test_newer_version_rejected(self, tmp_path):
        s = fitted_state()
        p = tmp_path / "m.json"
        save_model(s, p)
        doc = json.loads(p.read_text())
        doc["format_version"] = 99
        p.write_text(json.dumps(doc))
        with pytest.raises(ModelFormatError, match="newer"):
            load_model(p)

    def test_malformed_json_rejected(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text("{not json")
        with pytest.raises(ModelFormatError):
            load_model(p)

    def test_missing_field_rejected(self, tmp_path):
        s = fitted_state()
        p = tmp_path / "m.json"
        save_model(s, p)
        doc = json.loads(p.read_text())
        del doc["alpha_k"]
        p.write_text(json.dumps(doc))
        with pytest.raises(ModelFormatError):
            load_model(p)


class TestDigest:
    def test_equal_states_equal_digest(self):
        a = fitted_state(seed=11)
        b = fitted_state(seed=11)
        assert a.digest() == b.digest()

    def test_different_counts_differ(self):
        a = fitted_state(seed=11)
        b = fitted_state(seed=12)
        assert a.digest() != b.digest()
