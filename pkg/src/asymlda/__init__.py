"""Topic modeling for short, ordered texts.

Collapsed Gibbs LDA with three extensions aimed at corpora of short
documents (sentences, utterances, headlines) that arrive in sequence
within a parent unit:

* seed dictionaries that nudge selected topics toward known word lists,
* a sequential document prior that carries topic mass from the previous
  document in the same parent chain,
* automatic adjustment of per-topic Dirichlet priors toward the corpus
  topic distribution, so frequent topics are not flattened away.

Sampling runs on compiled kernels, optionally across several workers
that sample disjoint document batches against a shared snapshot of the
count matrices and merge their updates at a fixed cadence.  Runs are
deterministic for a given seed and worker count.
"""

from .corpus import (
    Corpus,
    Document,
    PreprocessOptions,
    SeedAssignment,
    SeedDictionary,
    Vocabulary,
    build_corpus,
    load_corpus,
    match_seeds,
    save_corpus,
    tokenize,
)
from .evaluate import F1Report, generate_synthetic, micro_f1, topic_frequency
from .inference import PredictResult, perplexity, predict
from .model import FitReport, ModelConfig, ModelState, load_model, save_model
from .parallel import fit
from .sampler import adjust_priors, check_convergence, fit_serial, initialize, sweep

__all__ = [
    "Corpus",
    "Document",
    "F1Report",
    "FitReport",
    "ModelConfig",
    "ModelState",
    "PredictResult",
    "PreprocessOptions",
    "SeedAssignment",
    "SeedDictionary",
    "Vocabulary",
    "adjust_priors",
    "build_corpus",
    "check_convergence",
    "fit",
    "fit_serial",
    "generate_synthetic",
    "initialize",
    "load_corpus",
    "load_model",
    "match_seeds",
    "micro_f1",
    "perplexity",
    "predict",
    "save_corpus",
    "save_model",
    "sweep",
    "tokenize",
    "topic_frequency",
]

__version__ = "0.1.0"
