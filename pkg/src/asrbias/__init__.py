"""Word and phonetic error rates cross-referenced with sociophonetic markers."""

from asrbias.alignment import (
    AlignmentResult, Costs, EditOp, ScoreTable, align, normalize_tokens, per_reduction,
    score_corpus, score_per, score_wer,
)
from asrbias.codes import MarkerCode
from asrbias.lexicon import Lexicon, derive_oov, hypothesis_phones, lookup, overlay, parse_dictionary
from asrbias.markers import cooccurrence, detect_contexts, normalized_rates, realization_means
from asrbias.stats import fit_lmm, two_proportion_test, wald_test

__version__ = "0.1.0"

__all__ = [
    "AlignmentResult", "Costs", "EditOp", "Lexicon", "MarkerCode", "ScoreTable", "align",
    "cooccurrence", "derive_oov", "detect_contexts", "fit_lmm", "hypothesis_phones", "lookup",
    "normalize_tokens", "normalized_rates", "overlay", "parse_dictionary", "per_reduction",
    "realization_means", "score_corpus", "score_per", "score_wer", "two_proportion_test",
    "wald_test",
]
