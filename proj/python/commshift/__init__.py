"""Community-conditioned word embeddings, shift indices, and shift diagnostics."""

from ._commshift import (
    CommshiftDataError,
    CommshiftInternalError,
    CommshiftUsageError,
    CorpusStore,
    EmbeddingSpace,
    FeatureTable,
    LanguageModel,
    ShiftTable,
    cohens_d,
    cosine,
    csi,
    dsi,
    feature_contrast,
    feature_table,
    ingest_jsonl,
    ppl_change,
    select_words,
    shift_table,
    synth_store,
    target_perplexity,
    tokenize,
    train,
    train_lm,
    ttest_ind,
    wilcoxon_signed_rank,
)

__all__ = [
    "CommshiftDataError",
    "CommshiftInternalError",
    "CommshiftUsageError",
    "CorpusStore",
    "EmbeddingSpace",
    "FeatureTable",
    "LanguageModel",
    "ShiftTable",
    "cohens_d",
    "cosine",
    "csi",
    "dsi",
    "feature_contrast",
    "feature_table",
    "ingest_jsonl",
    "ppl_change",
    "select_words",
    "shift_table",
    "synth_store",
    "target_perplexity",
    "tokenize",
    "train",
    "train_lm",
    "ttest_ind",
    "wilcoxon_signed_rank",
]

__version__ = "0.1.0"
