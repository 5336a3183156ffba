from .experiment import (
    PROFILES,
    Corpus,
    ExperimentConfig,
    InvalidGrid,
    Runner,
    SizeTooLarge,
    VocabMismatch,
    build_report,
    default_sizes,
    epoch_curve,
    evaluate,
    fit,
    grid_search,
    is_monotone,
    learning_curve,
    prepare_corpus,
    split_sessions,
    validate_report,
    write_report_csv,
)

__all__ = [
    "PROFILES", "Corpus", "ExperimentConfig", "InvalidGrid", "Runner", "SizeTooLarge", "VocabMismatch",
    "build_report", "default_sizes", "epoch_curve", "evaluate", "fit", "grid_search", "is_monotone",
    "learning_curve", "prepare_corpus",
    "split_sessions", "validate_report", "write_report_csv",
]
