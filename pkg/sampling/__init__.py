from sampling.windows import (
    SampleLabel,
    SampleSet,
    WindowSample,
    extract_windows,
    label_windows,
    split_train_holdout,
)

__all__ = [
    "SampleLabel",
    "SampleSet",
    "WindowSample",
    "extract_windows",
    "label_windows",
    "split_train_holdout",
]
