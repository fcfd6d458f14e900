from synth.generator import (
    DefectKind,
    DefectSpec,
    SynthScan,
    SynthSpec,
    generate,
    generate_corpus,
    ground_truth_layout,
    random_defects,
)

__all__ = [
    "DefectKind",
    "DefectSpec",
    "SynthScan",
    "SynthSpec",
    "generate",
    "generate_corpus",
    "ground_truth_layout",
    "random_defects",
]
