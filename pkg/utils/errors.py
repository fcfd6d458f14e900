"""Exception hierarchy shared by every stage.

Each error carries a stable ``code`` so the CLI can emit machine-readable
failures, and an optional ``stage`` naming the pipeline step that raised it.
"""


class InspectionError(Exception):
    code = "inspection_error"

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    def to_dict(self):
        return {"error": self.code, "message": self.message, "stage": self.stage}


# -- depth maps / PGM
class PgmFormatError(InspectionError):
    code = "pgm_format"


class PgmMagicError(PgmFormatError):
    code = "pgm_magic"


class PgmDimensionError(PgmFormatError):
    code = "pgm_dimensions"


class PgmTruncatedError(PgmFormatError):
    code = "pgm_truncated"


# -- tow geometry
class FewerLinesThanExpected(InspectionError):
    code = "fewer_lines_than_expected"

    def __init__(self, message, found=0, expected=0, stage=None):
        super().__init__(message, stage)
        self.found = found
        self.expected = expected


class TooFewEdges(InspectionError):
    code = "too_few_edges"


class DegenerateLayout(InspectionError):
    code = "degenerate_layout"


# -- sampling
class EmptyLayout(InspectionError):
    code = "empty_layout"


class WindowTooLarge(InspectionError):
    code = "window_too_large"


# -- neural network
class ShapeMismatch(InspectionError):
    code = "shape_mismatch"


class NonFiniteActivation(InspectionError):
    code = "non_finite_activation"

    def __init__(self, message, layer_index, stage=None):
        super().__init__(message, stage)
        self.layer_index = layer_index


class TrainingDiverged(InspectionError):
    code = "training_diverged"

    def __init__(self, message, epoch, batch, stage=None):
        super().__init__(message, stage)
        self.epoch = epoch
        self.batch = batch


class WeightsArchitectureError(InspectionError):
    code = "weights_architecture"


class WeightsChecksumError(InspectionError):
    code = "weights_checksum"


# -- scoring / localization
class EmptyClass(InspectionError):
    code = "empty_class"


class SignalTooShort(InspectionError):
    code = "signal_too_short"


class UnknownTow(InspectionError):
    code = "unknown_tow"


# -- plumbing
class SynthSpecError(InspectionError):
    code = "synth_spec"


class ConfigError(InspectionError):
    code = "config"


class MissingArtifact(InspectionError):
    code = "missing_artifact"
