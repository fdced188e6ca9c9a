"""Exception types raised across the toolkit."""


class ProsodyKitError(Exception):
    """Base class for all toolkit errors."""


# --- audio decoding / tracking ---

class UnsupportedFormat(ProsodyKitError):
    """Audio file uses a codec or sample format the decoder does not handle."""


class CorruptFile(ProsodyKitError):
    """Audio file is structurally broken (truncated chunk, bad sizes)."""


class InputTooShort(ProsodyKitError):
    """Audio is shorter than one analysis window."""


# --- alignment ingestion ---

class SchemaError(ProsodyKitError):
    """Alignment JSON is missing required structure or violates ordering."""


class OffsetError(ProsodyKitError):
    """A word's character offsets cannot be resolved against the chapter text."""

    def __init__(self, word_index, message):
        super().__init__(f"word {word_index}: {message}")
        self.word_index = word_index


class NoTimingInfo(ProsodyKitError):
    """A word span contains no aligned words, so it has no time span."""


# --- segmentation ---

class ParseError(ProsodyKitError):
    """Malformed bracketed parse tree."""

    def __init__(self, position, message):
        super().__init__(f"position {position}: {message}")
        self.position = position


class TokenMismatch(ProsodyKitError):
    """Parse-tree leaves do not match the sentence tokens."""


# --- features ---

class NoData(ProsodyKitError):
    """An aggregation or fit received no usable values."""


class TableError(ProsodyKitError):
    """Word-vector table is inconsistent (e.g. mixed dimensions)."""


class RowMismatch(ProsodyKitError):
    """External embedding rows do not match the expected segment ids."""

    def __init__(self, message, missing=(), surplus=()):
        super().__init__(message)
        self.missing = list(missing)
        self.surplus = list(surplus)


class FormatError(ProsodyKitError):
    """A structured input file has a malformed cell or row."""


class DimError(ProsodyKitError):
    """Requested dimensionality exceeds what the data supports."""


class UnknownCharacter(ProsodyKitError):
    """Quote attribution references a character with no embedding."""


# --- models ---

class DataError(ProsodyKitError):
    """Training data is unusable (non-finite, wrong shape, too small)."""


class TrainingDiverged(ProsodyKitError):
    """Loss became non-finite during training."""

    def __init__(self, epoch, message="training loss became non-finite"):
        super().__init__(f"{message} at epoch {epoch}")
        self.epoch = epoch


# --- reader analysis ---

class InsufficientCharacters(ProsodyKitError):
    """Fewer than two characters with attributed dialogue in a book."""


# --- SSML ---

class RefError(ProsodyKitError):
    """Reference statistics for SSML conversion are non-positive."""


# --- CLI / config ---

class ConfigError(ProsodyKitError):
    """Pipeline configuration is invalid."""
