"""Exception types shared across the pipeline."""


class NodeCtxError(Exception):
    """Base class for errors the CLI reports with a stage name."""


class DimensionError(NodeCtxError, ValueError):
    """Vector or tensor sizes do not agree."""


class TensorFormatError(NodeCtxError, ValueError):
    """A serialized tensor or model could not be parsed."""


class IngestionError(NodeCtxError, ValueError):
    """A characteristic matrix or stoplist file is malformed."""


class DecompositionError(NodeCtxError, ValueError):
    """The tensor cannot be decomposed (for example, it is all zeros)."""
