"""Exception types raised by the pipeline."""


class SpecdedupError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SpecdedupError):
    """A parameter or configuration value violates an operation precondition."""


class IngestError(SpecdedupError):
    """Source data cannot be opened or mapped to the canonical model."""


class GraphError(SpecdedupError):
    """Invalid graph operation (unknown node, empty graph, bad format)."""


class PipelineError(SpecdedupError):
    """A pipeline stage failed; message carries the stage name and context."""
