"""Exception hierarchy shared across the package."""


class ExplainerError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(ExplainerError):
    """Instance or predicate does not match the feature schema."""


class DomainError(SchemaError):
    """A raw value falls outside the declared domain of its slot."""


class RuleConflictError(ExplainerError):
    """Conjoining would constrain one feature slot to two values."""


class RuleCoverageError(ExplainerError):
    """A rule that must cover an instance does not."""


class DegenerateRuleError(ExplainerError):
    """Rule has zero mass under the perturbation distribution."""


class IngestionError(ExplainerError):
    """Dataset could not be ingested."""


class ConfigError(ExplainerError):
    """Invalid model or parameter configuration."""


class OracleUnavailableError(ExplainerError):
    """An external model server failed to answer a prediction request."""


class EmbeddingError(ExplainerError):
    """An instance could not be embedded."""


class MemoryStoreError(ExplainerError):
    """Memory store operation failed."""


class IncompatibleMemoryError(MemoryStoreError):
    """Persisted memory does not match the current schema or dimension."""
