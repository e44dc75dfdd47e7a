"""Exception hierarchy shared across the toolkit.

Keeping all error types in one module lets the CLI map them onto exit
codes without importing every subsystem.
"""


class CollabKitError(Exception):
    """Base class for all toolkit-specific errors."""


class ConfigError(CollabKitError):
    """A run configuration failed validation."""


class TransportError(CollabKitError):
    """An HTTP request failed after exhausting retries."""


class RateLimited(TransportError):
    """The remote API kept answering 429 beyond the retry budget."""


class MissingFixtures(TransportError):
    """Offline mode was requested but the page cache has no entries."""


class ParseError(CollabKitError):
    """A payload could not be decoded into the expected shape."""


class UnknownConcept(CollabKitError):
    """A concept id is absent from the catalog."""


class WrongLevel(CollabKitError):
    """A concept was used in a role its taxonomy level does not allow."""


class EmptySlice(CollabKitError):
    """A count table slice contains no works at all."""


class EmptyEntityYear(CollabKitError):
    """An entity has no works in the requested year."""


class TooFewValues(CollabKitError):
    """A density estimate needs at least two observations."""


class EmptyUnion(CollabKitError):
    """Affinity is undefined when both production counts are zero."""


class MissingEntity(CollabKitError):
    """An entity referenced by name is not present in the matrix."""


class InvalidH0(CollabKitError):
    """The rescaling ceiling must lie strictly above every merge height."""
