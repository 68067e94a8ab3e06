"""Shared exception types.

Everything raised on purpose by this package derives from DebateError so
callers can catch one base class at the CLI boundary.
"""


class DebateError(Exception):
    """Base class for every error this package raises deliberately."""


class ValidationError(DebateError, ValueError):
    """A value object or configuration violates one of its invariants."""


class AnswerError(DebateError, ValueError):
    """Answer text could not be normalized."""


class DegenerateOddsError(DebateError, ValueError):
    """A probability of exactly 0 or 1 makes log-odds undefined."""


class InconsistentEvidenceError(DebateError, ValueError):
    """Observed messages have zero likelihood under every hypothesis."""


class BudgetExceededError(DebateError):
    """Exact enumeration would exceed the configured joint-state budget."""


class PromptOverflowError(DebateError):
    """A rendered prompt exceeds the configured length bound."""


class MissingLogprobsError(DebateError, ValueError):
    """Token log-probabilities were required but are absent."""


class AgentCallError(DebateError):
    """Base class for failures while obtaining a response from an agent."""


class TransportError(AgentCallError):
    """Network-level failure while talking to a remote endpoint."""


class RateLimitError(TransportError):
    """Remote endpoint reported throttling."""


class MalformedReplyError(AgentCallError):
    """Remote endpoint answered with a payload we cannot interpret."""


class ReplayMissError(AgentCallError):
    """Replay source has no stored response for the addressed cell."""


class DebateAbortError(DebateError):
    """Every trajectory failed; the debate cannot continue."""


class StorageError(DebateError, ValueError):
    """Dataset, transcript, or batch file is malformed."""
