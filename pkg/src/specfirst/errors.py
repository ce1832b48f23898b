"""Exception taxonomy for the workbench.

Every error raised by specfirst code is a subclass of SpecfirstError so
callers (CLI, HTTP service) can map them to diagnostics uniformly.
"""

from __future__ import annotations


class SpecfirstError(Exception):
    """Base class for all workbench errors."""


class SpecParseError(SpecfirstError):
    """The problem specification document is not valid TOML."""


class SpecValidationError(SpecfirstError):
    """The specification parsed but violates the documented schema."""


class BankFormatError(SpecfirstError):
    """A task bank record is malformed; names the field and record index."""

    def __init__(self, message: str, *, field: str | None = None, index: int | None = None):
        super().__init__(message)
        self.field = field
        self.index = index


class BankIntegrityError(SpecfirstError):
    """Duplicate task ids or other cross-record inconsistencies."""


class ConfigurationError(SpecfirstError):
    """Invalid or incomplete runtime configuration."""


class TransportError(SpecfirstError):
    """Network failure talking to the generation backend (retries exhausted)."""


class FixtureMissError(SpecfirstError):
    """Replay backend has no stored fixture for the request hash."""

    def __init__(self, request_hash: str):
        super().__init__(f"no fixture for request hash {request_hash}")
        self.request_hash = request_hash


class BackendProtocolError(SpecfirstError):
    """The backend answered, but not in the expected response shape."""


class ExtractionError(SpecfirstError):
    """No usable tests/code could be extracted from generated text."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class RunnerEnvironmentError(SpecfirstError):
    """The configured test runner cannot be invoked at all."""


class HarnessError(SpecfirstError):
    """Test execution finished but its report could not be parsed."""

    def __init__(self, message: str, raw_output: str = ""):
        super().__init__(message)
        self.raw_output = raw_output


class PhaseError(SpecfirstError):
    """Operation not allowed in the session's current phase."""


class BudgetExpiredError(SpecfirstError):
    """The session's time budget has elapsed."""


class TerminalSessionError(SpecfirstError):
    """Mutation attempted on a completed or expired session."""


class UnknownTestError(SpecfirstError):
    """Curation action referenced a test_id absent from the suite."""


class LastTestError(SpecfirstError):
    """Deleting the only remaining test is rejected; the suite stays non-empty."""


class ClosedLogError(SpecfirstError):
    """Event recorded against a closed session log."""


class NonTerminalExportError(SpecfirstError):
    """Bundle export requires a completed or expired session."""


class StatsDomainError(SpecfirstError):
    """Statistic called with inputs outside its domain (empty, mismatched)."""


class UndefinedCorrelationError(SpecfirstError):
    """Rank correlation undefined: one input has zero rank variance."""


class ScriptStepError(SpecfirstError):
    """A scripted action is impossible in the current phase; names the step."""

    def __init__(self, step_index: int, message: str):
        super().__init__(f"script step {step_index}: {message}")
        self.step_index = step_index


class SessionBusyError(SpecfirstError):
    """Another mutating operation is in flight for this session."""
