# csp_sched/errors.py
"""
Error hierarchy for csp-sched.

Every error carries guidance text so the CLI can print it as-is.
The CLI maps the classes onto exit codes:

  InstanceError / ParseError / PreconditionError  → 2
  ResourceCapError                                → 3
"""


class CspSchedError(RuntimeError):
    """Base class for every error raised on purpose by csp-sched."""


class InstanceError(CspSchedError, ValueError):
    """Instance or solution references something that does not exist or is malformed."""


class ParseError(CspSchedError, ValueError):
    """A JSON file could not be turned into an instance or solution."""

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"[parsers] ❌ {location}: {message}")


class PreconditionError(CspSchedError):
    """An algorithm was asked to run outside the assumptions it needs."""


class ResourceCapError(CspSchedError):
    """A table or enumeration would exceed the configured cap."""

    def __init__(self, what: str, required: int, cap: int, hint: str = ''):
        self.what     = what
        self.required = required
        self.cap      = cap
        message = f"{what}: needs {required:,} entries, cap is {cap:,}"
        if hint:
            message += f"\n{hint}"
        super().__init__(message)
