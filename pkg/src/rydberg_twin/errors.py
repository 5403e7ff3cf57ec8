"""Exception hierarchy shared by all modules."""


class RydbergTwinError(Exception):
    """Base class. ``module`` names the subsystem that raised."""

    kind = "error"

    def __init__(self, message, module=None):
        self.module = module
        super().__init__(f"[{module}] {message}" if module else message)

    def record(self):
        """Machine-readable description, used by the CLI on failure."""
        return {"error": self.kind, "module": self.module, "message": str(self)}


class InvalidArgumentError(RydbergTwinError, ValueError):
    kind = "invalid_argument"


class ConfigurationError(RydbergTwinError, ValueError):
    kind = "configuration"


class PreconditionError(RydbergTwinError, ValueError):
    kind = "precondition"


class FitError(RydbergTwinError, RuntimeError):
    """Raised when a fit cannot be performed; ``diagnostics`` holds context."""

    kind = "fit_failure"

    def __init__(self, message, module=None, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message, module)

    def record(self):
        rec = super().record()
        rec["diagnostics"] = self.diagnostics
        return rec
