"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: configuration problems
exit with code 2, numerical/fit failures with code 3.
"""


class ConfigError(ValueError):
    """Invalid configuration: bad units, unknown keys, inconsistent modes."""


class AnalysisError(RuntimeError):
    """An analysis routine could not extract the requested quantity."""


class FitError(RuntimeError):
    """An optimisation failed to converge; carries per-start diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class IntegrationError(RuntimeError):
    """Rate-equation integration produced unphysical populations."""
