"""Exception taxonomy; the CLI maps these onto distinct exit codes."""


class PeeringSimError(Exception):
    """Base class for all package errors."""


class ValidationError(PeeringSimError):
    """Invalid inputs: malformed files, inconsistent scenarios, bad arguments."""


class ConvergenceError(PeeringSimError):
    """An optimizer, root-finder, or calibration failed to converge or was ambiguous."""
