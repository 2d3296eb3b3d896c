"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` so the command line front end can map
failures onto process exit statuses without inspecting messages.
"""


class GppaError(Exception):
    """Base class for numerical failures (exit status 3)."""

    exit_code = 3


class DegenerateLevelsError(GppaError):
    """Two instantaneous levels are closer than the crossing tolerance."""


class UnresolvedPoleError(GppaError):
    """A purely discrete denominator vanishes and nothing absorbs the pole."""


class GridTooCoarseError(GppaError):
    """The momentum grid cannot bracket a principal-value singularity."""


class AliasingError(GppaError):
    """The sample count cannot resolve the requested frequency window."""


class WindowMismatchError(GppaError):
    """Mean energies and phase integrals refer to different windows."""


class NoFixedPointError(GppaError):
    """A fixed-point iteration failed to converge."""


class SingularSystemError(GppaError):
    """A linear system is singular or badly conditioned."""


class ConvergenceError(GppaError):
    """An adaptive refinement did not reach its tolerance."""


class ModeError(GppaError):
    """An operation was requested in a mode that does not support it."""


class ValidationError(Exception):
    """Configuration violates a precondition (exit status 2)."""

    exit_code = 2

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
