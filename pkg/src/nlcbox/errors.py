"""Exception types shared across the solver suite."""


class NlcError(Exception):
    """Base class for all nlcbox errors."""


class NotUnit(NlcError):
    """Director passed to a uniaxial constructor is not unit length."""


class DegenerateDirector(NlcError):
    """Leading eigenvalue is (numerically) repeated; director undefined."""


class NoNematicMinimum(NlcError):
    """Bulk coefficients admit no nematic minimum (negative discriminant)."""


class TooCoarse(NlcError):
    """Grid would have fewer than five nodes along some axis."""


class GeometryMismatch(NlcError):
    """Fields defined on different grids were combined."""


class NonFinite(NlcError):
    """A field handed to energy/gradient contains NaN or Inf entries."""


class Breakdown(NlcError):
    """Lanczos breakdown in MINRES before reaching the tolerance."""


class RankDeficient(NlcError):
    """Trial basis in an eigensolver step lost rank and could not be repaired."""


class NotConverged(NlcError):
    """Iterative solver exhausted its budget without meeting the tolerance."""


class LinearSolveFailed(NlcError):
    """Inner linear solve failed hard (non-finite iterates)."""


class EnergyNaN(NlcError):
    """Energy became non-finite during a relaxation."""


class StagnationFallback(NlcError):
    """Newton phase stagnated; caller should fall back to saddle dynamics."""


class MaxStepsExceeded(NlcError):
    """Outer saddle-dynamics loop hit its step budget (strict mode only)."""


class IndexAmbiguous(NlcError):
    """Hessian eigenvalue sits inside the zero-margin band after retry."""


class SkeletonInconsistent(NlcError):
    """Edge orientations induce a face the director cannot fill smoothly."""


class NotTargetIndex(NlcError):
    """Ascent from a minimum converged to a saddle of the wrong index."""


class NoPathFound(NlcError):
    """No min-saddle-min chain connects the requested endpoints."""


class ConfigError(NlcError):
    """Run configuration file is malformed or contains unknown fields."""


class IoError(NlcError):
    """Reading or writing an artifact file failed or the file is malformed."""
