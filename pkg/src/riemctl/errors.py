"""Exception types shared across the library."""


class RiemctlError(Exception):
    """Base class for all library errors."""


class NotPositiveDefinite(RiemctlError):
    """A metric failed its positive-definiteness check at a point."""

    def __init__(self, q, detail=""):
        self.q = q
        super().__init__(f"metric not positive definite at q={q}" + (f": {detail}" if detail else ""))


class OutsideFeasibleRegion(RiemctlError):
    """A point lies outside the declared feasible region."""

    def __init__(self, q):
        self.q = q
        super().__init__(f"point outside feasible region: q={q}")


class InfeasibleInitialState(RiemctlError):
    """An integration was started from an infeasible state."""


class DependentControlFields(RiemctlError):
    """The control vector fields are linearly dependent at a point."""

    def __init__(self, q, detail=""):
        self.q = q
        super().__init__(f"control fields dependent at q={q}" + (f": {detail}" if detail else ""))


class HypothesisViolated(RiemctlError):
    """A synthesis hypothesis (span or properness condition) fails on the check grid."""


class MatchingViolated(RiemctlError):
    """The shaped metric does not satisfy the matching conditions on the check grid."""


class SingularHessian(RiemctlError):
    """The velocity Hessian of a Lagrangian is singular at a state."""

    def __init__(self, state, detail=""):
        self.state = state
        super().__init__(f"singular Lagrangian Hessian at state={state}" + (f": {detail}" if detail else ""))


class NoConvergence(RiemctlError):
    """An iterative solve failed to converge."""


class NonPositiveCoefficient(RiemctlError):
    """A blend coefficient violates s > 0, t >= 0."""


class ParameterOutOfRange(RiemctlError):
    """A scenario parameter is outside its documented validity range."""


class StepSizeUnderflow(RiemctlError):
    """The adaptive integrator could not proceed without shrinking h below resolution."""

    def __init__(self, t, detail=""):
        self.t = t
        super().__init__(f"step size underflow at t={t}" + (f": {detail}" if detail else ""))


class ConfigError(RiemctlError):
    """A run configuration failed schema validation."""
