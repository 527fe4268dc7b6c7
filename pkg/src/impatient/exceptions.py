"""Exception hierarchy shared by every module."""


class ImpatientError(Exception):
    """Base class for all package errors."""


class ValidationError(ImpatientError, ValueError):
    """Input data violates a documented invariant."""


class EmptyInstance(ValidationError):
    def __init__(self):
        super().__init__("instance has no customers")


class NegativeReward(ValidationError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"customer {index}: reward must be a finite non-negative number")


class ProbOutOfRange(ValidationError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"customer {index}: departure probability must lie in [0, 1]")


class ParseError(ValidationError):
    def __init__(self, message, position=None):
        self.position = position
        where = "" if position is None else f" at position {position}"
        super().__init__(f"cannot parse instance{where}: {message}")


class NonAverageCustomer(ValidationError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"customer {index} is not average; reduce the instance first")


class ProbOrderViolated(ValidationError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"customer {index}: need p_minus <= p_plus < 1")


class NonIntegerInverseEpsilon(ValidationError):
    def __init__(self, eps):
        self.eps = eps
        super().__init__(f"1/epsilon must be an integer, got epsilon={eps!r}")


class GammaOutOfRange(ValidationError):
    def __init__(self, gamma, upper):
        super().__init__(f"gamma must lie in 1..{upper}, got {gamma}")


class EmptyClassServed(ValidationError):
    def __init__(self, cls):
        super().__init__(f"class {cls} has no available member")


class CapacityError(ImpatientError):
    """A desk-scale computation was asked to exceed its cap."""


class InstanceTooLarge(CapacityError):
    def __init__(self, n, cap):
        self.n = n
        self.cap = cap
        super().__init__(f"instance has {n} customers; this computation is capped at {cap}")


class StateSpaceTooLarge(CapacityError):
    def __init__(self, size, budget):
        self.size = size
        self.budget = budget
        super().__init__(f"class DP needs {size} count vectors; budget is {budget}")


class PolicyServedUnavailable(ImpatientError, RuntimeError):
    def __init__(self, t, i):
        self.t = t
        self.i = i
        super().__init__(f"policy served customer {i} at stage {t}, but it is not available")
