"""Exception types shared across the package."""


class KcnfError(Exception):
    """Base class for every error raised by this package."""


class MalformedHeader(KcnfError):
    pass


class VariableOutOfRange(KcnfError):
    pass


class NonUniformWidth(KcnfError):
    pass


class ClauseCountMismatch(KcnfError):
    pass


class InvalidDimensions(KcnfError):
    pass


class SNotUnassigned(KcnfError):
    """A requested variable is already fixed to 0 or 1."""


class VariableNotUntouched(KcnfError):
    pass


class BudgetExhausted(KcnfError):
    """A rejection loop or step budget ran out."""


class ComponentTooLarge(KcnfError):
    pass


class UnsatisfiableComponent(KcnfError):
    pass


class LocalUniformityViolated(KcnfError):
    """The exact marginal at a leaf falls outside [(1-delta)/2, (1+delta)/2]."""


class InvalidSlack(KcnfError):
    pass


class DegenerateMarginal(KcnfError):
    pass


class UnsupportedMode(KcnfError):
    pass


class TooLarge(KcnfError):
    pass
