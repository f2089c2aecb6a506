class ValidationError(ValueError):
    """Input data or parameters violate a documented contract."""


class InfeasibleTargetError(ValidationError):
    """Requested Bernoulli covariance cannot be realised by any joint distribution."""


class ConvergenceError(RuntimeError):
    pass
