class ContractViolation(ValueError):
    """Raised when an input breaks a documented precondition."""
