"""Exception types shared across the package."""


class DisorderError(Exception):
    """Base class for all package errors."""


class ModelError(DisorderError, ValueError):
    """Malformed model or observation input (bad label, bad file)."""


class ContractError(DisorderError, ValueError):
    """An operation was called outside its documented preconditions."""


class ImpossiblePathError(DisorderError, ArithmeticError):
    """The observed window has zero probability under every change time."""


class ConfigurationError(DisorderError):
    """Model and threshold table do not belong together, or a run is misconfigured."""


class BudgetExceededError(DisorderError, MemoryError):
    """A table would exceed the configured memory budget."""

    def __init__(self, required_mb: float, budget_mb: float, what: str = "table"):
        self.required_mb = required_mb
        self.budget_mb = budget_mb
        super().__init__(
            f"{what} needs about {required_mb:.3g} MB, budget is {budget_mb:.3g} MB "
            f"(raise DISORDER_DETECT_BUDGET_MB to allow it)"
        )
