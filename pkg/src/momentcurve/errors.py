"""Exception types shared across the package."""

from __future__ import annotations


class ResourceBudgetError(RuntimeError):
    """Raised when a computation would exceed its memory or enumeration budget.

    ``attempted`` carries the size that was about to be allocated or enumerated,
    ``budget`` the cap it was checked against.
    """

    def __init__(self, message: str, attempted: int, budget: int):
        super().__init__(f"{message} (attempted {attempted}, budget {budget})")
        self.attempted = attempted
        self.budget = budget


class ConvergenceError(RuntimeError):
    pass
