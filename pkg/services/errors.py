class SelectionError(Exception):
    """Base class for every failure raised by the selection toolkit."""


class InvalidInputError(SelectionError, ValueError):
    pass


class DimensionMismatchError(InvalidInputError):
    pass


class EmptySelectionError(InvalidInputError):
    pass


class RatingsFormatError(InvalidInputError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class BudgetExceededError(SelectionError):
    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(
            f"Exhaustive search needs {required} subsets which exceeds the budget of {budget}"
        )


class SingularSystemError(SelectionError):
    pass
