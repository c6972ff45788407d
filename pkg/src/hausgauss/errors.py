"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class EndpointHit(ArithmeticError):
    """A symbolic orbit landed on 0 before the requested coding depth."""

    def __init__(self, word, message=None):
        self.word = tuple(word)
        super().__init__(message or f"orbit hit a cylinder endpoint after {len(self.word)} digits")


class NonConvergence(RuntimeError):
    """An iterative solver did not reach its tolerance."""


class BracketFailure(NonConvergence):
    """No sign change of lambda(t) - 1 could be bracketed."""


class StaleDimension(ValueError):
    """A conformal measure was requested at an exponent that is not conformal."""


class DepthOverflow(ValueError):
    """A word is deeper than the configured depth cap."""


class DegenerateInterval(ValueError):
    """An interval of zero diameter was passed where a positive one is needed."""


class BudgetExceeded(RuntimeError):
    """A candidate enumeration exceeded its budget."""

    def __init__(self, partial, budget):
        self.partial = partial
        self.budget = budget
        super().__init__(f"candidate budget {budget} exceeded")
