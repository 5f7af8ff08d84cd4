"""Exception types shared across the package."""


class StochGamesError(Exception):
    """Base class for every error raised by this package."""


# --- model construction ---

class ModelError(StochGamesError):
    pass


class DanglingReference(ModelError):
    """A declaration refers to an undeclared state, player or action."""


class BadDistribution(ModelError):
    """Probabilities do not sum to one (tolerance 1e-9) or are nonpositive."""


class DuplicateName(ModelError):
    """A label, reward or per-state action name is declared twice."""


class StateExplosion(ModelError):
    """Generated state space exceeded the configured cap."""


# --- strategies ---

class StrategyError(StochGamesError):
    pass


class UndefinedChoice(StrategyError):
    """A coalition-owned state has no entry in the strategy."""


class DisabledAction(StrategyError):
    """A strategy picks an action that is not enabled in its state."""


class WrongScheme(StrategyError):
    """The operation requires a game built with a different scheme."""


class BadProvider(StochGamesError):
    """Provider index out of range."""


# --- property language ---

class FormulaError(StochGamesError):
    pass


class FormulaSyntaxError(FormulaError):
    """Positioned parse error.  `position` is a 0-based character offset."""

    def __init__(self, message: str, position: int, expected=None):
        self.position = position
        self.expected = tuple(expected) if expected else ()
        detail = f" (expected {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at position {position}{detail}")


class UnknownPlayer(FormulaError):
    pass


class UnknownLabel(FormulaError):
    pass


class UnknownReward(FormulaError):
    pass


class BadBound(FormulaError):
    """Probability bound outside [0,1] or negative reward bound."""


# --- solving ---

class SolverError(StochGamesError):
    pass


class BadTarget(SolverError):
    """Empty or out-of-range target set."""


class NonConvergence(SolverError):
    """Value iteration did not converge within the iteration cap."""


# --- oracle ---

class TooLarge(StochGamesError):
    """Profile space exceeds the enumeration cap."""


class SingularSystem(StochGamesError):
    """Linear system for a chain evaluation could not be solved reliably."""
