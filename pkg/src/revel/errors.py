"""Exception types shared across the engine."""


class ConfigError(ValueError):
    """Invalid run configuration or config file."""


class BlackBoxError(RuntimeError):
    """Failure while evaluating a black-box model."""


class ProtocolError(BlackBoxError):
    """External model server violated the wire protocol (bad response, timeout, exit)."""


class BudgetExhaustedError(BlackBoxError):
    """An evaluation batch would exceed the configured evaluation budget."""


class SingularSystemError(RuntimeError):
    """Unregularized regression on a rank-deficient design; caller must decide."""
