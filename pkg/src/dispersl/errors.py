"""Exception hierarchy shared by the solver modules."""


class DisperslError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(DisperslError, ValueError):
    pass


class DomainError(DisperslError, ValueError):
    pass


class UnsupportedOperationError(DisperslError, NotImplementedError):
    pass


class ConstructionError(DisperslError, RuntimeError):
    """An interpolant could not be built (e.g. singular cyclic system)."""


class MomentConditionError(DisperslError, ValueError):
    def __init__(self, k, value, expected):
        self.k = k
        self.value = value
        self.expected = expected
        super().__init__(
            f"moment k={k} is {value!r}, expected {expected!r}"
        )


class NumericalFailure(DisperslError, RuntimeError):
    """Base for failures during time stepping."""


class NonConvergenceError(NumericalFailure):
    def __init__(self, node, residual, wellposedness_violated, step=None):
        self.node = node
        self.residual = residual
        self.wellposedness_violated = wellposedness_violated
        self.step = step
        msg = f"fixed point did not converge at node {node} (residual {residual:.3e})"
        if wellposedness_violated:
            msg += "; 3*dt*|f'|*slope exceeds 1"
        if step is not None:
            msg += f" in step {step}"
        super().__init__(msg)


class NumericBlowupError(NumericalFailure):
    def __init__(self, node, step=None):
        self.node = node
        self.step = step
        where = f" in step {step}" if step is not None else ""
        super().__init__(f"non-finite value at node {node}{where}")


class DerivativeSingularityError(NumericalFailure):
    def __init__(self, node, denominator, step=None):
        self.node = node
        self.denominator = denominator
        self.step = step
        where = f" in step {step}" if step is not None else ""
        super().__init__(
            f"derivative update denominator {denominator:.3e} at node {node}{where}"
        )


class ConfigError(DisperslError, ValueError):
    pass
