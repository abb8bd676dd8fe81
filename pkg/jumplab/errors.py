"""
Exception hierarchy shared by every jumplab module
"""


class JumpLabError(Exception):
    """Base error; `witness` names the point, direction or triple at fault."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = dict(witness or {})

    def __str__(self):
        base = super().__str__()
        if not self.witness:
            return base
        details = ", ".join(f"{k}={v}" for k, v in self.witness.items())
        return f"{base} ({details})"


class InputError(JumpLabError, ValueError):
    pass


class StructuralError(JumpLabError):
    pass


class DecompositionError(JumpLabError):
    def __init__(self, message, pivot, witness=None):
        super().__init__(message, witness)
        self.pivot = pivot


class KernelContractError(JumpLabError):
    pass


class KernelAssumptionError(JumpLabError):
    pass


class PreconditionError(JumpLabError, ValueError):
    pass


class GeometryError(JumpLabError, ValueError):
    pass


class NumericalError(JumpLabError):
    pass


class FitError(JumpLabError):
    pass


class ConfigError(JumpLabError, ValueError):
    """Collects every problem found in a scenario document."""

    def __init__(self, problems):
        self.problems = list(problems)
        lines = [f"{message} at {path}" if path else message for path, message in self.problems]
        super().__init__("; ".join(lines))
