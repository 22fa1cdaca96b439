"""
Exception hierarchy for the simulator.

Report-type outcomes (energy audits, coercivity, mismatch bounds) are never
raised; they come back as reports with a ``passed`` flag.
"""
from typing import List, Optional


class SimulationError(Exception):
    """Base class for every error raised by the simulator"""


class ConfigValidationError(SimulationError):
    """Raised when a SimConfig fails validation; lists every offending key"""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("Invalid configuration:\n  - " + "\n  - ".join(self.errors))


class ParameterError(SimulationError):
    """Raised for out-of-range arguments"""


class BasisError(SimulationError):
    """Raised when the biharmonic eigensolve fails"""

    def __init__(self, message: str, index: Optional[int] = None):
        self.index = index
        super().__init__(message)


class PlateModelError(SimulationError):
    """Raised when a plate force or potential produces non-finite values"""

    def __init__(self, message: str, term: str):
        self.term = term
        super().__init__(f"{message} (term: {term})")


class SolverError(SimulationError):
    """Raised when a linear solve fails or misses its residual tolerance"""

    def __init__(self, message: str, residual: Optional[float] = None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (relative residual {residual:.3e})"
        super().__init__(message)


class GeometryError(SimulationError):
    """Raised when the Jacobian 1 + eta drops to the configured floor"""

    def __init__(self, message: str, j_min: float):
        self.j_min = j_min
        super().__init__(f"{message} (J_min = {j_min:.6g})")


class CompatibilityError(SimulationError):
    """Raised when boundary data violates the zero net flux condition"""

    def __init__(self, message: str, mismatch: float):
        self.mismatch = mismatch
        super().__init__(f"{message} (flux mismatch {mismatch:.3e})")


class SamplingError(SimulationError):
    """Raised when a sampled estimate has no usable samples"""


class StepError(SimulationError):
    """Raised when a splitting step aborts; carries the step index and ledger so far"""

    def __init__(self, message: str, step: int, ledger=None):
        self.step = step
        self.ledger = ledger
        super().__init__(f"Step {step}: {message}")
