from typing import Optional


class ConfigurationError(Exception):
    pass


class InputError(Exception):
    pass


class GeometryParseError(InputError):
    pass


class PercolationError(InputError):
    pass


class NonConvergenceError(Exception):
    def __init__(self, msg: str, *, residual: float, steps: int):
        super().__init__(msg)
        self.residual = residual
        self.steps = steps


class NumericalBlowupError(Exception):
    def __init__(self, msg: str, cell: Optional[tuple] = None):
        super().__init__(msg)
        self.cell = cell


class InstabilityError(NumericalBlowupError):
    pass


class MediatorDepletedError(Exception):
    pass


class BiofilmClogError(Exception):
    pass
