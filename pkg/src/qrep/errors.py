"""Exceptions raised by `qrep`.

Every exception carries an `exit_code` which the command line interface uses
as process status:

- `1`: a hypothesis or precondition of the computation does not hold.
- `2`: the numerics failed (branch cut, missing spectral gap, singular path).
- `3`: input could not be read or parsed.
"""
import typing as t


class QrepError(Exception):
    exit_code = 1


class HypothesisError(QrepError, ValueError):
    exit_code = 1


class NumericalError(QrepError, ArithmeticError):
    exit_code = 2


class InputError(QrepError, ValueError):
    exit_code = 3


class InvalidMatrix(HypothesisError):
    pass


class NotHermitian(HypothesisError):
    def __init__(self, residual: float, tolerance: float) -> None:
        super().__init__(
            f"matrix is not self-adjoint: ||h - h*|| = {residual:.3e} > {tolerance:.1e}"
        )
        self.residual = residual
        self.tolerance = tolerance


class NotUnitary(HypothesisError):
    def __init__(self, residual: float, tolerance: float) -> None:
        super().__init__(
            f"matrix is not unitary: ||m*m - 1|| = {residual:.3e} > {tolerance:.1e}"
        )
        self.residual = residual
        self.tolerance = tolerance


class DimensionMismatch(HypothesisError):
    pass


class PresentationMismatch(HypothesisError):
    pass


class UnboundGenerator(HypothesisError):
    def __init__(self, generator: str, context: str = "assignment") -> None:
        super().__init__(f"generator '{generator}' is not bound in {context}")
        self.generator = generator


class StrategyUndefined(HypothesisError):
    pass


class InvalidParameter(HypothesisError):
    pass


class HypothesisViolated(HypothesisError):
    def __init__(self, bound: str, value: float, limit: float) -> None:
        super().__init__(
            f"hypothesis '{bound}' violated: {value:.6g} >= {limit:.6g} (excess {value - limit:.3e})"
        )
        self.bound = bound
        self.value = value
        self.limit = limit

    @property
    def excess(self) -> float:
        return self.value - self.limit


class DefectTooLarge(HypothesisError):
    def __init__(self, defect: float, limit: float) -> None:
        super().__init__(
            f"almost-projection defect {defect:.6g} is not below {limit:.6g}"
        )
        self.defect = defect
        self.limit = limit


class RadiusTooLarge(HypothesisError):
    def __init__(self, radius: float) -> None:
        super().__init__(f"perturbation radius {radius:.6g} must be below 2")
        self.radius = radius


class NotALoop(HypothesisError):
    def __init__(self, residual: float, tolerance: float) -> None:
        super().__init__(
            f"determinant path is not a loop: |det(w) - 1| = {residual:.3e} > {tolerance:.1e}"
        )
        self.residual = residual
        self.tolerance = tolerance


class BranchCut(NumericalError):
    def __init__(self, distance: float, margin: float) -> None:
        super().__init__(
            f"spectrum reaches the branch cut: min |lambda + 1| = {distance:.3e} <= {margin:.1e}"
        )
        self.distance = distance
        self.margin = margin


class NoSpectralGap(NumericalError):
    def __init__(self, eigenvalue: float, threshold: float, gap: float) -> None:
        super().__init__(
            f"eigenvalue {eigenvalue:.6g} lies inside ({threshold - gap:.6g}, {threshold + gap:.6g})"
        )
        self.eigenvalue = eigenvalue
        self.threshold = threshold
        self.gap = gap


class PathSingular(NumericalError):
    def __init__(
        self, at: float, modulus: float, reason: t.Optional[str] = None
    ) -> None:
        message = f"determinant path degenerates at t = {at:.6g} (|det| = {modulus:.3e})"
        if reason:
            message += f": {reason}"
        super().__init__(message)
        self.at = at
        self.modulus = modulus


class WordSyntaxError(InputError):
    def __init__(self, message: str, text: str, offset: int) -> None:
        super().__init__(f"{message} at byte {offset} in {text!r}")
        self.text = text
        self.offset = offset


class ReportFormatError(InputError):
    pass


class UsageError(InputError):
    pass
