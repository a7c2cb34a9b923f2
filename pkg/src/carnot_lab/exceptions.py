"""Exception hierarchy.

Every domain error derives from :class:`CarnotError` so the CLI can map it to
exit code 1.  Exceptions carry the witnessing indices or vectors as attributes.
"""


class CarnotError(ValueError):
    """Base class for domain errors."""


class DimensionMismatch(CarnotError):
    pass


class JacobiViolation(CarnotError):
    def __init__(self, i, j, k):
        self.indices = (i, j, k)
        super().__init__(f"Jacobi identity fails for basis triple ({i + 1}, {j + 1}, {k + 1})")


class GradingViolation(CarnotError):
    def __init__(self, i, j, detail=""):
        self.indices = (i, j)
        msg = f"bracket [b{i + 1}, b{j + 1}] leaves layer(i)+layer(j)"
        super().__init__(msg + (f": {detail}" if detail else ""))


class GenerationFailure(CarnotError):
    def __init__(self, layer, detail=""):
        self.layer = layer
        msg = f"[V1, V{layer}] does not span V{layer + 1}"
        super().__init__(msg + (f": {detail}" if detail else ""))


class ZeroDilation(CarnotError):
    pass


class NotCentral(CarnotError):
    pass


class NotIndependent(CarnotError):
    pass


class QuotientNotCarnot(CarnotError):
    pass


class SearchInconclusive(CarnotError):
    def __init__(self, message, best_residual=float("inf")):
        self.best_residual = best_residual
        super().__init__(message)


class RankNotOne(CarnotError):
    pass


class WitnessNotRankOne(CarnotError):
    pass


class PaperInvariantViolation(CarnotError):
    """A proven structural identity failed; this indicates a bug."""


class EmptyWitnessSet(CarnotError):
    pass


class NotAnAutomorphism(CarnotError):
    def __init__(self, index, reason=""):
        self.index = index
        super().__init__(f"matrix #{index} is not a graded automorphism" + (f": {reason}" if reason else ""))


class PreconditionViolation(CarnotError):
    pass


class DegenerateForm(CarnotError):
    def __init__(self, witness):
        self.witness = witness
        super().__init__(f"bracket form is degenerate; radical contains {witness}")


class DecompositionIncomplete(CarnotError):
    pass


class ConjugateClassCollision(CarnotError):
    pass


class UnequalSummandDimensions(CarnotError):
    def __init__(self, dims, certificate=None):
        self.dims = dims
        self.certificate = certificate
        super().__init__(f"summands are not copies of one Heisenberg algebra (m values {dims})")


class ConditionFailure(CarnotError):
    def __init__(self, condition, detail=""):
        self.condition = condition
        super().__init__(f"product condition ({condition}) fails" + (f": {detail}" if detail else ""))


class BasisConstructionFailure(PaperInvariantViolation):
    pass


class NotFiliform(CarnotError):
    pass


class InternalInconsistency(CarnotError):
    pass


class DegenerateSample(CarnotError):
    pass


class StepLimitExceeded(CarnotError):
    pass
