"""Exception hierarchy shared by all modules."""


class UnfolderError(Exception):
    """Base class. ``witness`` carries whatever localizes the failure."""

    def __init__(self, message="", witness=None):
        super().__init__(message)
        self.witness = witness


class GeometryError(UnfolderError):
    pass


class NotSimple(GeometryError):
    pass


class Degenerate(GeometryError):
    pass


class ThetaOutOfRange(GeometryError):
    pass


class NegativeTime(GeometryError):
    pass


class FoldingError(UnfolderError):
    pass


class InconsistentStacking(FoldingError):
    pass


class CreasePenetration(FoldingError):
    pass


class NonNested(FoldingError):
    pass


class AtFoldPoint(FoldingError):
    def __init__(self, message="", witness=None, position=None):
        super().__init__(message, witness)
        self.position = position


class BasePointOnFold(FoldingError):
    pass


class CrossingChords(FoldingError):
    pass


class CenterOnChordInterior(FoldingError):
    pass


class InvalidFrame(FoldingError):
    def __init__(self, message="", witness=None, frame=None):
        super().__init__(message, witness)
        self.frame = frame


class MultipleChords(FoldingError):
    pass


class FlatAngle(FoldingError):
    pass


class NotBoundaryPoint(FoldingError):
    pass


class LoopsTouch(UnfolderError):
    pass


class SelfIntersecting(UnfolderError):
    pass
