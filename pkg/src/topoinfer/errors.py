"""Exception hierarchy shared by every module."""


class TopoInferError(Exception):
    """Base class; the CLI maps these to exit code 3."""


class DisconnectedGraph(TopoInferError):
    pass


class InvalidTopology(TopoInferError):
    pass


class NoConvergence(TopoInferError):
    pass


class DimensionMismatch(TopoInferError):
    pass


class NoConsecutiveActivity(TopoInferError):
    pass


class SilentNode(TopoInferError):
    def __init__(self, nodes):
        self.nodes = list(nodes)
        super().__init__(f"nodes with no observed transmissions: {self.nodes}")


class EigenFailure(TopoInferError):
    pass


class NonPositivePi(TopoInferError):
    pass


class DegenerateInput(TopoInferError):
    pass


class DegenerateClustering(DegenerateInput):
    pass


class ZeroDistance(TopoInferError):
    pass


class MissingPositions(TopoInferError):
    pass


class LengthMismatch(TopoInferError):
    pass


class SeriesTooShort(TopoInferError):
    pass


class TruthEmpty(TopoInferError):
    pass


class ConfigError(TopoInferError):
    pass
