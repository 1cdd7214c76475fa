"""Exception hierarchy for triadlab."""


class TriadLabError(Exception):
    """Base class for all library errors."""


class GraphError(TriadLabError):
    pass


class DisconnectedGraph(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class InvalidNode(GraphError):
    pass


class EmptySet(GraphError):
    pass


class NotConvex(GraphError):
    pass


class NoGate(GraphError):
    """Raised when a convex set has no gate for some node (input is not a median graph)."""


class NotAnEdge(GraphError):
    pass


class NotMedianGraph(GraphError):
    pass


class AmbiguousMidpoint(TriadLabError):
    """The interval between a dyad is not a path, so no symmetric midpoint exists."""


class InvalidSpec(TriadLabError):
    pass


class ParseError(InvalidSpec):
    pass


class SchemaError(InvalidSpec):
    pass


class IndivisibleRemainder(InvalidSpec):
    pass


class OutOfRange(TriadLabError, ValueError):
    pass


class DegenerateProfile(TriadLabError):
    """All participants share one opinion, so D(x*) = 0 and ratios are undefined."""
