"""Exception types shared across the package."""


class ApproxonError(Exception):
    """Base class for all library errors."""


class InvalidConfig(ApproxonError):
    """Simulation configuration violates a structural constraint (e.g. t >= n/3)."""


class EventBudgetExceeded(ApproxonError):
    """The event loop ran past its budget: livelock or an undersized budget."""


class NotQuiescent(ApproxonError):
    """Round measurement requested but some honest party never produced an output."""


class MalformedPropOutput(ApproxonError):
    """A proposal-stage output set fits neither {(y,j)} nor {(y,j),(y',j+1)}.

    This indicates a violated proposal precondition upstream; it is an internal
    assertion, never a reachable protocol-message path for honest parties.
    """


class OddDiameter(ApproxonError):
    """Tree center requested for a tree of odd diameter."""


class BadAnchor(ApproxonError):
    """A decomposition anchor is not an eccentric leaf, or anchors collide."""


class BoundExceeded(ApproxonError):
    """Exhaustive exploration overflowed its configured state budget."""


class InvalidEpsilon(ApproxonError):
    """epsilon-agreement requires epsilon > 0."""


class ScenarioError(ApproxonError):
    """A scenario file failed schema or semantic validation."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
