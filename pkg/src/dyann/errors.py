"""Exception types shared across the package."""


class DyannError(Exception):
    """Base class for all dyann errors."""


class UnknownNodeError(DyannError, LookupError):
    """A node address does not refer to a live node of this network."""


class NonForwardEdgeError(DyannError, ValueError):
    """Edge target is not in a strictly later layer than its source."""


class DuplicateEdgeError(DyannError, ValueError):
    """An edge between the given source and target already exists."""


class NonTrainableHeadError(DyannError, ValueError):
    """Training was requested on an output head with no delta rule."""


class InvariantViolationError(DyannError):
    """A structural invariant of the network does not hold."""


class UnknownActivationError(DyannError, ValueError):
    """An activation or head name is not one of the supported ones."""


class DocumentError(DyannError, ValueError):
    """A serialized network document is malformed."""


class BadVersionError(DocumentError):
    """The document's format_version is not supported by this reader."""


class DanglingTargetError(DocumentError):
    """An edge record points at an address outside the network."""


class UnsortedDocumentError(DocumentError):
    """Node or edge records are not in canonical lexicographic order."""
