"""Exception and warning types shared across the package."""


class OrganSimError(Exception):
    """Base class for all organsim errors."""


class ParseError(OrganSimError):
    """Malformed record in an input file; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(OrganSimError):
    """Structurally parseable input that violates a domain invariant."""


class SchemaError(OrganSimError):
    """JSON document does not match the expected schema."""


class WidthMismatch(SchemaError):
    """Keyframe frame width disagrees with the mesh vertex count."""

    def __init__(self, expected: int, found: int):
        self.expected = expected
        self.found = found
        super().__init__(f"frame width {found} does not match mesh vertex count {expected}")


class DegenerateMesh(OrganSimError):
    """Mesh bounding box has zero extent on every axis."""


class PartitionError(OrganSimError):
    """Regions do not form a disjoint cover of the occupied cells."""


class MissingBinding(OrganSimError):
    """Operation requires a skin binding that has not been built."""


class TooFewSamples(OrganSimError):
    """Signal series too short for the requested number of harmonics."""


class InstabilityRisk(OrganSimError):
    """Configuration rejected: the explicit stability bound would be violated."""


class InstabilityDetected(OrganSimError):
    """Simulation diverged (non-finite position or runaway velocity)."""


class EmptyRegionWarning(UserWarning):
    """A region rule matched no cells, or a region has no constraints to fit."""
