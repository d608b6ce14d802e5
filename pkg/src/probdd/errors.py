"""Exception types shared across the package."""


class ParseError(ValueError):
    """Malformed CNF, weight-file, or diagram text input."""


class WeightError(ValueError):
    """Weight function violates non-negativity or per-variable positivity."""


class StructureError(ValueError):
    """A diagram violates a structural property.

    ``property_name`` identifies the violated property ("determinism",
    "decomposability", "smoothness", ...) and ``node_id`` the offending
    node when one can be named.
    """

    def __init__(self, message, *, property_name=None, node_id=None):
        super().__init__(message)
        self.property_name = property_name
        self.node_id = node_id


class GuardError(RuntimeError):
    """A resource guard (variable count, enumeration size) was exceeded."""


class ZeroProbabilityError(RuntimeError):
    """No satisfying assignment has positive probability under the weights."""


class SoundnessError(RuntimeError):
    """A sampled assignment does not satisfy its formula (sampler bug)."""
