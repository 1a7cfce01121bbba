"""Exception hierarchy shared across the simulator."""


class ConfigurationError(ValueError):
    """Invalid scenario, array or walk configuration (CLI exit code 2)."""


class ParameterError(ValueError):
    """Invalid argument passed to an operation."""


class GeometryError(ValueError):
    """Degenerate AP/UE geometry, e.g. UE placed on top of the AP."""


class CodebookIndexError(IndexError):
    """Codeword level or index outside the codebook."""
