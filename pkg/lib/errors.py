"""Exception types raised by the ConvBound library"""

from typing import List, Optional


class ConvBoundError(Exception):
    """Base class for every error raised by the library"""


class OracleTooLarge(ConvBoundError, ValueError):
    """Dense oracle asked to work on a matrix beyond the configured cap"""

    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(
            f"Dense oracle needs min(rows, cols) <= {cap}, got {size}. "
            f"Raise CONVBOUND_ORACLE_CAP or use bounded mode."
        )


class NotSymmetric(ConvBoundError, ValueError):
    """Matrix is not symmetric within tolerance"""


class NotSquare(ConvBoundError, ValueError):
    """Matrix is not square"""


class DimensionMismatch(ConvBoundError, ValueError):
    """Operand shapes do not agree"""


class FilterLargerThanInput(ConvBoundError, ValueError):
    """Filter window does not fit inside the input"""


class NotOverlapping(ConvBoundError, ValueError):
    """Toeplitz analysis requested for a stride that leaves windows disjoint"""


class ZeroSpectralNorm(ConvBoundError, ValueError):
    """A formula divides by a spectral norm that is zero"""


class DomainError(ConvBoundError, ValueError):
    """Parameter outside its admissible range"""


class InvalidNetwork(ConvBoundError, ValueError):
    """Network description fails validation"""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid network")


class ParseError(ConvBoundError, ValueError):
    """Malformed bundle manifest

    Args:
        message: What went wrong
        where: Field path (e.g. ``layers[2].d_out``) or ``line X, column Y``
    """

    def __init__(self, message: str, where: Optional[str] = None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


class ShapeMismatch(ConvBoundError, ValueError):
    """Weight payload shape differs from what the layer declares"""

    def __init__(self, layer: int, expected: tuple, actual: tuple):
        self.layer = layer
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"layer {layer}: weight shape {actual[0]}x{actual[1]} "
            f"does not match declared {expected[0]}x{expected[1]}"
        )


class NonFiniteWeight(ConvBoundError, ValueError):
    """Weight payload contains NaN or infinity"""

    def __init__(self, layer: int):
        self.layer = layer
        super().__init__(f"layer {layer}: weight payload contains non-finite values")


class BundleIOError(ConvBoundError, OSError):
    """Reading or writing bundle files failed"""
