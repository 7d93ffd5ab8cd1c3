"""Exception types shared across the package."""


class GHZTError(Exception):
    pass


class QubitIndexError(GHZTError, IndexError):
    pass


class ZeroProbabilityBranch(GHZTError):
    """Raised when a projection lands on a branch with (numerically) zero weight."""

    def __init__(self, qubit, bit, probability):
        super().__init__(
            f"branch q{qubit}={bit} has probability {probability:.3e}"
        )
        self.qubit = qubit
        self.bit = bit
        self.probability = probability


class NormDriftError(GHZTError):
    pass


class DimensionMismatch(GHZTError, ValueError):
    pass


class InvalidDensityMatrix(GHZTError, ValueError):
    pass


class LayoutError(GHZTError, ValueError):
    pass


class MissingClassicalBit(GHZTError):
    """A correction needs a classical bit that was never delivered."""

    def __init__(self, bit_id):
        super().__init__(f"classical bit c{bit_id} was not delivered")
        self.bit_id = bit_id


class NonPermutation(GHZTError):
    pass


class SizeCapExceeded(GHZTError, ValueError):
    pass
