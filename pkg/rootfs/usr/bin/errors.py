"""Exception hierarchy shared by the threeflow modules."""


class ThreeflowError(Exception):
    """Base class for all threeflow errors."""


class DomainError(ThreeflowError, ValueError):
    """Input outside the domain of an operation (odd n, point outside I or J, ...)."""


class SizeCapError(ThreeflowError):
    """An exact or Monte Carlo computation was asked for beyond its configured cap.

    Callers should fall back to the log-space, Monte Carlo or heuristic paths.
    """

    def __init__(self, what: str, size: int, cap: int):
        super().__init__(f"{what}: size {size} exceeds cap {cap}")
        self.what = what
        self.size = size
        self.cap = cap

    def __reduce__(self):
        return type(self), (self.what, self.size, self.cap)


class RetryExhaustedError(ThreeflowError):
    """A rejection sampler used up its attempt budget."""

    def __init__(self, what: str, attempts: int):
        super().__init__(f"{what}: no success after {attempts} attempts")
        self.what = what
        self.attempts = attempts

    def __reduce__(self):
        return type(self), (self.what, self.attempts)


class ManifestError(ThreeflowError):
    """A run manifest could not be read or does not match the manifest schema."""
