"""Exception types shared across the package."""


class DataError(Exception):
    """A dataset file or frame stream is missing, malformed, or inconsistent."""


class NumericError(Exception):
    """A computation produced non-finite values or an ill-conditioned system."""
