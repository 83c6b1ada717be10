"""Exception types shared across the package."""


class DegenerateShiftError(Exception):
    """Moment matrix is numerically singular for the given shift velocity."""

    def __init__(self, utilde, cond=None):
        self.utilde = tuple(float(c) for c in utilde)
        self.cond = cond
        msg = f"moment matrix is degenerate for utilde={self.utilde}"
        if cond is not None:
            msg += f" (condition estimate {cond:.3e})"
        super().__init__(msg)


class NumericalFailureError(RuntimeError):
    """A dense numerical routine failed to converge after retries."""
