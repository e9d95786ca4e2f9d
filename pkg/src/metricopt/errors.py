"""Exceptions shared across the package."""


class GuardError(RuntimeError):
    """A numerical or size guard tripped (degenerate denominator, oversized
    enumeration, degenerate ratio).  The CLI maps this to exit code 3,
    distinct from input/validation errors (exit code 2)."""
