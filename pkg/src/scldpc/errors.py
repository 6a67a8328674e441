"""Exceptions shared across the package."""


class SpecError(ValueError):
    """Inconsistent ensemble description."""


class NoBracketError(RuntimeError):
    """A threshold search found no parameter interval that straddles the transition."""
