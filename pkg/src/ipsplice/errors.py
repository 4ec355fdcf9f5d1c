class DomainError(ValueError):
    """An operation was called outside the domain where it is defined."""
