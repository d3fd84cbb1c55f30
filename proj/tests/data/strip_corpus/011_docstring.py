def h():
    """Docstring with # hash."""
    return 0  # zero
