"""Number formatting for file output: 17 significant digits round-trips doubles."""


def g17(x):
    """Render a float with 17 significant digits (integers stay integral)."""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")
