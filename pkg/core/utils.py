from typing import TypeVar, Sequence

import numpy as np

T = TypeVar('T')


def require(value: T | None) -> T:
    """
    Ensures a value is not None.

    Raises:
        ValueError: If the value is None.
    """
    if value is None:
        raise ValueError('Expected value to not be None.')
    return value


def is_ascending(values: Sequence[float], strict: bool = True) -> bool:
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return True
    steps = np.diff(arr)
    return bool(np.all(steps > 0)) if strict else bool(np.all(steps >= 0))


def fmt_real(x: float | None) -> str:
    """Fixed 17-significant-digit rendering used by every file output."""
    if x is None:
        return ''
    return f'{float(x):.17g}'
