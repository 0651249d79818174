"""Input checks shared by the estimator classes."""
import numpy as np
from sklearn.utils import check_array, check_consistent_length, column_or_1d


def check_signal(x, name="X") -> np.ndarray:
    """Return a finite float 1-D array from a vector or single-column matrix."""
    arr = check_array(x, ensure_2d=False, dtype=float, input_name=name)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"{name} must be a single signal, got shape {arr.shape}")
        arr = arr[:, 0]
    return column_or_1d(arr)


def check_io(X, y, min_samples: int = 1):
    """Validate a matching input/output pair of signals."""
    u = check_signal(X, "X")
    y = check_signal(y, "y")
    check_consistent_length(u, y)
    if u.size < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {u.size}")
    return u, y
