"""Compiled recursions shared by prediction, simulation and data generation."""
import numpy as np
from numba import njit

SOURCE_CODES = {"u": 0, "y": 1, "e": 2}
WRAPPER_CODES = {"none": 0, "sin": 1, "cos": 2, "abs": 3}


@njit(cache=True, nogil=True)
def recurse(ybuf, ebuf, u, ymeas, innov, coef, wrap, fptr, fsrc, flag, fexp, start, out, res, limit):
    """Evaluate the model row by row from ``start``.

    ``ybuf``/``ebuf`` are read for lagged output and noise values. Passing
    ``out`` as ``ybuf`` closes the output feedback loop; passing ``res`` as
    ``ebuf`` feeds back the one-step residuals. Returns the first index whose
    value is non-finite or exceeds ``limit`` in magnitude, else -1.
    """
    n = u.shape[0]
    p = coef.shape[0]
    for k in range(start, n):
        yhat = 0.0
        for i in range(p):
            v = 1.0
            for f in range(fptr[i], fptr[i + 1]):
                idx = k - flag[f]
                s = fsrc[f]
                if s == 0:
                    x = u[idx]
                elif s == 1:
                    x = ybuf[idx]
                else:
                    x = ebuf[idx]
                for _ in range(fexp[f]):
                    v *= x
            w = wrap[i]
            if w == 1:
                v = np.sin(v)
            elif w == 2:
                v = np.cos(v)
            elif w == 3:
                v = abs(v)
            yhat += coef[i] * v
        val = yhat + innov[k]
        out[k] = val
        res[k] = ymeas[k] - yhat
        if not np.isfinite(val) or abs(val) > limit:
            return k
    return -1
