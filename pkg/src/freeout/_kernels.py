"""Float kernels for ratio maxima of linear-fractional functions.

``ratio_max(P, Q, lengths)`` is ``max_i (P_i . l) / (Q_i . l)``.  The numba
versions are used unless ``FREEOUT_NO_NUMBA`` is set (or numba is missing).
"""

from __future__ import annotations

import os

import numpy as np


def _ratio_max_np(P, Q, lengths):
    r = (P @ lengths) / (Q @ lengths)
    i = int(np.argmax(r))
    return float(r[i]), i


def _ratio_max_batch_np(P, Q, L):
    return ((L @ P.T) / (L @ Q.T)).max(axis=1)


USE_NUMBA = not os.environ.get("FREEOUT_NO_NUMBA")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if USE_NUMBA:

    @njit(cache=True)
    def _ratio_max_nb(P, Q, lengths):
        best = -1.0
        arg = 0
        for i in range(P.shape[0]):
            num = 0.0
            den = 0.0
            for j in range(P.shape[1]):
                num += P[i, j] * lengths[j]
                den += Q[i, j] * lengths[j]
            r = num / den
            if r > best:
                best = r
                arg = i
        return best, arg

    @njit(cache=True)
    def _ratio_max_batch_nb(P, Q, L):
        out = np.empty(L.shape[0])
        for s in range(L.shape[0]):
            best = -1.0
            for i in range(P.shape[0]):
                num = 0.0
                den = 0.0
                for j in range(P.shape[1]):
                    num += P[i, j] * L[s, j]
                    den += Q[i, j] * L[s, j]
                r = num / den
                if r > best:
                    best = r
            out[s] = best
        return out

    def ratio_max(P, Q, lengths):
        v, i = _ratio_max_nb(P, Q, lengths)
        return float(v), int(i)

    ratio_max_batch = _ratio_max_batch_nb
else:
    ratio_max = _ratio_max_np
    ratio_max_batch = _ratio_max_batch_np

BACKEND = "numba" if USE_NUMBA else "numpy"
