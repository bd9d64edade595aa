"""Exact noise tracking for the doubling-conjugate logistic map ``4x(1-x)``.

With ``x = sin^2(pi z)`` the map acts as ``z -> 2z mod 1``, so an orbit is a
binary expansion ``z = 0.b0 b1 b2 ...`` read through a sliding window.  A
dynamic program over the last ``w`` bits picks the expansion that optimizes
an additive per-step score; the winning bits define a ``DyadicAngle`` whose
orbit is then evaluated exactly.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, PrecisionError
from .families import DyadicAngle

WINDOW = 12
ORACLE_MAX_N = 40


def window_values(w: int = WINDOW) -> np.ndarray:
    """Observation at the midpoint of every w-bit angle cell."""
    s = np.arange(1 << w)
    return np.sin(np.pi * (s + 0.5) / float(1 << w)) ** 2


def track_doubling(score: Callable[[int, np.ndarray], np.ndarray], n: int, w: int = WINDOW,
                   maximize: bool = True) -> DyadicAngle:
    """Angle whose orbit (approximately) optimizes ``sum_k score(k, u_k)``.

    ``score(k, u)`` receives the window midpoint values ``u`` (length 2**w)
    and returns the per-cell score at time k.  Ties go to the zero bit.
    """
    n = int(n)
    if n < 1:
        raise InvalidArgumentError("tracking horizon must be >= 1")
    if not 2 <= w <= 20:
        raise InvalidArgumentError("window must lie in [2, 20] bits")
    u = window_values(w)
    size = 1 << w
    half = size >> 1
    sgn = 1.0 if maximize else -1.0
    V = sgn * np.asarray(score(0, u), dtype=float)
    choice = np.zeros((n, size), dtype=np.uint8)
    succ = np.arange(size)
    pred0 = succ >> 1
    pred1 = pred0 | half
    for k in range(1, n):
        a, b = V[pred0], V[pred1]
        pick = b > a
        choice[k] = pick
        V = np.where(pick, b, a) + sgn * np.asarray(score(k, u), dtype=float)
    s = int(np.argmax(V))
    states = np.empty(n, dtype=np.int64)
    states[n - 1] = s
    for k in range(n - 1, 0, -1):
        s = (s >> 1) | (int(choice[k, s]) << (w - 1))
        states[k - 1] = s
    num = int(states[0])
    for k in range(1, n):
        num = (num << 1) | int(states[k] & 1)
    # trailing one bit puts the angle at a cell midpoint
    num = (num << 1) | 1
    return DyadicAngle(num, n + w)


def track_noise(eps, w: int = WINDOW):
    """Angle maximizing ``sum eps_k u_k`` and the exact achieved value."""
    eps = np.asarray(eps, dtype=float)
    z = track_doubling(lambda k, u: eps[k] * u, eps.size, w, maximize=True)
    orbit = z.doubling_orbit(eps.size)
    return z, float(orbit @ eps)


def inverse_branches(w: float):
    """Preimages ``(g-(w), g+(w))`` of ``w`` under ``4x(1-x)``."""
    r = np.sqrt(max(0.0, 1.0 - w))
    return 0.5 * (1.0 - r), 0.5 * (1.0 + r)


def tracking_oracle_logistic4(eps):
    """Backward-iteration tracker for short noise sequences.

    Target symbols are the upper half of [0, 1] where ``eps_k > 0`` and the
    lower half otherwise.  Starting from the midpoint of the last target half
    (0.75 or 0.25) the inverse branches are applied backwards.  Returns
    ``(x0, value, orbit)`` where ``orbit`` holds the backward iterates,
    ``orbit[0] = x0``, and ``value = sum orbit_k eps_k``.
    """
    eps = np.asarray(eps, dtype=float)
    if eps.ndim != 1 or eps.size == 0 or not np.all(np.isfinite(eps)):
        raise InvalidArgumentError("noise must be a nonempty finite sequence")
    n = eps.size
    if n > ORACLE_MAX_N:
        raise PrecisionError(f"backward iteration is limited to n <= {ORACLE_MAX_N} in double precision (got {n})")
    up = eps > 0
    u = np.empty(n)
    u[-1] = 0.75 if up[-1] else 0.25
    for k in range(n - 2, -1, -1):
        lo, hi = inverse_branches(u[k + 1])
        u[k] = hi if up[k] else lo
    return float(u[0]), float(u @ eps), u
