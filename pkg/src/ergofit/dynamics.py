"""Orbit generation, finite samples of the sequence family, and the d_{n,p} pseudo-metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidArgumentError
from .families import DyadicAngle, ModelFamily

MAX_HORIZON = 1 << 20


def orbit(family: ModelFamily, theta, x0, n: int) -> np.ndarray:
    """Observed orbit ``(f(x0), f(T x0), ..., f(T^{n-1} x0))`` of one model."""
    n = _check_horizon(n)
    theta = tuple(theta)
    family.params.validate(theta)
    family.validate_state(x0)
    if isinstance(x0, DyadicAngle):
        if family.exact_orbit is not None:
            exact = family.exact_orbit(theta, x0, n)
            if exact is not None:
                return exact
        x0 = x0.x
    x = np.asarray(x0)
    if family.state_dim > 1 or family.state_domain == "torus":
        x = x.reshape(1, family.state_dim)
    else:
        x = x.reshape(1)
    return orbits(family, theta, x, n)[0]


def orbits(family: ModelFamily, theta, states, n: int, dtype=np.float64) -> np.ndarray:
    """Vectorized orbits: one row per initial state.

    ``theta`` entries may be scalars or arrays aligned with the rows of
    ``states``.  No domain validation happens here; callers validate.
    """
    n = _check_horizon(n)
    x = np.asarray(states)
    m = x.shape[0]
    out = np.empty((m, n), dtype=dtype)
    for k in range(n):
        out[:, k] = family.observe(theta, x)
        if k + 1 < n:
            x = family.step(theta, x)
    return out


def advance(family: ModelFamily, theta, states, steps: int):
    """Apply ``T_theta`` ``steps`` times (burn-in)."""
    x = np.asarray(states)
    for _ in range(int(steps)):
        x = family.step(theta, x)
    return x


def _check_horizon(n) -> int:
    n = int(n)
    if n < 1:
        raise InvalidArgumentError("horizon n must be >= 1")
    if n > MAX_HORIZON:
        raise InvalidArgumentError(f"horizon {n} exceeds the eager materialization cap {MAX_HORIZON}")
    return n


@dataclass
class SequenceSample:
    """Finite proxy for the family's sequence set: one row per (theta, x0) pair."""

    family_id: str
    n: int
    thetas: list
    x0: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != self.n:
            raise InvalidArgumentError("sample values must have shape (entries, n)")
        if len(self.thetas) != self.values.shape[0] or len(self.x0) != self.values.shape[0]:
            raise InvalidArgumentError("sample metadata does not match the number of sequences")

    def __len__(self):
        return self.values.shape[0]

    @property
    def entries(self):
        for th, x, seq in zip(self.thetas, self.x0, self.values):
            yield th, x, seq

    def prefix(self, n: int) -> "SequenceSample":
        if not 1 <= n <= self.n:
            raise InvalidArgumentError(f"prefix length {n} outside [1, {self.n}]")
        return SequenceSample(self.family_id, n, self.thetas, self.x0, np.ascontiguousarray(self.values[:, :n]))

    @classmethod
    def from_values(cls, values, family_id: str = "ad-hoc") -> "SequenceSample":
        values = np.atleast_2d(np.asarray(values, dtype=float))
        m = values.shape[0]
        return cls(family_id, values.shape[1], [()] * m, np.arange(m), values)


def sample_sequences(family: ModelFamily, theta_grid, x_grid, n: int, dtype=np.float64) -> SequenceSample:
    """Orbits for every (theta, x0) pair, theta outer and x0 inner."""
    theta_grid = [tuple(t) for t in theta_grid]
    x_grid = np.asarray(x_grid)
    if not theta_grid or x_grid.size == 0:
        raise InvalidArgumentError("theta grid and x grid must be nonempty")
    if family.state_dim > 1 or family.state_domain == "torus":
        x_grid = x_grid.reshape(-1, family.state_dim)
    for th in theta_grid:
        family.params.validate(th)
    if not family.contains_state(x_grid):
        raise DomainError("x grid leaves the state domain")
    m = x_grid.shape[0]
    n = _check_horizon(n)
    values = np.empty((len(theta_grid) * m, n), dtype=dtype)
    thetas = []
    for i, th in enumerate(theta_grid):
        values[i * m:(i + 1) * m] = orbits(family, th, x_grid, n, dtype=dtype)
        thetas.extend([th] * m)
    x0 = np.concatenate([x_grid] * len(theta_grid)) if len(theta_grid) > 1 else x_grid
    return SequenceSample(family.id, n, thetas, x0, values)


def pseudo_metric(u, v, p=2) -> float:
    """``d_{n,p}``: normalized l_p distance on the first n coordinates, or the max for p = inf."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise InvalidArgumentError("pseudo_metric needs two 1-d sequences of equal length")
    p = float(p)
    if not p >= 1.0:
        raise InvalidArgumentError("p must be >= 1")
    diff = np.abs(u - v)
    if np.isinf(p):
        return float(diff.max())
    scale = diff.max()
    if scale == 0.0:
        return 0.0
    # factor out the max to avoid underflow for large p
    return float(scale * np.mean((diff / scale) ** p) ** (1.0 / p))
