"""Parametrized families of dynamical models.

A family bundles a compact parameter space, a step map ``T_theta`` and an
observation ``f_theta``.  Parameters are tuples with one entry per axis; each
entry may be a scalar or an array that broadcasts against the leading axis of
the state array, so every step/observe call is vectorized over rows.
"""
from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DomainError, InvalidParameterError

INTERVAL = "interval"
TORUS = "torus"
FINITE = "finite"


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float = 0.0
    hi: float = 1.0
    kind: str = INTERVAL
    resolution: int = 11
    labels: tuple = ()

    def __post_init__(self):
        if self.kind not in (INTERVAL, TORUS, FINITE):
            raise InvalidParameterError(f"unknown axis kind {self.kind!r}")
        if self.kind == FINITE:
            if not self.labels:
                raise InvalidParameterError(f"finite axis {self.name!r} needs labels")
            object.__setattr__(self, "lo", 0.0)
            object.__setattr__(self, "hi", float(len(self.labels) - 1))
            object.__setattr__(self, "resolution", len(self.labels))
            return
        if self.kind == TORUS:
            object.__setattr__(self, "lo", 0.0)
            object.__setattr__(self, "hi", 1.0)
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.lo > self.hi:
            raise InvalidParameterError(f"axis {self.name!r} interval [{self.lo}, {self.hi}] is not a bounded nonempty interval")
        if self.resolution < 2:
            raise InvalidParameterError(f"axis {self.name!r} needs grid resolution >= 2")

    @property
    def continuous(self) -> bool:
        return self.kind != FINITE

    def grid(self, resolution: int | None = None) -> np.ndarray:
        if self.kind == FINITE:
            return np.arange(len(self.labels))
        res = self.resolution if resolution is None else int(resolution)
        if res < 2:
            raise InvalidParameterError("grid resolution must be >= 2 on continuous axes")
        if self.kind == TORUS:
            return np.arange(res) / res
        if self.lo == self.hi:
            return np.array([self.lo])
        return np.linspace(self.lo, self.hi, res)

    def spacing(self, resolution: int | None = None) -> float:
        if self.kind == FINITE:
            return 1.0
        res = self.resolution if resolution is None else int(resolution)
        if self.kind == TORUS:
            return 1.0 / res
        return (self.hi - self.lo) / (res - 1)

    def contains(self, value) -> bool:
        v = np.asarray(value, dtype=float)
        if self.kind == FINITE:
            return bool(np.all((v == np.round(v)) & (v >= 0) & (v < len(self.labels))))
        if self.kind == TORUS:
            return bool(np.all(np.isfinite(v)))
        return bool(np.all((v >= self.lo) & (v <= self.hi)))

    def distance(self, a, b):
        d = np.abs(np.asarray(a, float) - np.asarray(b, float))
        if self.kind == TORUS:
            d = d % 1.0
            d = np.minimum(d, 1.0 - d)
        return d


@dataclass(frozen=True)
class ParameterSpace:
    axes: tuple

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if not self.axes:
            raise InvalidParameterError("parameter space needs at least one axis")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def grid_resolution(self) -> tuple:
        return tuple(a.resolution for a in self.axes)

    def continuous_axes(self) -> list[int]:
        return [i for i, a in enumerate(self.axes) if a.continuous and a.lo != a.hi]

    def grid(self, resolution: Sequence[int | None] | None = None) -> list[tuple]:
        """All grid points in lexicographic axis order."""
        if resolution is None:
            resolution = [None] * self.dim
        if len(resolution) != self.dim:
            raise InvalidParameterError(f"need one grid resolution per axis ({self.dim}), got {len(resolution)}")
        per_axis = [a.grid(r) for a, r in zip(self.axes, resolution)]
        return [tuple(_as_scalar(v) for v in combo) for combo in itertools.product(*per_axis)]

    def contains(self, theta) -> bool:
        if len(theta) != self.dim:
            return False
        return all(a.contains(v) for a, v in zip(self.axes, theta))

    def validate(self, theta):
        if not self.contains(theta):
            raise DomainError(f"parameter {theta!r} lies outside the parameter space")

    def distance(self, t1, t2) -> float:
        return float(sum(float(np.max(a.distance(x, y))) for a, x, y in zip(self.axes, t1, t2)))

    def labels(self, theta) -> tuple:
        return tuple(a.labels[int(v)] if a.kind == FINITE else v for a, v in zip(self.axes, theta))


def _as_scalar(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


@dataclass(frozen=True, order=True)
class DyadicAngle:
    """Exact state ``x = sin^2(pi z)`` with ``z = numerator / 2**bits`` in [0, 1).

    Under ``x -> 4x(1-x)`` the angle doubles modulo one, so orbits of any
    length can be generated without floating-point error accumulation.
    """

    numerator: int
    bits: int

    def __post_init__(self):
        if self.bits < 0 or not (0 <= self.numerator < (1 << self.bits) or (self.bits == 0 and self.numerator == 0)):
            raise DomainError("dyadic angle numerator must lie in [0, 2**bits)")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "DyadicAngle":
        num = 0
        for b in bits:
            num = (num << 1) | (1 if b else 0)
        return cls(num, len(bits))

    @property
    def angle(self) -> float:
        return _top_fraction(self.numerator, self.bits)

    @property
    def x(self) -> float:
        return math.sin(math.pi * self.angle) ** 2

    def doubled(self) -> "DyadicAngle":
        if self.bits == 0:
            return self
        return DyadicAngle((self.numerator << 1) & ((1 << self.bits) - 1), self.bits)

    def doubling_angles(self, n: int) -> np.ndarray:
        out = np.empty(n)
        mask = (1 << self.bits) - 1
        num = self.numerator
        for k in range(n):
            out[k] = _top_fraction(num, self.bits)
            num = (num << 1) & mask
        return out

    def doubling_orbit(self, n: int) -> np.ndarray:
        return np.sin(np.pi * self.doubling_angles(n)) ** 2


def _top_fraction(num: int, bits: int) -> float:
    if bits <= 60:
        return num / float(1 << bits) if bits else 0.0
    return (num >> (bits - 60)) / float(1 << 60)


@dataclass(frozen=True)
class Observation:
    """One entry of a rotation dictionary: a bounded continuous function on T^d."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    sup_norm: float

    def __call__(self, x):
        return self.fn(x)


def fourier_observation(freqs, kind: str = "cos", amplitude: float = 1.0) -> Observation:
    """``amplitude * cos(2 pi <freqs, x>)`` (or sin) on the torus."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    trig = {"cos": np.cos, "sin": np.sin}[kind]

    def fn(x):
        x = np.asarray(x, dtype=float)
        return amplitude * trig(2.0 * np.pi * (x.reshape(-1, freqs.size) @ freqs))

    name = f"{kind}({','.join(f'{f:g}' for f in freqs)})"
    if amplitude != 1.0:
        name = f"{amplitude:g}*{name}"
    return Observation(name, fn, abs(float(amplitude)))


def _estimate_sup(fn, d: int) -> float:
    rng = np.random.default_rng(0)
    if d == 1:
        pts = (np.arange(1 << 16) / float(1 << 16)).reshape(-1, 1)
    else:
        pts = rng.random((1 << 15, d))
    return float(np.max(np.abs(fn(pts))))


@dataclass(frozen=True, eq=False)
class ModelFamily:
    """A dynamical-model family ``{(T_theta, f_theta)}`` with uniform bound ``bound_K``."""

    id: str
    params: ParameterSpace
    state_dim: int
    state_domain: str
    step: Callable
    observe: Callable
    bound_K: float
    state_grid: Callable[[int], np.ndarray]
    sample_states: Callable[[np.random.Generator, int], np.ndarray]
    exact_orbit: Callable | None = None
    meta: Mapping = field(default_factory=dict)

    def contains_state(self, x) -> bool:
        if isinstance(x, DyadicAngle):
            return self.state_domain == INTERVAL
        x = np.asarray(x)
        if self.state_domain == "symbolic":
            return bool(np.all((x == np.round(x)) & (x >= 0)))
        if not np.all(np.isfinite(x)):
            return False
        if self.state_domain == INTERVAL:
            return bool(np.all((x >= 0.0) & (x <= 1.0)))
        return True

    def validate_state(self, x):
        if not self.contains_state(x):
            raise DomainError(f"state {x!r} lies outside the {self.state_domain} state domain")

    def label(self, theta) -> tuple:
        return self.params.labels(theta)


# --------------------------------------------------------------------------
# concrete families


def make_logistic(a_lo: float = 0.0, a_hi: float = 4.0, resolution: int = 71) -> ModelFamily:
    """Logistic maps ``x -> a x (1 - x)`` on [0, 1] with identity observation."""
    if not (0.0 <= a_lo <= a_hi <= 4.0):
        raise InvalidParameterError(f"logistic parameter range [{a_lo}, {a_hi}] must lie inside [0, 4]")
    axis = Axis("a", float(a_lo), float(a_hi), INTERVAL, resolution)

    def step(theta, x):
        # a * (x(1-x)) keeps the product <= a/4 <= 1 under rounding
        return theta[0] * (x * (1.0 - x))

    def observe(theta, x):
        return np.asarray(x, dtype=float)

    def exact_orbit(theta, z: DyadicAngle, n: int):
        if float(theta[0]) == 4.0:
            return z.doubling_orbit(n)
        return None

    return ModelFamily(
        id="logistic",
        params=ParameterSpace((axis,)),
        state_dim=1,
        state_domain=INTERVAL,
        step=step,
        observe=observe,
        bound_K=1.0,
        state_grid=lambda m: np.linspace(0.0, 1.0, int(m)),
        sample_states=lambda rng, m: rng.random(int(m)),
        exact_orbit=exact_orbit,
        meta={"a_range": (float(a_lo), float(a_hi)), "chaotic_parameters": (4.0,) if a_hi == 4.0 else ()},
    )


def make_identity_vs_chaos() -> ModelFamily:
    """Two models on [0, 1]: the identity map and ``4x(1-x)``, both observed directly."""
    axis = Axis("map", kind=FINITE, labels=("identity", "chaotic"))

    def step(theta, x):
        which = np.asarray(theta[0])
        return np.where(which == 1, 4.0 * (x * (1.0 - x)), x)

    def observe(theta, x):
        return np.asarray(x, dtype=float)

    def exact_orbit(theta, z: DyadicAngle, n: int):
        if int(theta[0]) == 1:
            return z.doubling_orbit(n)
        return np.full(n, z.x)

    return ModelFamily(
        id="identity_vs_chaos",
        params=ParameterSpace((axis,)),
        state_dim=1,
        state_domain=INTERVAL,
        step=step,
        observe=observe,
        bound_K=1.0,
        state_grid=lambda m: np.linspace(0.0, 1.0, int(m)),
        sample_states=lambda rng, m: rng.random(int(m)),
        exact_orbit=exact_orbit,
        meta={"chaotic_parameters": (1,)},
    )


def make_rotation(d: int = 1, dictionary: Sequence | None = None, resolution: int = 64) -> ModelFamily:
    """Rotations ``x -> x + alpha`` on T^d observed through a finite dictionary."""
    if int(d) < 1:
        raise InvalidParameterError("rotation dimension must be >= 1")
    d = int(d)
    if dictionary is None:
        dictionary = [fourier_observation(np.eye(d)[0])]
    entries = []
    for item in dictionary:
        if isinstance(item, Observation):
            entries.append(item)
        elif callable(item):
            sup = _estimate_sup(item, d)
            entries.append(Observation(getattr(item, "__name__", f"f{len(entries)}"), item, sup))
        else:
            raise InvalidParameterError(f"dictionary entry {item!r} is not callable")
    if not entries:
        raise InvalidParameterError("rotation dictionary must be nonempty")
    entries = tuple(entries)
    axes = tuple(Axis(f"alpha{i}", kind=TORUS, resolution=resolution) for i in range(d))
    axes += (Axis("f", kind=FINITE, labels=tuple(e.name for e in entries)),)

    def _alpha(theta):
        return np.stack([np.asarray(t, dtype=float) for t in theta[:d]], axis=-1)

    def step(theta, x):
        y = np.asarray(x, dtype=float) + _alpha(theta)
        y = y - np.floor(y)
        return np.where(y >= 1.0, 0.0, y)

    def observe(theta, x):
        x = np.asarray(x, dtype=float)
        idx = np.asarray(theta[d])
        flat = x.reshape(-1, d)
        if idx.ndim == 0:
            out = entries[int(idx)](flat)
        else:
            idx = np.broadcast_to(idx, flat.shape[:1])
            out = np.empty(flat.shape[0])
            for j in np.unique(idx):
                sel = idx == j
                out[sel] = entries[int(j)](flat[sel])
        return out.reshape(x.shape[:-1]) if x.ndim > 1 else out.reshape(())

    def state_grid(m):
        g = np.arange(int(m)) / int(m)
        if d == 1:
            return g.reshape(-1, 1)
        return np.array(list(itertools.product(g, repeat=d)))

    return ModelFamily(
        id="rotation",
        params=ParameterSpace(axes),
        state_dim=d,
        state_domain=TORUS,
        step=step,
        observe=observe,
        bound_K=max(e.sup_norm for e in entries),
        state_grid=state_grid,
        sample_states=lambda rng, m: rng.random((int(m), d)),
        meta={"dictionary": entries},
    )


class SubstitutionWord:
    """Lazily expanded one-sided fixed point of a primitive substitution."""

    def __init__(self, rules: Mapping, alphabet: Sequence | None = None):
        if alphabet is None:
            alphabet = list(rules.keys())
        self.alphabet = tuple(alphabet)
        index = {s: i for i, s in enumerate(self.alphabet)}
        if set(rules) != set(self.alphabet):
            raise InvalidParameterError("substitution rules must define exactly one image per alphabet symbol")
        try:
            self.images = tuple(np.array([index[c] for c in rules[s]], dtype=np.int64) for s in self.alphabet)
        except KeyError as exc:
            raise InvalidParameterError(f"rule image uses symbol {exc.args[0]!r} outside the alphabet") from None
        if any(img.size == 0 for img in self.images):
            raise InvalidParameterError("substitution images must be nonempty")
        self.matrix = np.zeros((len(self.alphabet), len(self.alphabet)), dtype=np.int64)
        for i, img in enumerate(self.images):
            np.add.at(self.matrix[i], img, 1)
        if not is_primitive(self.matrix):
            raise InvalidParameterError("substitution is not primitive")
        if all(img.size == 1 for img in self.images):
            raise InvalidParameterError("substitution is not expanding (all images have length 1)")
        self.seed_symbol, self.power = self._find_fixed_point_seed()
        self._lock = threading.Lock()
        self._buffer = np.array([self.seed_symbol], dtype=np.int64)

    def _apply(self, word: np.ndarray) -> np.ndarray:
        lengths = np.array([img.size for img in self.images])[word]
        offsets = np.concatenate(([0], np.cumsum(lengths)[:-1]))
        out = np.empty(int(lengths.sum()), dtype=np.int64)
        for s, img in enumerate(self.images):
            pos = offsets[word == s]
            for t, sym in enumerate(img):
                out[pos + t] = sym
        return out

    def _find_fixed_point_seed(self):
        n = len(self.alphabet)
        # some symbol starts its own image under a power <= |alphabet|
        for power in range(1, n + 1):
            for a in range(n):
                w = np.array([a], dtype=np.int64)
                for _ in range(power):
                    w = self._apply(w)
                if w[0] == a and w.size >= 2:
                    return a, power
        raise InvalidParameterError("no iterate of the substitution has a growing fixed point")

    def prefix(self, length: int) -> np.ndarray:
        length = int(length)
        with self._lock:
            buf = self._buffer
            while buf.size < length:
                target = max(length, 2 * buf.size)
                while buf.size < target:
                    for _ in range(self.power):
                        buf = self._apply(buf)
            self._buffer = buf
        return buf[:length]

    def symbols_at(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 0:
            return idx.copy()
        buf = self.prefix(int(idx.max()) + 1)
        return buf[idx]


def is_primitive(matrix: np.ndarray) -> bool:
    """Nonnegative square matrix with some power strictly positive (Wielandt bound)."""
    m = (np.asarray(matrix) > 0).astype(np.int64)
    n = m.shape[0]
    power = m.copy()
    for _ in range((n - 1) ** 2 + 1):
        if np.all(power > 0):
            return True
        power = np.minimum(power @ m, 1)
    return bool(np.all(power > 0))


def make_substitution(rules: Mapping, alphabet: Sequence | None = None, value_map: Mapping | None = None) -> ModelFamily:
    """Shift on the fixed point of a primitive substitution.

    The state is a position into the fixed-point word; the parameter set is
    the singleton holding ``rules``.
    """
    word = SubstitutionWord(rules, alphabet)
    if value_map is None:
        value_map = {s: float(i) for i, s in enumerate(word.alphabet)}
    try:
        values = np.array([float(value_map[s]) for s in word.alphabet])
    except KeyError as exc:
        raise InvalidParameterError(f"value_map misses symbol {exc.args[0]!r}") from None
    if not np.all(np.isfinite(values)):
        raise InvalidParameterError("value_map must be bounded")
    rule_label = ",".join(f"{s}->{''.join(map(str, rules[s]))}" for s in word.alphabet)
    axis = Axis("rules", kind=FINITE, labels=(rule_label,))

    def step(theta, x):
        return np.asarray(x, dtype=np.int64) + 1

    def observe(theta, x):
        return values[word.symbols_at(x)]

    return ModelFamily(
        id="substitution",
        params=ParameterSpace((axis,)),
        state_dim=1,
        state_domain="symbolic",
        step=step,
        observe=observe,
        bound_K=float(np.max(np.abs(values))),
        state_grid=lambda m: np.arange(int(m), dtype=np.int64),
        sample_states=lambda rng, m: rng.integers(0, 1 << 20, int(m)),
        meta={"word": word, "values": values},
    )


THUE_MORSE = {"0": "01", "1": "10"}
FIBONACCI = {"0": "01", "1": "0"}


# --------------------------------------------------------------------------
# registry used by the CLI


def _rotation_from_config(d: int = 1, dictionary: Sequence = ("cos",), resolution: int = 64) -> ModelFamily:
    entries = []
    for spec in dictionary:
        if isinstance(spec, str):
            kind, freqs = spec, np.eye(d)[0]
        else:
            kind, freqs = spec.get("kind", "cos"), spec.get("freqs", np.eye(d)[0])
            entries.append(fourier_observation(freqs, kind, spec.get("amplitude", 1.0)))
            continue
        entries.append(fourier_observation(freqs, kind))
    return make_rotation(d, entries, resolution)


def _substitution_from_config(rules: Mapping | str = "thue_morse", value_map: Mapping | None = None) -> ModelFamily:
    if isinstance(rules, str):
        rules = {"thue_morse": THUE_MORSE, "fibonacci": FIBONACCI}[rules]
    return make_substitution(dict(rules), value_map=value_map)


FAMILY_BUILDERS: dict[str, Callable[..., ModelFamily]] = {
    "logistic": make_logistic,
    "rotation": _rotation_from_config,
    "identity_vs_chaos": make_identity_vs_chaos,
    "substitution": _substitution_from_config,
}


def register_family(family_id: str, builder: Callable[..., ModelFamily]):
    FAMILY_BUILDERS[family_id] = builder


def build_family(family_id: str, **kwargs) -> ModelFamily:
    try:
        builder = FAMILY_BUILDERS[family_id]
    except KeyError:
        raise InvalidParameterError(f"unknown family id {family_id!r}") from None
    return builder(**kwargs)
