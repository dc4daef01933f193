"""Random walks under several increment laws, plus order statistics of their partial sums."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

_MASK64 = (1 << 64) - 1


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``seed ^ stream``.

    Replica ``r`` of an experiment uses ``make_rng(seed, r)`` so streams are
    reproducible and independent of how work is split across workers.
    """
    if seed is None:
        raise ValueError("a seed is required")
    key = (int(seed) ^ int(stream)) & _MASK64
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SimpleSymmetric:
    """Increments +1 or -1 with probability 1/2 each."""

    name = "ssrw"

    def validate(self) -> None:
        return None

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def sd(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Gaussian:
    sigma: float = 1.0
    mu: float = 0.0
    name = "gaussian"

    def validate(self) -> None:
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"gaussian sigma must be positive, got {self.sigma}")
        if not np.isfinite(self.mu):
            raise ValueError("gaussian mu must be finite")

    @property
    def mean(self) -> float:
        return float(self.mu)

    @property
    def sd(self) -> float:
        return float(self.sigma)


@dataclass(frozen=True)
class Laplace:
    """Symmetric Laplace increments with density exp(-|x|/b) / (2b)."""

    b: float = 1.0
    name = "laplace"

    def validate(self) -> None:
        if not (np.isfinite(self.b) and self.b > 0):
            raise ValueError(f"laplace scale b must be positive, got {self.b}")

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def sd(self) -> float:
        return float(np.sqrt(2.0) * self.b)


@dataclass(frozen=True)
class Mixture:
    """One component is drawn per path, then increments are i.i.d. given the draw."""

    components: tuple = field(default_factory=tuple)
    name = "mixture"

    def validate(self) -> None:
        if len(self.components) == 0:
            raise ValueError("mixture needs at least one component")
        weights = np.array([w for w, _ in self.components], dtype=float)
        if np.any(~np.isfinite(weights)) or np.any(weights <= 0):
            raise ValueError("mixture weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"mixture weights must sum to 1, got {weights.sum()}")
        for _, sub in self.components:
            if isinstance(sub, Mixture):
                raise ValueError("nested mixtures are not supported")
            sub.validate()

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components], dtype=float)

    @property
    def specs(self) -> list:
        return [s for _, s in self.components]

    @property
    def mean(self) -> float:
        return float(sum(w * s.mean for w, s in self.components))


IncrementSpec = Union[SimpleSymmetric, Gaussian, Laplace, Mixture]


def validate_spec(spec: IncrementSpec) -> IncrementSpec:
    if not isinstance(spec, (SimpleSymmetric, Gaussian, Laplace, Mixture)):
        raise TypeError(f"unknown increment spec {spec!r}")
    spec.validate()
    return spec


def is_continuous(spec: IncrementSpec) -> bool:
    if isinstance(spec, Mixture):
        return all(is_continuous(s) for s in spec.specs)
    return not isinstance(spec, SimpleSymmetric)


def parse_spec(text: str) -> IncrementSpec:
    """Parse a compact spec string.

    Accepted forms: ``ssrw``, ``gaussian[:sigma[:mu]]``, ``laplace[:b]`` and
    ``mixture:w1*sub1;w2*sub2`` with each ``sub`` one of the previous forms.
    """
    text = text.strip()
    head, _, rest = text.partition(":")
    head = head.lower()
    if head in ("ssrw", "simple", "simple-symmetric"):
        if rest:
            raise ValueError("ssrw takes no parameters")
        return SimpleSymmetric()
    if head in ("gaussian", "normal"):
        parts = [p for p in rest.split(":") if p] if rest else []
        if len(parts) > 2:
            raise ValueError(f"bad gaussian spec {text!r}")
        sigma = float(parts[0]) if parts else 1.0
        mu = float(parts[1]) if len(parts) > 1 else 0.0
        return validate_spec(Gaussian(sigma, mu))
    if head == "laplace":
        b = float(rest) if rest else 1.0
        return validate_spec(Laplace(b))
    if head == "mixture":
        comps = []
        for item in rest.split(";"):
            w, star, sub = item.partition("*")
            if not star:
                raise ValueError(f"mixture component needs 'weight*spec', got {item!r}")
            comps.append((float(w), parse_spec(sub)))
        return validate_spec(Mixture(tuple(comps)))
    raise ValueError(f"unknown increment model {head!r}")


def spec_to_dict(spec: IncrementSpec) -> dict:
    if isinstance(spec, SimpleSymmetric):
        return {"model": "ssrw"}
    if isinstance(spec, Gaussian):
        return {"model": "gaussian", "sigma": spec.sigma, "mu": spec.mu}
    if isinstance(spec, Laplace):
        return {"model": "laplace", "b": spec.b}
    return {
        "model": "mixture",
        "components": [{"weight": w, "spec": spec_to_dict(s)} for w, s in spec.components],
    }


def spec_from_dict(d: dict) -> IncrementSpec:
    model = d.get("model")
    if model == "ssrw":
        return SimpleSymmetric()
    if model == "gaussian":
        return validate_spec(Gaussian(float(d.get("sigma", 1.0)), float(d.get("mu", 0.0))))
    if model == "laplace":
        return validate_spec(Laplace(float(d.get("b", 1.0))))
    if model == "mixture":
        comps = tuple((float(c["weight"]), spec_from_dict(c["spec"])) for c in d["components"])
        return validate_spec(Mixture(comps))
    raise ValueError(f"unknown increment model {model!r}")


def _draw_iid(spec: IncrementSpec, shape, rng: np.random.Generator) -> np.ndarray:
    if isinstance(spec, SimpleSymmetric):
        return 2 * rng.integers(0, 2, size=shape, dtype=np.int64) - 1
    if isinstance(spec, Gaussian):
        return spec.mu + spec.sigma * rng.standard_normal(shape)
    if isinstance(spec, Laplace):
        return rng.laplace(0.0, spec.b, size=shape)
    raise TypeError(f"cannot draw i.i.d. increments from {spec!r}")


def draw_components(spec: Mixture, reps: int, rng: np.random.Generator) -> np.ndarray:
    """Component index for each of ``reps`` paths."""
    return rng.choice(len(spec.components), size=reps, p=spec.weights)


def sample_increments(spec: IncrementSpec, reps: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """A ``(reps, n)`` array of increments, one row per independent path.

    Simple-walk increments come back as int64, everything else as float64.
    """
    validate_spec(spec)
    if not isinstance(spec, Mixture):
        return _draw_iid(spec, (reps, n), rng)
    comp = draw_components(spec, reps, rng)
    dtype = np.int64 if not is_continuous(spec) else np.float64
    out = np.empty((reps, n), dtype=dtype if all(isinstance(s, SimpleSymmetric) for s in spec.specs) else np.float64)
    for j, sub in enumerate(spec.specs):
        rows = np.flatnonzero(comp == j)
        if rows.size:
            out[rows] = _draw_iid(sub, (rows.size, n), rng)
    return out


def _frozen(a) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WalkPath:
    """Increments X_1..X_n and partial sums S_0..S_n with S_0 = 0."""

    increments: np.ndarray
    sums: np.ndarray

    @classmethod
    def from_increments(cls, increments: Sequence) -> "WalkPath":
        x = np.asarray(increments)
        if x.ndim != 1:
            raise ValueError("increments must be one-dimensional")
        if x.dtype.kind not in "iuf":
            x = x.astype(np.float64)
        if x.dtype.kind == "f" and not np.all(np.isfinite(x)):
            raise ValueError("increments must be finite (NaN is rejected)")
        if x.dtype.kind in "iu":
            x = x.astype(np.int64)
        s = np.concatenate([np.zeros(1, dtype=x.dtype), np.cumsum(x)])
        return cls(_frozen(x), _frozen(s))

    @classmethod
    def from_sums(cls, sums: Sequence) -> "WalkPath":
        s = np.asarray(sums)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("sums must be a non-empty one-dimensional sequence")
        if s[0] != 0:
            raise ValueError("sums must start at 0")
        if s.dtype.kind == "f" and not np.all(np.isfinite(s)):
            raise ValueError("sums must be finite (NaN is rejected)")
        return cls(_frozen(np.diff(s)), _frozen(s))

    @property
    def n(self) -> int:
        return int(self.increments.size)

    def same_as(self, other: "WalkPath") -> bool:
        return np.array_equal(self.increments, other.increments) and np.array_equal(self.sums, other.sums)

    def to_dict(self) -> dict:
        return {"increments": self.increments.tolist()}


@dataclass(frozen=True, eq=False)
class OrderStats:
    values: np.ndarray
    gaps: np.ndarray
    shifted: np.ndarray
    argmin_last: int

    @property
    def min(self):
        return self.values[0]

    @property
    def max(self):
        return self.values[-1]


def sample_path(spec: IncrementSpec, n: int, seed: int) -> WalkPath:
    """One walk of length ``n``; a mixture draws its component once per path."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = make_rng(seed)
    return WalkPath.from_increments(sample_increments(spec, 1, n, rng)[0])


def order_statistics(path: WalkPath) -> OrderStats:
    s = path.sums
    values = np.sort(s, kind="stable")
    gaps = np.diff(values)
    shifted = values - values[0]
    argmin_last = int(s.size - 1 - np.argmin(s[::-1]))
    return OrderStats(_frozen(values), _frozen(gaps), _frozen(shifted), argmin_last)


def reverse_path(path: WalkPath) -> WalkPath:
    return WalkPath.from_increments(path.increments[::-1])


def batch_order_gaps(sums: np.ndarray) -> np.ndarray:
    """Row-wise sorted partial sums for a ``(reps, n+1)`` array."""
    return np.sort(sums, axis=1)
