"""Monte Carlo sampling of Galton-Watson trees (float mode only).

Finite-support laws and the parametric families below (geometric, Poisson,
truncated) share one interface: ``draw(rng, size)`` returns offspring counts.
Every run uses a Philox counter-based stream keyed by the seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ResourceCapError
from .offspring import OffspringDistribution
from .trees import UlamTree

DEFAULT_MAX_HEIGHT = 64
DEFAULT_MAX_NODES = 10**6


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class FiniteFamily:
    probs: tuple

    @classmethod
    def from_distribution(cls, q: OffspringDistribution) -> "FiniteFamily":
        return cls(tuple(float(p) for p in q.probs))

    @property
    def mean(self) -> float:
        return sum(k * p for k, p in enumerate(self.probs))

    def draw(self, rng, size: int) -> np.ndarray:
        cdf = np.cumsum(self.probs)
        cdf /= cdf[-1]
        return np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), len(self.probs) - 1)


@dataclass(frozen=True)
class Geometric:
    """``P(k) = (1 - r) r**k`` on ``k >= 0``."""

    r: float

    def __post_init__(self):
        if not 0 <= self.r < 1:
            raise DomainError("geometric ratio must lie in [0, 1)")

    @property
    def mean(self) -> float:
        return self.r / (1 - self.r)

    def draw(self, rng, size: int) -> np.ndarray:
        # numpy's geometric counts trials to the first success, starting at 1
        return rng.geometric(1 - self.r, size) - 1


@dataclass(frozen=True)
class Poisson:
    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise DomainError("Poisson rate must be nonnegative")

    @property
    def mean(self) -> float:
        return self.lam

    def draw(self, rng, size: int) -> np.ndarray:
        return rng.poisson(self.lam, size)


@dataclass(frozen=True)
class Truncated:
    """``base`` conditioned on ``k <= K``, sampled by rejection."""

    base: object
    K: int

    @property
    def mean(self) -> float:
        pmf = self.pmf()
        return sum(k * p for k, p in enumerate(pmf))

    def pmf(self) -> list:
        if isinstance(self.base, Poisson):
            raw = [math.exp(-self.base.lam) * self.base.lam**k / math.factorial(k) for k in range(self.K + 1)]
        elif isinstance(self.base, Geometric):
            raw = [(1 - self.base.r) * self.base.r**k for k in range(self.K + 1)]
        else:
            raise DomainError(f"cannot truncate {type(self.base).__name__}")
        total = sum(raw)
        return [x / total for x in raw]

    def draw(self, rng, size: int) -> np.ndarray:
        return FiniteFamily(tuple(self.pmf())).draw(rng, size)


def as_family(q):
    if isinstance(q, OffspringDistribution):
        return FiniteFamily.from_distribution(q)
    if hasattr(q, "draw"):
        return q
    raise DomainError(f"cannot sample from {q!r}")


def sample_gw(q, height: int, rng_seed: int, max_nodes: int = DEFAULT_MAX_NODES,
              max_height: int = DEFAULT_MAX_HEIGHT) -> UlamTree:
    """One tree truncated at ``height``; deterministic per seed."""
    if height < 0 or height > max_height:
        raise DomainError(f"height {height} outside 0..{max_height}")
    family = as_family(q)
    rng = rng_for(rng_seed)
    counts = []
    z = 1
    total = 1
    sizes = [1]
    for g in range(height):
        k = family.draw(rng, z)
        counts.append(k)
        z = int(k.sum())
        total += z
        sizes.append(z)
        if total > max_nodes:
            raise ResourceCapError(f"tree exceeds max_nodes={max_nodes}", bound="max_nodes",
                                   stats={"generation": g + 1, "generation_sizes": sizes, "nodes": total})
        if z == 0:
            break
    # assemble nested shapes bottom-up
    level = [()] * sizes[-1]
    for k in reversed(counts):
        ends = np.cumsum(k)
        starts = ends - k
        level = [tuple(level[s:e]) for s, e in zip(starts.tolist(), ends.tolist())]
    return UlamTree(level[0])


@dataclass
class GenerationSample:
    z: np.ndarray  # (n_samples, height + 1)
    mean: float
    seed: int

    def extinct_by(self, n: int) -> float:
        return float(np.mean(self.z[:, n] == 0))

    def normalized(self, n: int) -> np.ndarray:
        return self.z[:, n] / self.mean**n


def sample_generation_sizes(q, height: int, n_samples: int, rng_seed: int,
                            max_nodes: int = 10**8) -> GenerationSample:
    """``(Z_0, ..., Z_height)`` for ``n_samples`` independent trees."""
    family = as_family(q)
    rng = rng_for(rng_seed)
    z = np.zeros((n_samples, height + 1), dtype=np.int64)
    z[:, 0] = 1
    owners = np.arange(n_samples)
    total = n_samples
    for g in range(height):
        k = family.draw(rng, len(owners))
        z[:, g + 1] = np.bincount(owners, weights=k, minlength=n_samples).astype(np.int64)
        total += int(k.sum())
        if total > max_nodes:
            raise ResourceCapError(f"batch exceeds max_nodes={max_nodes}", bound="max_nodes",
                                   stats={"generation": g + 1, "mean_z": z[:, : g + 2].mean(axis=0).tolist()})
        owners = np.repeat(owners, k)
    return GenerationSample(z, float(family.mean), rng_seed)
