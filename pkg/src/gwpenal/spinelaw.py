"""The inhomogeneous multi-type tree law with ``p`` units of conserved type mass.

A node of type ``l`` at height ``n`` has ``k`` children of types
``(l_1, ..., l_k)`` (summing to ``l``) with probability

    q_k / (mu**l * c_l(n)) * prod_j c_{l_j}(n + 1),

where ``c_j(n) = phi^{(j)}(a / mu**n) / j!`` are Taylor coefficients of the
Laplace transform of ``W``.  Summing over the placements of the nonzero
types recovers the per-composition formula with its binomial factor.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ResourceCapError
from .limits import laplace_transform
from .martingales import MartingaleSpec
from .numbers import is_exact
from .offspring import OffspringDistribution, conjugate
from .trees import TypedTree, UlamTree, enumerate_trees, format_tree, generation_size, gw_probability

DEFAULT_MAX_NODES = 10**7


@dataclass(frozen=True)
class OffspringEvent:
    k: int
    types: tuple

    def __post_init__(self):
        if len(self.types) != self.k or any(t < 0 for t in self.types):
            raise DomainError(f"event needs {self.k} nonnegative types, got {self.types}")

    @property
    def mass(self) -> int:
        return sum(self.types)

    @property
    def nonzero(self) -> int:
        return sum(1 for t in self.types if t)


def weak_compositions(total: int, parts: int):
    """All ``parts``-tuples of nonnegative integers summing to ``total``."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in weak_compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass
class SpineLaw:
    q: OffspringDistribution
    p: int
    a: object = 0
    n0: int = 0
    _tables: dict = field(default_factory=dict, init=False, repr=False)
    _coeffs: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.q.mean <= 1:
            raise DomainError("the spine law needs a super-critical law (conjugate a sub-critical one first)")
        if self.p < 0 or self.n0 < 0 or self.a < 0:
            raise DomainError("p, a and n0 must be nonnegative")
        self.L = laplace_transform(self.q, max(self.p, 1))

    @property
    def exact(self) -> bool:
        return self.q.exact and self.a == 0 and is_exact(self.a)

    def coeffs(self, n: int) -> tuple:
        """``phi^{(j)}(a / mu**n) / j!`` for ``j = 0..p``."""
        if n not in self._coeffs:
            if self.exact:
                x = self.a
            else:
                x = float(self.a) / float(self.q.mean) ** n
            self._coeffs[n] = self.L.jet(x, self.p).coeffs
        return self._coeffs[n]

    def offspring_probability(self, parent_type: int, height: int, event: OffspringEvent):
        if parent_type < 0 or parent_type > self.p:
            raise DomainError(f"type {parent_type} outside 0..{self.p}")
        if event.mass != parent_type:
            raise DomainError(f"child types {event.types} do not sum to {parent_type}")
        if height < self.n0:
            raise DomainError("height below the root height")
        q = self.q
        if event.k >= len(q.probs) or not q.probs[event.k]:
            return q.zero
        here, nxt = self.coeffs(height), self.coeffs(height + 1)
        result = q.probs[event.k] / (q.mean**parent_type * here[parent_type])
        for t in event.types:
            result = result * nxt[t]
        return result

    def events(self, parent_type: int, height: int) -> list:
        """``[(OffspringEvent, probability)]`` with nonzero probability, in a fixed order."""
        key = (parent_type, height)
        if key not in self._tables:
            table = []
            for k in range(len(self.q.probs)):
                if not self.q.probs[k]:
                    continue
                for types in weak_compositions(parent_type, k):
                    ev = OffspringEvent(k, types)
                    table.append((ev, self.offspring_probability(parent_type, height, ev)))
            self._tables[key] = table
        return self._tables[key]

    def normalization(self, parent_type: int, height: int):
        return sum(prob for _, prob in self.events(parent_type, height))


def offspring_probability(law: SpineLaw, parent_type: int, height: int, event: OffspringEvent):
    return law.offspring_probability(parent_type, height, event)


# ---------------------------------------------------------------- exact tree probabilities


def exact_Q(law: SpineLaw, t: TypedTree, height: int):
    """Probability that the typed tree truncated at ``height`` equals ``t``."""
    if t.root_height != law.n0:
        raise DomainError(f"tree rooted at {t.root_height}, law starts at {law.n0}")
    if t.root_type != law.p:
        raise DomainError(f"root type {t.root_type} differs from p = {law.p}")
    if height < law.n0:
        raise DomainError("height below the root height")
    result = law.q.one
    level = [t.typed_shape]
    for h in range(law.n0, height):
        nxt = []
        for ty, kids in level:
            if not kids and ty:
                # a typed leaf above the truncation height cannot occur
                return law.q.zero
            ev = OffspringEvent(len(kids), tuple(c[0] for c in kids))
            result = result * law.offspring_probability(ty, h, ev)
            nxt.extend(kids)
        level = nxt
        if not level or not result:
            break
    return result


def shape_Q(law: SpineLaw, t: UlamTree, height: int):
    """Probability of the untyped shape: ``exact_Q`` summed over all typings."""
    if t.root_height != law.n0:
        raise DomainError(f"tree rooted at {t.root_height}, law starts at {law.n0}")
    memo = {}

    def rec(node, ty, h):
        if h >= height:
            return law.q.one
        key = (node, ty, h)
        if key in memo:
            return memo[key]
        k = len(node)
        total = law.q.zero
        for types in weak_compositions(ty, k):
            prob = law.offspring_probability(ty, h, OffspringEvent(k, types))
            if not prob:
                continue
            for child, cty in zip(node, types):
                prob = prob * rec(child, cty, h + 1)
                if not prob:
                    break
            total = total + prob
        memo[key] = total
        return total

    return rec(t.shape, law.p, law.n0)


def typings(law: SpineLaw, t: UlamTree) -> list:
    """Every valid typing of ``t`` with root type ``p`` (leaves may carry any type)."""

    def rec(node, ty):
        if not node:
            return [(ty, ())]
        out = []
        for types in weak_compositions(ty, len(node)):
            for kids in itertools.product(*(rec(c, cty) for c, cty in zip(node, types))):
                out.append((ty, tuple(kids)))
        return out

    return [TypedTree(s, t.root_height) for s in rec(t.shape, law.p)]


@dataclass
class MeasureReport:
    p: int
    a: object
    n0: int
    n: int
    shapes_checked: int
    max_gap: object
    worst_tree: str
    sum_Q: object
    sum_MP: object
    exact: bool
    tol: float

    @property
    def passed(self) -> bool:
        if self.exact:
            return self.max_gap == 0 and self.sum_Q == self.sum_MP
        return self.max_gap <= self.tol and abs(float(self.sum_Q) - float(self.sum_MP)) <= 1e-12

    def to_json(self) -> dict:
        def num(x):
            return str(x) if not isinstance(x, float) else x

        return {
            "p": self.p,
            "a": num(self.a),
            "n0": self.n0,
            "n": self.n,
            "shapes_checked": self.shapes_checked,
            "max_gap": float(self.max_gap),
            "worst_tree": self.worst_tree,
            "sum_Q": num(self.sum_Q),
            "sum_MP": num(self.sum_MP),
            "exact": self.exact,
            "passed": self.passed,
        }


def _compare(lhs_fn, rhs_fn, trees, exact, tol, meta) -> MeasureReport:
    max_gap = 0 if exact else 0.0
    worst = ""
    sum_l = sum_r = 0
    count = 0
    for t in trees:
        lhs, rhs = lhs_fn(t), rhs_fn(t)
        gap = abs(lhs - rhs)
        if gap > max_gap or not worst:
            max_gap = max(max_gap, gap)
            worst = format_tree(t)
        sum_l += lhs
        sum_r += rhs
        count += 1
    return MeasureReport(**meta, shapes_checked=count, max_gap=max_gap, worst_tree=worst,
                         sum_Q=sum_l, sum_MP=sum_r, exact=exact, tol=tol)


def verify_measure_equality(law: SpineLaw, n: int, max_children: int, tol: float = 1e-8) -> MeasureReport:
    """Compare the shape law of the spine tree with ``M_{n,n0}(z_n) P(t)`` on every shape.

    Enumeration is capped at ``n - n0 <= 3``, ``max_children <= 3``, ``p <= 3``.
    """
    if n - law.n0 > 3 or max_children > 3 or law.p > 3:
        raise ResourceCapError("verification grid is capped at n - n0 <= 3, max_children <= 3, p <= 3",
                               bound="verify_grid")
    M = MartingaleSpec("two_index", law.q, p=law.p, a=law.a, n0=law.n0)
    q = law.q
    return _compare(
        lambda t: shape_Q(law, t, n),
        lambda t: M.evaluate(n, generation_size(t, n)) * gw_probability(q, t, n),
        enumerate_trees(n, max_children, law.n0),
        law.exact,
        tol,
        {"p": law.p, "a": law.a, "n0": law.n0, "n": n},
    )


def verify_subcritical_composite(q: OffspringDistribution, p: int, a, n: int, max_children: int,
                                 tol: float = 1e-8) -> MeasureReport:
    """Spine law of the conjugate of a sub-critical ``q`` against the sub-critical martingale.

    Checks ``Q_bar(t) = kappa**(z_n - 1) G_bar_n(z_n) / f'(kappa)**(p n) P(t)``.
    """
    if q.mean >= 1:
        raise DomainError("verify_subcritical_composite needs a sub-critical law")
    law = SpineLaw(conjugate(q), p, a)
    M = MartingaleSpec("subcritical_penalized", q, p=p, a=a)
    return _compare(
        lambda t: shape_Q(law, t, n),
        lambda t: M.evaluate(n, generation_size(t, n)) * gw_probability(q, t, n),
        enumerate_trees(n, max_children),
        law.exact and M.exact,
        tol,
        {"p": p, "a": a, "n0": 0, "n": n},
    )


# ---------------------------------------------------------------- sampling


class _Tables:
    """Inverse-CDF tables per ``(type, height)``, flattened for vectorized lookup."""

    def __init__(self, law: SpineLaw):
        self.law = law
        self._cache = {}

    def get(self, ty: int, h: int):
        key = (ty, h)
        if key not in self._cache:
            events = self.law.events(ty, h)
            probs = np.array([float(pr) for _, pr in events])
            cdf = np.cumsum(probs)
            cdf /= cdf[-1]
            ks = np.array([ev.k for ev, _ in events], dtype=np.int64)
            offsets = np.concatenate(([0], np.cumsum(ks)[:-1])).astype(np.int64)
            flat = np.array([t for ev, _ in events for t in ev.types], dtype=np.int64)
            self._cache[key] = (events, cdf, ks, offsets, flat)
        return self._cache[key]


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def sample_spine_tree(law: SpineLaw, height: int, rng_seed: int, max_nodes: int = 10**5) -> TypedTree:
    """One typed tree truncated at ``height`` (absolute); deterministic per seed."""
    if height < law.n0:
        raise DomainError("height below the root height")
    rng = _rng(rng_seed)
    tables = _Tables(law)
    root = [law.p, []]
    level = [root]
    count = 1
    for h in range(law.n0, height):
        nxt = []
        for node in level:
            events, cdf, *_ = tables.get(node[0], h)
            idx = min(int(np.searchsorted(cdf, rng.random(), side="right")), len(events) - 1)
            ev = events[idx][0]
            for t in ev.types:
                child = [t, []]
                node[1].append(child)
                nxt.append(child)
        count += len(nxt)
        if count > max_nodes:
            raise ResourceCapError(f"sampled tree exceeds max_nodes={max_nodes}", bound="max_nodes",
                                   stats={"nodes": count, "height_reached": h + 1})
        level = nxt

    def freeze(node):
        return (node[0], tuple(freeze(c) for c in node[1]))

    return TypedTree(freeze(root), law.n0)


@dataclass
class SpineStatistics:
    p: int
    a: object
    height: int
    n_samples: int
    seed: int
    z: np.ndarray  # (n_samples, depth + 1) generation sizes
    type_mass: np.ndarray  # (n_samples, depth + 1)
    type_counts: np.ndarray  # (depth + 1, p + 1) total nodes of each type per generation
    shapes: Counter  # depth-2 shapes keyed by (k_root, k_1, ..., k_{k_root})
    root_events: Counter  # (k, types) at the root

    def mass_conserved(self) -> bool:
        return bool(np.all(self.type_mass == self.p))

    def shape_frequency(self, key) -> float:
        return self.shapes.get(key, 0) / self.n_samples


def shape_key(t: UlamTree) -> tuple:
    """Depth-2 signature ``(k_root, k_1, ..., k_{k_root})``."""
    return (len(t.shape),) + tuple(len(c) for c in t.shape)


def spine_statistics(law: SpineLaw, height: int, n_samples: int, rng_seed: int,
                     max_nodes: int = DEFAULT_MAX_NODES) -> SpineStatistics:
    """Sample ``n_samples`` trees generation by generation with numpy.

    Nodes of one generation are kept grouped by sample and in birth order,
    so children stay attached to the right parents.
    """
    depth = height - law.n0
    if depth < 0:
        raise DomainError("height below the root height")
    rng = _rng(rng_seed)
    tables = _Tables(law)
    N = n_samples
    sample = np.arange(N, dtype=np.int64)
    types = np.full(N, law.p, dtype=np.int64)
    z = np.zeros((N, depth + 1), dtype=np.int64)
    mass = np.zeros((N, depth + 1), dtype=np.int64)
    type_counts = np.zeros((depth + 1, law.p + 1), dtype=np.int64)
    shapes = Counter()
    root_events = Counter()
    gen_counts = []
    total_nodes = N
    for g in range(depth + 1):
        z[:, g] = np.bincount(sample, minlength=N)
        mass[:, g] = np.bincount(sample, weights=types, minlength=N).astype(np.int64)
        type_counts[g] = np.bincount(types, minlength=law.p + 1)[: law.p + 1]
        if g == depth:
            break
        h = law.n0 + g
        k = np.zeros(len(types), dtype=np.int64)
        start = np.zeros(len(types), dtype=np.int64)
        flat_parts, base = [], 0
        for ty in range(law.p + 1):
            mask = types == ty
            cnt = int(mask.sum())
            if not cnt:
                continue
            events, cdf, ks, offsets, flat = tables.get(ty, h)
            idx = np.minimum(np.searchsorted(cdf, rng.random(cnt), side="right"), len(events) - 1)
            k[mask] = ks[idx]
            start[mask] = offsets[idx] + base
            flat_parts.append(flat)
            base += len(flat)
            if g == 0:
                for i in np.unique(idx):
                    ev = events[i][0]
                    root_events[(ev.k, ev.types)] += int(np.sum(idx == i))
        flat_all = np.concatenate(flat_parts) if flat_parts else np.zeros(0, dtype=np.int64)
        n_children = int(k.sum())
        total_nodes += n_children
        if total_nodes > max_nodes:
            raise ResourceCapError(f"batch exceeds max_nodes={max_nodes}", bound="max_nodes",
                                   stats={"nodes": total_nodes, "generation": g + 1})
        first = np.repeat(np.cumsum(k) - k, k)
        pos = np.arange(n_children) - first + np.repeat(start, k)
        gen_counts.append((sample.copy(), k))
        sample = np.repeat(sample, k)
        types = flat_all[pos]
    # depth-2 shapes from the child counts of generations 0 and 1
    if depth >= 2:
        k_root = gen_counts[0][1]
        s1, k1 = gen_counts[1]
        bounds = np.searchsorted(s1, np.arange(N + 1))
        k1_list = k1.tolist()
        for i in range(N):
            shapes[(int(k_root[i]),) + tuple(k1_list[bounds[i]:bounds[i + 1]])] += 1
    elif depth == 1:
        for k0, c in zip(*np.unique(gen_counts[0][1], return_counts=True)):
            shapes[(int(k0),) + (0,) * int(k0)] += int(c)
    return SpineStatistics(law.p, law.a, height, N, rng_seed, z, mass, type_counts, shapes, root_events)


@dataclass
class ShapeCheck:
    key: tuple
    tree: str
    expected: float
    observed: float
    sigma: float

    @property
    def z_score(self) -> float:
        return (self.observed - self.expected) / self.sigma if self.sigma else 0.0

    @property
    def passed(self) -> bool:
        return abs(self.observed - self.expected) <= 3 * self.sigma


def compare_shapes(stats: SpineStatistics, law: SpineLaw, min_prob: float = 1e-3) -> list:
    """Depth-2 empirical shape frequencies against ``shape_Q``, within 3 sigma."""
    out = []
    n = law.n0 + 2
    for t in enumerate_trees(n, law.q.K, law.n0):
        expected = float(shape_Q(law, t, n))
        if expected < min_prob:
            continue
        key = shape_key(t)
        sigma = math.sqrt(expected * (1 - expected) / stats.n_samples)
        out.append(ShapeCheck(key, format_tree(t), expected, stats.shape_frequency(key), sigma))
    return out
