"""Finite rooted ordered trees with Ulam-Harris labels.

A tree is stored as its *shape*: a nested tuple in which every node is the
tuple of its children, so the root-only tree is ``()`` and a root with two
leaves is ``((), ())``.  Shapes are canonical and hashable; the Ulam-Harris
label set (integer sequences, root = ``()``) is derived on demand.

Trees "rooted at height k" carry ``root_height = k``; all heights passed to
the functions here are absolute, i.e. a node with label ``u`` sits at
height ``root_height + len(u)``.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

from .errors import DomainError, ResourceCapError

DEFAULT_MAX_DEPTH = 4
DEFAULT_MAX_CHILDREN = 4
DEFAULT_MAX_TREES = 10**6


@dataclass(frozen=True)
class UlamTree:
    shape: tuple = ()
    root_height: int = 0

    def __post_init__(self):
        if self.root_height < 0:
            raise DomainError("root_height must be nonnegative")

    @classmethod
    def from_labels(cls, labels, root_height: int = 0) -> "UlamTree":
        """Build a tree from a set of relative label sequences.

        Raises :class:`DomainError` unless the set is prefix-closed, contains
        the root ``()`` and numbers the children of every node ``1..k``.
        """
        labels = {tuple(u) for u in labels}
        if () not in labels:
            raise DomainError("label set must contain the root ()")
        for u in labels:
            if u and (u[:-1] not in labels or u[-1] < 1):
                raise DomainError(f"label {u} has no parent in the set")
            if u and u[-1] > 1 and u[:-1] + (u[-1] - 1,) not in labels:
                raise DomainError(f"children of {u[:-1]} are not numbered without gaps")

        def build(u):
            k = 0
            while u + (k + 1,) in labels:
                k += 1
            return tuple(build(u + (i,)) for i in range(1, k + 1))

        return cls(build(()), root_height)

    @cached_property
    def nodes(self) -> frozenset:
        out = []
        stack = [((), self.shape)]
        while stack:
            label, node = stack.pop()
            out.append(label)
            for i, child in enumerate(node, start=1):
                stack.append((label + (i,), child))
        return frozenset(out)

    @cached_property
    def depth(self) -> int:
        """Height relative to the root."""
        return _depth(self.shape)

    @property
    def height(self) -> int:
        return self.root_height + self.depth

    def children_count(self, label) -> int:
        node = self.shape
        for i in label:
            node = node[i - 1]
        return len(node)

    def generation_sizes(self) -> list:
        """``[z_{root_height}, z_{root_height+1}, ...]`` up to the tree height."""
        sizes = []
        level = [self.shape]
        while level:
            sizes.append(len(level))
            level = [c for node in level for c in node]
        return sizes

    def __len__(self):
        return len(self.nodes)

    def __str__(self):
        return format_tree(self)


def _depth(shape) -> int:
    if not shape:
        return 0
    return 1 + max(_depth(c) for c in shape)


def _restrict_shape(shape, levels):
    if levels == 0:
        return ()
    return tuple(_restrict_shape(c, levels - 1) for c in shape)


def restrict(t: UlamTree, n: int) -> UlamTree:
    """Keep the nodes of ``t`` at (absolute) height at most ``n``."""
    if n < t.root_height:
        raise DomainError(f"cannot restrict a tree rooted at height {t.root_height} to height {n}")
    return UlamTree(_restrict_shape(t.shape, n - t.root_height), t.root_height)


def generation_size(t: UlamTree, n: int) -> int:
    """Number of nodes at absolute height ``n`` (0 outside the tree)."""
    rel = n - t.root_height
    if rel < 0:
        return 0
    level = [t.shape]
    for _ in range(rel):
        level = [c for node in level for c in node]
        if not level:
            return 0
    return len(level)


def count_trees(depth: int, max_children: int) -> int:
    """Number of shapes of depth at most ``depth`` with at most ``max_children`` children per node."""
    n = 1
    for _ in range(depth):
        n = sum(n**k for k in range(max_children + 1))
    return n


def enumerate_trees(
    height: int,
    max_children: int,
    root_height: int = 0,
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
    max_children_cap: int = DEFAULT_MAX_CHILDREN,
    max_trees: int = DEFAULT_MAX_TREES,
) -> Iterator[UlamTree]:
    """Yield every tree rooted at ``root_height`` with height at most ``height``.

    Each node has at most ``max_children`` children.  Trees come out in
    lexicographic order of their preorder child-count sequences.  The caps
    are hard limits: exceeding one raises :class:`ResourceCapError`.
    """
    depth = height - root_height
    if depth < 0:
        raise DomainError("height must be at least root_height")
    if depth > max_depth:
        raise ResourceCapError(f"depth {depth} exceeds max_depth={max_depth}", bound="max_depth")
    if max_children > max_children_cap:
        raise ResourceCapError(
            f"max_children={max_children} exceeds max_children_cap={max_children_cap}",
            bound="max_children_cap",
        )
    total = count_trees(depth, max_children)
    if total > max_trees:
        raise ResourceCapError(
            f"{total} trees would be enumerated, above max_trees={max_trees}", bound="max_trees"
        )
    for shape in _shapes(depth, max_children):
        yield UlamTree(shape, root_height)


def _shapes(depth, max_children):
    if depth == 0:
        yield ()
        return
    subs = list(_shapes(depth - 1, max_children))
    for k in range(max_children + 1):
        for children in itertools.product(subs, repeat=k):
            yield children


def preorder_counts(t: UlamTree) -> tuple:
    out = []
    stack = [t.shape]
    while stack:
        node = stack.pop()
        out.append(len(node))
        stack.extend(reversed(node))
    return tuple(out)


def gw_probability(q, t: UlamTree, height: int):
    """Probability under the GW law ``q`` that the tree truncated at ``height`` equals ``t``.

    This is the product of ``q[k_u]`` over nodes at height below ``height``;
    a child count outside the support contributes a zero factor.
    """
    if height < t.root_height:
        raise DomainError("height must be at least the root height")
    probs = q.probs
    one = q.one
    result = one
    level = [t.shape]
    for _ in range(height - t.root_height):
        nxt = []
        for node in level:
            k = len(node)
            if k >= len(probs):
                return q.zero
            result = result * probs[k]
            nxt.extend(node)
        level = nxt
        if not level:
            break
    return result


# ---------------------------------------------------------------- typed trees


@dataclass(frozen=True)
class TypedTree:
    """A tree whose nodes carry integer types with conserved type mass.

    ``typed_shape`` nests ``(type, children)`` pairs.  Every internal node's
    children must have types summing to the node's own type.
    """

    typed_shape: tuple
    root_height: int = 0

    def __post_init__(self):
        _check_types(self.typed_shape)

    @property
    def root_type(self) -> int:
        return self.typed_shape[0]

    @cached_property
    def tree(self) -> UlamTree:
        return UlamTree(_strip_types(self.typed_shape), self.root_height)

    @cached_property
    def type_of(self) -> dict:
        out = {}
        stack = [((), self.typed_shape)]
        while stack:
            label, (ty, kids) = stack.pop()
            out[label] = ty
            for i, child in enumerate(kids, start=1):
                stack.append((label + (i,), child))
        return out

    def type_mass_by_generation(self) -> list:
        masses = []
        level = [self.typed_shape]
        while level:
            masses.append(sum(ty for ty, _ in level))
            level = [c for _, kids in level for c in kids]
        return masses

    def __str__(self):
        return format_typed_tree(self)


def _check_types(node):
    ty, kids = node
    if not isinstance(ty, int) or ty < 0:
        raise DomainError(f"node type must be a nonnegative integer, got {ty!r}")
    if kids:
        if sum(c[0] for c in kids) != ty:
            raise DomainError(
                f"children types {[c[0] for c in kids]} do not sum to parent type {ty}"
            )
        for c in kids:
            _check_types(c)


def _strip_types(node):
    return tuple(_strip_types(c) for c in node[1])


# ---------------------------------------------------------------- text format

_TOKEN = re.compile(r"\s*(?:(\()|(\))|(\d+)\s*:)")


def format_tree(t) -> str:
    shape = t.shape if isinstance(t, UlamTree) else t

    def fmt(node):
        return "(" + " ".join(fmt(c) for c in node) + ")"

    return fmt(shape)


def format_typed_tree(t) -> str:
    node = t.typed_shape if isinstance(t, TypedTree) else t

    def fmt(n):
        ty, kids = n
        return f"{ty}:(" + " ".join(fmt(c) for c in kids) + ")"

    return fmt(node)


def _tokens(text):
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise DomainError(f"unexpected character at offset {pos}: {text[pos:pos + 10]!r}")
        if m.group(1):
            yield "("
        elif m.group(2):
            yield ")"
        else:
            yield int(m.group(3))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1


def _parse(tokens, typed):
    toks = list(tokens)
    pos = 0

    def node():
        nonlocal pos
        ty = None
        if typed:
            if pos >= len(toks) or not isinstance(toks[pos], int):
                raise DomainError("typed tree node must start with 'type:'")
            ty = toks[pos]
            pos += 1
        if pos >= len(toks) or toks[pos] != "(":
            raise DomainError("expected '('")
        pos += 1
        kids = []
        while pos < len(toks) and toks[pos] != ")":
            kids.append(node())
        if pos >= len(toks):
            raise DomainError("unbalanced parentheses")
        pos += 1
        return (ty, tuple(kids)) if typed else tuple(kids)

    result = node()
    if pos != len(toks):
        raise DomainError("trailing input after tree")
    return result


def parse_tree(text: str, root_height: int = 0) -> UlamTree:
    """Parse the ``(c1 c2 ...)`` text format (whitespace-insensitive)."""
    return UlamTree(_parse(_tokens(text), typed=False), root_height)


def parse_typed_tree(text: str, root_height: int = 0) -> TypedTree:
    """Parse the ``l:(...)`` typed format; type-sum violations are rejected."""
    return TypedTree(_parse(_tokens(text), typed=True), root_height)
