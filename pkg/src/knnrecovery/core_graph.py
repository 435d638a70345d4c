"""Permutations, 2k-NN graphs and difference graphs.

Vertices are 0-based. An undirected edge ``(i, j)`` with ``i < j`` is stored by
its flat index ``j*(j-1)//2 + i``, so an edge set over ``n`` vertices is a
subset of ``range(n*(n-1)//2)``. Edge sets are kept as sorted, read-only
``int64`` arrays; :meth:`KnnGraph.mask` gives the dense boolean bitset when
vectorised membership is needed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "Permutation",
    "EdgeId",
    "KnnGraph",
    "DifferenceGraph",
    "num_pairs",
    "edge_index",
    "edge_pair",
    "edge_indices",
    "edge_pairs",
    "knn_edge_array",
    "knn_from_permutation",
    "cycle_distance",
    "edge_distance",
    "is_nearby",
    "difference_graph",
    "hamming_distance",
    "adjacent_swap_graph",
    "neighbor_intersection_size",
    "neighbor_intersection_formula",
    "canonical_key",
]


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def edge_index(i: int, j: int) -> int:
    """Flat index of the unordered pair ``{i, j}``."""
    if i == j:
        raise ValueError("self-loops have no edge index")
    if i > j:
        i, j = j, i
    return j * (j - 1) // 2 + i


def edge_pair(index: int) -> tuple[int, int]:
    """Inverse of :func:`edge_index`."""
    j = int((1 + np.sqrt(1 + 8 * index)) // 2)
    # guard against float rounding at large indices
    while j * (j - 1) // 2 > index:
        j -= 1
    while (j + 1) * j // 2 <= index:
        j += 1
    return index - j * (j - 1) // 2, j


def edge_indices(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    return hi * (hi - 1) // 2 + lo


def edge_pairs(index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    index = np.asarray(index, dtype=np.int64)
    j = ((1 + np.sqrt(1 + 8 * index.astype(np.float64))) // 2).astype(np.int64)
    j -= (j * (j - 1) // 2 > index)
    j += ((j + 1) * j // 2 <= index)
    return index - j * (j - 1) // 2, j


class EdgeId(NamedTuple):
    i: int
    j: int

    @classmethod
    def of(cls, a: int, b: int) -> EdgeId:
        if a == b:
            raise ValueError("an edge needs two distinct endpoints")
        return cls(min(a, b), max(a, b))

    @classmethod
    def from_index(cls, index: int) -> EdgeId:
        return cls(*edge_pair(index))

    @property
    def index(self) -> int:
        return edge_index(self.i, self.j)


@dataclass(frozen=True)
class Permutation:
    """A cyclic vertex order: ``order[p]`` is the vertex at cycle position ``p``."""

    order: tuple[int, ...]

    def __post_init__(self) -> None:
        order = tuple(int(v) for v in self.order)
        if sorted(order) != list(range(len(order))):
            raise ValueError("order must be a bijection of 0..n-1")
        object.__setattr__(self, "order", order)

    @classmethod
    def identity(cls, n: int) -> Permutation:
        return cls(tuple(range(n)))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> Permutation:
        return cls(tuple(rng.permutation(n).tolist()))

    @property
    def n(self) -> int:
        return len(self.order)

    @cached_property
    def positions(self) -> tuple[int, ...]:
        """Inverse permutation: ``positions[v]`` is the cycle position of ``v``."""
        inv = [0] * self.n
        for p, v in enumerate(self.order):
            inv[v] = p
        return tuple(inv)

    def __len__(self) -> int:
        return len(self.order)

    def __getitem__(self, p: int) -> int:
        return self.order[p]

    def reversed(self) -> Permutation:
        return Permutation(self.order[::-1])

    def shifted(self, s: int) -> Permutation:
        s %= self.n
        return Permutation(self.order[s:] + self.order[:s])

    def swapped(self, p: int) -> Permutation:
        """Transpose cycle positions ``p`` and ``p + 1`` (cyclically)."""
        p %= self.n
        q = (p + 1) % self.n
        order = list(self.order)
        order[p], order[q] = order[q], order[p]
        return Permutation(tuple(order))


def _check_nk(n: int, k: int) -> None:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < 2 * k + 2:
        raise ValueError(f"need n >= 2k+2, got n={n}, k={k}")


def _as_edge_array(edges) -> np.ndarray:
    if isinstance(edges, KnnGraph):
        return edges.edges
    arr = np.unique(np.asarray(edges, dtype=np.int64).ravel())
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.int64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class KnnGraph:
    """A 2k-NN graph: ``n`` vertices, each joined to its ``k`` nearest
    neighbours on either side of a Hamiltonian cycle.

    ``edges`` holds the sorted flat edge indices (exactly ``k*n`` of them).
    ``generator`` is the permutation the graph was built from, when known.
    """

    n: int
    k: int
    edges: np.ndarray
    generator: Permutation | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        _check_nk(self.n, self.k)
        edges = _frozen(np.unique(np.asarray(self.edges, dtype=np.int64)))
        if edges.size != self.k * self.n:
            raise ValueError(f"expected {self.k * self.n} edges, got {edges.size}")
        if edges.size and (edges[0] < 0 or edges[-1] >= num_pairs(self.n)):
            raise ValueError("edge index out of range")
        deg = np.bincount(np.concatenate(edge_pairs(edges)), minlength=self.n)
        if np.any(deg != 2 * self.k):
            raise ValueError("graph is not 2k-regular")
        object.__setattr__(self, "edges", edges)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnnGraph):
            return NotImplemented
        return (self.n, self.k) == (other.n, other.k) and np.array_equal(self.edges, other.edges)

    def __hash__(self) -> int:
        return hash((self.n, self.k, self.edges.tobytes()))

    def __contains__(self, e) -> bool:
        idx = e.index if isinstance(e, EdgeId) else int(e)
        pos = np.searchsorted(self.edges, idx)
        return bool(pos < self.edges.size and self.edges[pos] == idx)

    @property
    def num_edges(self) -> int:
        return int(self.edges.size)

    def mask(self) -> np.ndarray:
        m = np.zeros(num_pairs(self.n), dtype=bool)
        m[self.edges] = True
        return m

    @cached_property
    def neighbors(self) -> tuple[frozenset[int], ...]:
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for a, b in zip(*edge_pairs(self.edges)):
            nbrs[int(a)].add(int(b))
            nbrs[int(b)].add(int(a))
        return tuple(frozenset(s) for s in nbrs)

    def edge_list(self) -> list[EdgeId]:
        return [EdgeId(int(a), int(b)) for a, b in zip(*edge_pairs(self.edges))]


def knn_edge_array(orders: np.ndarray, k: int) -> np.ndarray:
    """Row-wise sorted edge indices of the 2k-NN graphs of many orders at once.

    ``orders`` has shape ``(m, n)``; the result has shape ``(m, k*n)``.
    """
    orders = np.atleast_2d(np.asarray(orders, dtype=np.int64))
    n = orders.shape[1]
    cols = []
    for d in range(1, k + 1):
        cols.append(edge_indices(orders, np.roll(orders, -d, axis=1)))
    out = np.concatenate(cols, axis=1)
    out.sort(axis=1)
    return out


def knn_from_permutation(sigma: Permutation | Sequence[int], k: int) -> KnnGraph:
    """Join every pair of vertices at cycle distance at most ``k`` under ``sigma``."""
    if not isinstance(sigma, Permutation):
        sigma = Permutation(tuple(sigma))
    _check_nk(sigma.n, k)
    edges = knn_edge_array(np.asarray(sigma.order)[None, :], k)[0]
    return KnnGraph(sigma.n, k, edges, sigma)


def _require_generator(x: KnnGraph) -> Permutation:
    if x.generator is None:
        raise ValueError("graph carries no generator permutation")
    return x.generator


def cycle_distance(x: KnnGraph, i: int, j: int) -> int:
    """Distance between vertices ``i`` and ``j`` along the generating cycle of ``x``."""
    pos = _require_generator(x).positions
    d = abs(pos[i] - pos[j])
    return min(d, x.n - d)


def _edge_tuple(e) -> tuple[int, int]:
    if isinstance(e, (int, np.integer)):
        return edge_pair(int(e))
    a, b = e
    return int(a), int(b)


def edge_distance(x_star: KnnGraph, e, f) -> int:
    """Smallest cycle distance between an endpoint of ``e`` and one of ``f``.

    Both edges must belong to ``x_star``. Edges are given as pairs, ``EdgeId``
    or flat indices.
    """
    e = _edge_tuple(e)
    f = _edge_tuple(f)
    for edge in (e, f):
        if edge_index(*edge) not in x_star:
            raise ValueError(f"{edge} is not an edge of x_star")
    return min(cycle_distance(x_star, a, b) if a != b else 0 for a in e for b in f)


def is_nearby(x_star: KnnGraph, e, f) -> bool:
    return edge_distance(x_star, e, f) <= 2 * x_star.k


@dataclass(frozen=True, eq=False)
class DifferenceGraph:
    """Bi-coloured graph of ``x - x*``.

    Red edges are edges of ``x*`` missing from ``x``; blue edges are edges of
    ``x`` absent from ``x*``.
    """

    n: int
    red: np.ndarray
    blue: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "red", _frozen(self.red))
        object.__setattr__(self, "blue", _frozen(self.blue))

    @property
    def delta(self) -> int:
        return int(self.red.size)

    def red_degree(self) -> np.ndarray:
        return np.bincount(np.concatenate(edge_pairs(self.red)), minlength=self.n)

    def blue_degree(self) -> np.ndarray:
        return np.bincount(np.concatenate(edge_pairs(self.blue)), minlength=self.n)

    def is_balanced(self) -> bool:
        return (
            self.red.size == self.blue.size
            and np.intersect1d(self.red, self.blue).size == 0
            and np.array_equal(self.red_degree(), self.blue_degree())
        )

    def red_edges(self) -> list[EdgeId]:
        return [EdgeId(int(a), int(b)) for a, b in zip(*edge_pairs(self.red))]

    def blue_edges(self) -> list[EdgeId]:
        return [EdgeId(int(a), int(b)) for a, b in zip(*edge_pairs(self.blue))]


def difference_graph(x: KnnGraph, x_star: KnnGraph) -> DifferenceGraph:
    if (x.n, x.k) != (x_star.n, x_star.k):
        raise ValueError(f"mismatched graphs: (n,k)={x.n, x.k} vs {x_star.n, x_star.k}")
    red = np.setdiff1d(x_star.edges, x.edges, assume_unique=True)
    blue = np.setdiff1d(x.edges, x_star.edges, assume_unique=True)
    return DifferenceGraph(x.n, red, blue)


def hamming_distance(a, b) -> int:
    """Size of the symmetric difference of two edge sets."""
    return int(np.setxor1d(_as_edge_array(a), _as_edge_array(b), assume_unique=True).size)


def adjacent_swap_graph(x_star: KnnGraph, i: int) -> KnnGraph:
    """The 2k-NN graph obtained by transposing cycle positions ``i`` and ``i+1``."""
    return knn_from_permutation(_require_generator(x_star).swapped(i), x_star.k)


def neighbor_intersection_formula(d: int, k: int) -> int:
    """Common-neighbour count of two vertices at cycle distance ``d >= 1``.

    Valid when the cycle is long enough (``n > 4k``) that the two
    neighbourhoods cannot also meet around the far side.
    """
    if d <= k:
        return 2 * k - 1 - d
    if d <= 2 * k:
        return 2 * k + 1 - d
    return 0


def neighbor_intersection_size(x: KnnGraph, j: int, j2: int) -> int:
    """``|N_x(j) & N_x(j2)|``, cross-checked against the closed form when ``n > 4k``."""
    if j == j2:
        raise ValueError("j and j2 must differ")
    size = len(x.neighbors[j] & x.neighbors[j2])
    if x.n > 4 * x.k:
        expected = neighbor_intersection_formula(cycle_distance(x, j, j2), x.k)
        assert size == expected, (j, j2, size, expected)
    return size


def canonical_key(x: KnnGraph) -> tuple[int, ...]:
    """Hashable, totally ordered key; equal iff the edge sets are equal."""
    return tuple(x.edges.tolist())
