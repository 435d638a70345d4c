"""Exhaustive enumeration of 2k-NN graphs and checks of the counting lemmas.

Every 2k-NN graph comes from some Hamiltonian cycle, and cycles that differ by
a rotation or reflection give the same graph. Fixing ``sigma[0] = 0`` and
``sigma[1] < sigma[n-1]`` leaves ``(n-1)!/2`` representatives; for small
``n`` several of these still collide, so graphs are deduplicated by their
sorted edge-index rows.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core_graph import (
    KnnGraph,
    Permutation,
    canonical_key,
    edge_pairs,
    knn_edge_array,
    knn_from_permutation,
    num_pairs,
)

__all__ = [
    "ENUMERATION_BUDGET",
    "GraphFamily",
    "StratificationReport",
    "LemmaReport",
    "RedSetCount",
    "canonical_orders",
    "enumerate_family",
    "enumerate_knn_graphs",
    "stratify",
    "verify_simple_bound",
    "verify_nearby_lemma",
    "verify_balance",
    "count_red_sets",
    "verify_red_set_bounds",
    "run_lemmas",
]

ENUMERATION_BUDGET = 10**7
_BATCH = 200_000


def _budget(n: int) -> int:
    return math.factorial(n - 1) // 2


def canonical_orders(n: int):
    """Yield cycle orders with ``order[0] == 0`` and ``order[1] < order[-1]``."""
    for rest in itertools.permutations(range(1, n)):
        if rest[0] < rest[-1]:
            yield (0,) + rest


@dataclass(frozen=True, eq=False)
class GraphFamily:
    """All distinct 2k-NN graphs on ``n`` vertices.

    ``edges`` has one sorted row of flat edge indices per graph, rows in
    lexicographic order; ``orders[g]`` is the first canonical order that
    produced graph ``g``.
    """

    n: int
    k: int
    edges: np.ndarray
    orders: np.ndarray
    num_orders: int

    def __len__(self) -> int:
        return int(self.edges.shape[0])

    def graph(self, g: int) -> KnnGraph:
        return knn_from_permutation(Permutation(tuple(self.orders[g].tolist())), self.k)

    def index_of(self, x: KnnGraph) -> int:
        hits = np.flatnonzero((self.edges == x.edges).all(axis=1))
        if hits.size != 1:
            raise KeyError("graph is not a member of this family")
        return int(hits[0])


@lru_cache(maxsize=16)
def enumerate_family(n: int, k: int) -> GraphFamily:
    if n < 2 * k + 2:
        raise ValueError(f"need n >= 2k+2, got n={n}, k={k}")
    if _budget(n) > ENUMERATION_BUDGET:
        raise ValueError(f"(n-1)!/2 = {_budget(n)} exceeds the enumeration budget")
    edge_dtype = np.int16 if num_pairs(n) < 2**15 else np.int64
    rows: list[np.ndarray] = []
    firsts: list[np.ndarray] = []
    gen = canonical_orders(n)
    while True:
        batch = np.array(list(itertools.islice(gen, _BATCH)), dtype=np.int64)
        if batch.size == 0:
            break
        edges = knn_edge_array(batch, k).astype(edge_dtype)
        uniq, first = np.unique(edges, axis=0, return_index=True)
        rows.append(uniq)
        firsts.append(batch[first])
    all_rows = np.concatenate(rows)
    all_orders = np.concatenate(firsts)
    # stable: earlier batches come first, so the first producing order survives
    uniq, first = np.unique(all_rows, axis=0, return_index=True)
    orders = all_orders[first].astype(np.int16)
    uniq = uniq.astype(np.int64)
    uniq.setflags(write=False)
    orders.setflags(write=False)
    return GraphFamily(n, k, uniq, orders, _budget(n))


def enumerate_knn_graphs(n: int, k: int) -> list[KnnGraph]:
    """Every distinct 2k-NN graph on ``n`` vertices, sorted by canonical key."""
    fam = enumerate_family(n, k)
    return [fam.graph(g) for g in range(len(fam))]


def _family(all_graphs, n: int, k: int) -> GraphFamily:
    if isinstance(all_graphs, GraphFamily):
        return all_graphs
    if all_graphs is None:
        return enumerate_family(n, k)
    graphs = list(all_graphs)
    edges = np.array([g.edges for g in graphs], dtype=np.int64)
    orders = np.array([g.generator.order for g in graphs], dtype=np.int64)
    return GraphFamily(n, k, edges, orders, len(graphs))


def _deltas(x_star: KnnGraph, fam: GraphFamily) -> np.ndarray:
    on = x_star.mask()
    return x_star.k * x_star.n - on[fam.edges].sum(axis=1)


@dataclass
class StratificationReport:
    n: int
    k: int
    x_star_key: tuple[int, ...]
    counts: dict[int, int]
    total: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "x_star_key": list(self.x_star_key),
            "counts": {str(d): c for d, c in sorted(self.counts.items())},
            "total": self.total,
        }


@dataclass
class LemmaReport:
    lemma: str
    n: int
    k: int
    checked: int = 0
    violations: list = field(default_factory=list)
    witness: dict | None = None

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "lemma": self.lemma,
            "n": self.n,
            "k": self.k,
            "checked": self.checked,
            "passed": self.passed,
            "violations": self.violations[:20],
            "num_violations": len(self.violations),
            "witness": self.witness,
        }


def stratify(x_star: KnnGraph, all_graphs=None) -> StratificationReport:
    """Histogram of ``Delta(x) = |red(G(x))|`` over all 2k-NN graphs ``x``."""
    fam = _family(all_graphs, x_star.n, x_star.k)
    deltas = _deltas(x_star, fam)
    if not np.any(deltas == 0):
        raise ValueError("x_star is not among the enumerated graphs")
    values, counts = np.unique(deltas, return_counts=True)
    return StratificationReport(
        x_star.n,
        x_star.k,
        canonical_key(x_star),
        {int(d): int(c) for d, c in zip(values, counts)},
        len(fam),
    )


def verify_simple_bound(report: StratificationReport) -> LemmaReport:
    """Check ``|X_Delta| <= (4kn)^Delta`` for every stratum."""
    out = LemmaReport("simple_bound", report.n, report.k)
    base = 4 * report.k * report.n
    best = None
    for delta, count in sorted(report.counts.items()):
        out.checked += 1
        bound = base**delta
        if count > bound:
            out.violations.append({"delta": delta, "count": count, "bound": bound})
        if delta >= 1:
            ratio = count / bound
            if best is None or ratio > best["ratio"]:
                best = {"delta": delta, "count": count, "bound": bound, "ratio": ratio}
    out.witness = best
    return out


def _distance_matrix(x_star: KnnGraph) -> np.ndarray:
    pos = np.asarray(x_star.generator.positions)
    d = np.abs(pos[:, None] - pos[None, :])
    return np.minimum(d, x_star.n - d)


def _red_blue(x_star: KnnGraph, row: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    red = np.setdiff1d(x_star.edges, row, assume_unique=True)
    blue = np.setdiff1d(row, x_star.edges, assume_unique=True)
    return red, blue


def verify_nearby_lemma(x_star: KnnGraph, all_graphs=None) -> LemmaReport:
    """Every red edge of every difference graph has a distinct nearby red edge.

    The property needs ``k >= 2``; at ``k = 1`` the report simply lists the
    isolated red edges it finds.
    """
    fam = _family(all_graphs, x_star.n, x_star.k)
    out = LemmaReport("nearby_red_edge", x_star.n, x_star.k)
    dist = _distance_matrix(x_star)
    limit = 2 * x_star.k
    closest = None
    for g in range(len(fam)):
        red, _ = _red_blue(x_star, fam.edges[g])
        if red.size == 0:
            continue
        a, b = edge_pairs(red)
        ends = np.stack([a, b], axis=1)
        # pairwise edge distance: min over the four endpoint pairs
        d = dist[ends[:, None, :, None], ends[None, :, None, :]].min(axis=(2, 3))
        np.fill_diagonal(d, np.iinfo(d.dtype).max)
        nearest = d.min(axis=1)
        out.checked += int(red.size)
        for e in np.flatnonzero(nearest > limit):
            out.violations.append(
                {"graph": g, "red_edge": [int(a[e]), int(b[e])], "nearest": int(nearest[e])}
            )
        worst = int(nearest.max())
        if closest is None or worst > closest["max_nearest_distance"]:
            closest = {"graph": g, "max_nearest_distance": worst, "limit": limit}
    out.witness = closest
    return out


def verify_balance(x_star: KnnGraph, all_graphs=None) -> LemmaReport:
    """Red degree equals blue degree at every vertex of every difference graph."""
    fam = _family(all_graphs, x_star.n, x_star.k)
    out = LemmaReport("balance", x_star.n, x_star.k)
    n = x_star.n
    max_deg = 0
    for g in range(len(fam)):
        red, blue = _red_blue(x_star, fam.edges[g])
        out.checked += 1
        rdeg = np.bincount(np.concatenate(edge_pairs(red)), minlength=n)
        bdeg = np.bincount(np.concatenate(edge_pairs(blue)), minlength=n)
        if red.size != blue.size or not np.array_equal(rdeg, bdeg):
            out.violations.append({"graph": g, "red": int(red.size), "blue": int(blue.size)})
        max_deg = max(max_deg, int(rdeg.max(initial=0)))
    out.witness = {"max_red_degree": max_deg}
    return out


@dataclass
class RedSetCount:
    delta: int
    observed: int
    bound: int
    max_multiplicity: int
    multiplicity_bound: float

    @property
    def passed(self) -> bool:
        return self.observed <= self.bound and self.max_multiplicity <= self.multiplicity_bound


def red_set_bound(n: int, k: int, delta: int) -> int:
    return (96 * k * k) ** delta * math.comb(k * n, delta // 2)


def multiplicity_bound(k: int, delta: int) -> float:
    return 2.0 * float(32 * k**3) ** (2 * delta) * float(delta) ** (delta / k)


def count_red_sets(x_star: KnnGraph, all_graphs, delta: int) -> RedSetCount:
    """Distinct red-edge sets among ``X_delta`` and the largest group sharing one."""
    fam = _family(all_graphs, x_star.n, x_star.k)
    members = np.flatnonzero(_deltas(x_star, fam) == delta)
    groups: dict[bytes, int] = {}
    for g in members:
        red, _ = _red_blue(x_star, fam.edges[g])
        key = red.tobytes()
        groups[key] = groups.get(key, 0) + 1
    return RedSetCount(
        delta,
        len(groups),
        red_set_bound(x_star.n, x_star.k, delta),
        max(groups.values(), default=0),
        multiplicity_bound(x_star.k, delta),
    )


def verify_red_set_bounds(x_star: KnnGraph, all_graphs=None, max_delta: int | None = None) -> LemmaReport:
    fam = _family(all_graphs, x_star.n, x_star.k)
    out = LemmaReport("red_set_bounds", x_star.n, x_star.k)
    deltas = np.unique(_deltas(x_star, fam))
    rows = []
    for delta in deltas:
        delta = int(delta)
        if max_delta is not None and delta > max_delta:
            continue
        c = count_red_sets(x_star, fam, delta)
        out.checked += 1
        rows.append(
            {
                "delta": delta,
                "observed": c.observed,
                "max_multiplicity": c.max_multiplicity,
                "bound_ratio": c.observed / c.bound,
            }
        )
        if not c.passed:
            out.violations.append(
                {
                    "delta": delta,
                    "observed": c.observed,
                    "bound": c.bound,
                    "max_multiplicity": c.max_multiplicity,
                    "multiplicity_bound": c.multiplicity_bound,
                }
            )
    out.witness = max(rows, key=lambda r: r["bound_ratio"], default=None)
    return out


LEMMAS = ("balance", "nearby", "bounds")


def run_lemmas(x_star: KnnGraph, which: str = "all") -> dict:
    """Stratify and run the selected checks; returns a JSON-ready report."""
    if which != "all" and which not in LEMMAS:
        raise ValueError(f"unknown lemma selection {which!r}")
    fam = enumerate_family(x_star.n, x_star.k)
    strat = stratify(x_star, fam)
    reports: list[LemmaReport] = []
    if which in ("all", "balance"):
        reports.append(verify_balance(x_star, fam))
    if which in ("all", "nearby") and x_star.k >= 2:
        reports.append(verify_nearby_lemma(x_star, fam))
    if which in ("all", "bounds"):
        reports.append(verify_simple_bound(strat))
        reports.append(verify_red_set_bounds(x_star, fam))
    return {
        "n": x_star.n,
        "k": x_star.k,
        "num_graphs": len(fam),
        "num_canonical_orders": fam.num_orders,
        "stratification": strat.to_dict(),
        "reports": [r.to_dict() for r in reports],
        "passed": all(r.passed for r in reports),
    }
