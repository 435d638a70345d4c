"""Recovery procedures for the hidden 2k-NN graph.

* :func:`mle_bruteforce` maximises the log-likelihood over every 2k-NN graph.
* :func:`greedy_smallworld` rebuilds the cycle from an unweighted observation.
* :func:`threshold_estimator` keeps edges whose Gaussian weight clears a cut.
* :func:`spectral_ordering` sorts vertices by their angle in the top
  non-trivial eigenspace of the weight matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core_graph import (
    KnnGraph,
    Permutation,
    edge_pairs,
    hamming_distance,
    knn_from_permutation,
)
from .enumeration import enumerate_family
from .sampler import Instance
from .weight_model import BERNOULLI, GAUSSIAN, llr

__all__ = [
    "ESTIMATORS",
    "MLE_MAX_N",
    "RecoveryResult",
    "score",
    "llr_vector",
    "mle_bruteforce",
    "observed_adjacency",
    "greedy_smallworld",
    "greedy_from_instance",
    "default_eps_n",
    "threshold_estimator",
    "circulant_eigenvalues",
    "spectral_ordering",
    "recover",
]

ESTIMATORS = ("mle", "greedy", "threshold", "spectral")
MLE_MAX_N = 11

OK = "ok"
GREEDY_ERROR = "greedy_error"
STEP1_NOT_ISOMORPHIC = "step1_not_isomorphic"
CASE_GE2_AMBIGUOUS = "case_ge2_ambiguous"
CASE_EQ0_AMBIGUOUS = "case_eq0_ambiguous"


@dataclass
class RecoveryResult:
    """Output of one estimator run.

    ``estimate`` is a :class:`KnnGraph` for the structured estimators and a
    sorted array of flat edge indices for thresholding. On a greedy failure it
    is ``None`` and ``error_step``/``error_reason`` say which branch gave up.
    """

    estimator: str
    estimate: KnnGraph | np.ndarray | None
    status: str = OK
    error_step: int | None = None
    error_reason: str | None = None
    objective: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == OK

    def edge_array(self) -> np.ndarray | None:
        if isinstance(self.estimate, KnnGraph):
            return self.estimate.edges
        return self.estimate

    def hamming_to(self, x_star: KnnGraph) -> int:
        """Distance to the truth; a failed run counts as the empty edge set."""
        est = self.edge_array()
        if est is None:
            return x_star.num_edges
        return hamming_distance(est, x_star.edges)


def score(weights: np.ndarray, x: KnnGraph | np.ndarray) -> float:
    """``<weights, x>`` for a single edge set; the hook for other solvers."""
    edges = x.edges if isinstance(x, KnnGraph) else np.asarray(x, dtype=np.int64)
    return float(np.asarray(weights)[edges].sum())


def llr_vector(inst: Instance) -> np.ndarray:
    return np.asarray(llr(inst.model, inst.w.weights), dtype=np.float64)


def mle_bruteforce(inst: Instance, use_llr: bool = True) -> RecoveryResult:
    """Exhaustive maximum-likelihood estimate.

    Scores every distinct 2k-NN graph by ``<L, x>`` (or ``<w, x>`` when
    ``use_llr`` is false). Ties go to the lexicographically smallest
    canonical key, which is the first maximiser because the enumerated
    family is sorted by key.
    """
    if inst.n > MLE_MAX_N:
        raise ValueError(f"brute-force MLE is limited to n <= {MLE_MAX_N}, got n={inst.n}")
    fam = enumerate_family(inst.n, inst.k)
    vec = llr_vector(inst) if use_llr else np.asarray(inst.w.weights, dtype=np.float64)
    totals = vec[fam.edges].sum(axis=1)
    top = float(totals.max())
    # sums of the same multiset can differ by an ulp; treat those as ties
    tol = 1e-9 * max(1.0, abs(top))
    best = int(np.flatnonzero(totals >= top - tol)[0])
    return RecoveryResult("mle", fam.graph(best), objective=float(totals[best]))


def observed_adjacency(inst: Instance) -> list[set[int]]:
    """Neighbour sets of the unweighted graph formed by edges with weight 1."""
    if inst.model.family != BERNOULLI:
        raise ValueError("greedy recovery needs a Bernoulli (unweighted) observation")
    a, b = edge_pairs(np.flatnonzero(inst.w.weights == 1.0))
    adj: list[set[int]] = [set() for _ in range(inst.n)]
    for u, v in zip(a.tolist(), b.tolist()):
        adj[u].add(v)
        adj[v].add(u)
    return adj


def _as_adjacency(observed, n: int) -> list[set[int]]:
    if isinstance(observed, np.ndarray) or (
        isinstance(observed, Sequence) and observed and not isinstance(observed[0], (set, frozenset))
    ):
        a, b = edge_pairs(np.asarray(observed, dtype=np.int64))
        adj: list[set[int]] = [set() for _ in range(n)]
        for u, v in zip(a.tolist(), b.tolist()):
            adj[u].add(v)
            adj[v].add(u)
        return adj
    adj = [set(s) for s in observed]
    if len(adj) != n:
        raise ValueError("adjacency list length does not match n")
    return adj


def _order_neighbourhood(adj: list[set[int]], nbhd: set[int], k: int) -> list[int] | None:
    """Order ``nbhd`` as (sigma(n-k+1), ..., sigma(n), sigma(2), ..., sigma(k+1)).

    The target pattern is the induced subgraph of a 2k-NN graph on the
    neighbourhood of one vertex, whose members sit at cycle offsets
    ``-k..-1, 1..k``. Starting from an end (a vertex with exactly ``k-1``
    neighbours inside), each next member must be the unique unplaced vertex
    whose inside degree and adjacency to the already-placed members match the
    pattern. Returns ``None`` when the induced subgraph does not match.
    """
    if len(nbhd) != 2 * k:
        return None
    offsets = list(range(-k, 0)) + list(range(1, k + 1))

    def linked(a: int, b: int) -> bool:
        return abs(offsets[a] - offsets[b]) <= k

    target_deg = [sum(linked(a, b) for b in range(2 * k) if b != a) for a in range(2 * k)]
    inside = {v: adj[v] & nbhd for v in nbhd}
    ends = sorted(v for v in nbhd if len(inside[v]) == k - 1)
    if len(ends) != 2:
        return None
    # both orientations are valid; start from the smaller end for determinism
    placed = [ends[0]]
    remaining = set(nbhd) - {ends[0]}
    for p in range(1, 2 * k):
        cands = [
            v
            for v in remaining
            if len(inside[v]) == target_deg[p]
            and all((placed[q] in inside[v]) == linked(p, q) for q in range(p))
        ]
        if len(cands) != 1:
            return None
        placed.append(cands[0])
        remaining.discard(cands[0])
    return placed


def greedy_smallworld(
    observed, n: int, k: int, start: int = 0, trace: list | None = None
) -> RecoveryResult:
    """Sequential cycle reconstruction from an unweighted observed graph.

    ``observed`` is either a list of neighbour sets or an array of flat edge
    indices. Step 1 orders the neighbourhood of ``start``; step 2 labels the
    remaining cycle positions one at a time. Each of the three ways the
    procedure can give up is reported through ``error_reason``. When
    ``trace`` is a list, ``(i, |U|)`` is appended for every step-2 iteration.
    """
    if k < 1 or n < 2 * k + 2:
        raise ValueError(f"need k >= 1 and n >= 2k+2, got n={n}, k={k}")
    adj = _as_adjacency(observed, n)

    def fail(step: int, reason: str, notes: list[str]) -> RecoveryResult:
        return RecoveryResult("greedy", None, GREEDY_ERROR, step, reason, notes=notes)

    notes: list[str] = []
    ordered = _order_neighbourhood(adj, set(adj[start]), k)
    if ordered is None:
        return fail(1, STEP1_NOT_ISOMORPHIC, notes)

    # sigma_hat is 1-based to mirror the cycle positions 1..n
    sigma_hat: dict[int, int] = {1: start}
    for t, v in enumerate(ordered[:k]):
        sigma_hat[n - k + 1 + t] = v
    for t, v in enumerate(ordered[k:]):
        sigma_hat[2 + t] = v
    labeled = set(sigma_hat.values())

    last = n - 2 * k - 1
    for i in range(1, last + 1):
        u_set = adj[sigma_hat[i + 1]] - labeled
        nxt = sigma_hat.get(i + 2)
        if trace is not None:
            trace.append((i, len(u_set)))
        if len(u_set) >= 2:
            if i > last - 2:
                notes.append(f"case |U|>=2 fired at i={i}, within the last two iterations")
            hits = [u for u in u_set if nxt is not None and nxt in adj[u]]
            if len(hits) != 1:
                return fail(2, CASE_GE2_AMBIGUOUS, notes)
            chosen = hits[0]
        elif len(u_set) == 1:
            chosen = next(iter(u_set))
        else:
            if nxt is None:
                return fail(2, CASE_EQ0_AMBIGUOUS, notes)
            # unlabeled set taken before the new vertex is labeled
            hits = [v for v in adj[nxt] if len(adj[v] - labeled) == k]
            if len(hits) != 1:
                return fail(2, CASE_EQ0_AMBIGUOUS, notes)
            chosen = hits[0]
        sigma_hat[i + k + 1] = chosen
        labeled.add(chosen)

    order = [sigma_hat[p] for p in range(1, n + 1)]
    if len(set(order)) != n:
        # a vertex was labeled twice; cannot be a cycle
        return fail(2, CASE_GE2_AMBIGUOUS, notes)
    return RecoveryResult("greedy", knn_from_permutation(Permutation(tuple(order)), k), notes=notes)


def greedy_from_instance(inst: Instance, start: int = 0) -> RecoveryResult:
    return greedy_smallworld(observed_adjacency(inst), inst.n, inst.k, start)


def default_eps_n(n: int) -> float:
    return 1.0 / math.sqrt(math.log(n))


def threshold_estimator(inst: Instance, eps_n: float | None = None) -> RecoveryResult:
    """Keep every edge with ``w_e > sqrt((2 + eps_n) log n)``."""
    if inst.model.family != GAUSSIAN or inst.model.q != 0.0:
        raise ValueError("thresholding needs a Gaussian model with nu = 0")
    if eps_n is None:
        eps_n = default_eps_n(inst.n)
    cut = math.sqrt((2.0 + eps_n) * math.log(inst.n))
    est = np.flatnonzero(inst.w.weights > cut).astype(np.int64)
    return RecoveryResult("threshold", est, notes=[f"cut={cut!r}"])


def circulant_eigenvalues(n: int, k: int) -> np.ndarray:
    """Eigenvalues of the base 2k-NN adjacency matrix, indexed by frequency ``j``."""
    j = np.arange(n)
    out = np.empty(n)
    out[0] = 2 * k
    jj = j[1:]
    out[1:] = np.sin((2 * k + 1) * jj * np.pi / n) / np.sin(jj * np.pi / n) - 1.0
    return out


def spectral_ordering(inst: Instance) -> RecoveryResult:
    """Order vertices by angle in the second and third eigenvectors of ``W``."""
    W = inst.w.dense()
    try:
        _, vecs = np.linalg.eigh(W)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("eigensolver did not converge") from exc
    # eigh sorts ascending; drop the top (degree) direction, keep the next two
    v1, v2 = vecs[:, -2], vecs[:, -3]
    angles = np.arctan2(v2, v1)
    order = np.lexsort((np.arange(inst.n), angles))
    sigma = Permutation(tuple(order.tolist()))
    return RecoveryResult("spectral", knn_from_permutation(sigma, inst.k))


def recover(inst: Instance, estimator: str, **kwargs) -> RecoveryResult:
    if estimator == "mle":
        return mle_bruteforce(inst, **kwargs)
    if estimator == "greedy":
        return greedy_from_instance(inst, **kwargs)
    if estimator == "threshold":
        return threshold_estimator(inst, **kwargs)
    if estimator == "spectral":
        return spectral_ordering(inst)
    raise ValueError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")
