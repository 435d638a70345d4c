"""Seeded generation of hidden 2k-NN graph instances.

Randomness is counter-based: edge weights in block ``c`` of ``CHUNK`` flat
edge indices come from a Philox stream keyed by the instance seed with
counter offset ``c``. A block's values therefore do not depend on which
other blocks were generated, or in what order.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core_graph import KnnGraph, Permutation, knn_from_permutation, num_pairs
from .weight_model import (
    BERNOULLI,
    GAUSSIAN,
    ModelPair,
    SmallWorldParams,
    smallworld_params,
)

__all__ = [
    "CHUNK",
    "WeightMatrix",
    "Instance",
    "rng_stream",
    "sample_instance",
    "sample_smallworld",
    "sample_weights",
    "poisson_inverse_cdf",
]

CHUNK = 1 << 18
SEED_MASK = (1 << 64) - 1
_PERM_STREAM = 0
_MAX_POISSON_RATE = 30.0


def rng_stream(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for ``(seed, stream)``; streams occupy disjoint counter ranges."""
    bitgen = np.random.Philox(key=int(seed) & SEED_MASK, counter=[0, 0, 0, int(stream)])
    return np.random.Generator(bitgen)


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Observed edge weights, indexed by flat edge index."""

    n: int
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.weights.shape != (num_pairs(self.n),):
            raise ValueError(f"expected {num_pairs(self.n)} weights, got {self.weights.shape}")
        self.weights.setflags(write=False)

    def dense(self) -> np.ndarray:
        """Symmetric ``n x n`` matrix with zero diagonal."""
        W = np.zeros((self.n, self.n), dtype=np.float64)
        rows, cols = np.tril_indices(self.n, -1)
        # np.tril_indices walks (j, i) with i < j in exactly flat-index order
        W[rows, cols] = self.weights
        W[cols, rows] = self.weights
        return W


@dataclass(frozen=True, eq=False)
class Instance:
    x_star: KnnGraph
    w: WeightMatrix
    model: ModelPair
    seed: int

    def __post_init__(self) -> None:
        if self.x_star.n != self.w.n:
            raise ValueError("x_star and w disagree on n")

    @property
    def n(self) -> int:
        return self.x_star.n

    @property
    def k(self) -> int:
        return self.x_star.k

    def to_dict(self) -> dict:
        weights = self.w.weights
        if self.model.family == GAUSSIAN:
            flat = weights.tolist()
        else:
            flat = weights.astype(np.int64).tolist()
        return {
            "n": self.n,
            "k": self.k,
            "model": self.model.to_dict(),
            "seed": self.seed,
            "sigma": list(self.x_star.generator.order),
            "edge_order": "flat index j*(j-1)/2 + i for 0-based i < j",
            "weights": flat,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> Instance:
        model = ModelPair.from_dict(d["model"])
        x_star = knn_from_permutation(Permutation(tuple(d["sigma"])), int(d["k"]))
        weights = np.asarray(d["weights"], dtype=np.float64)
        return cls(x_star, WeightMatrix(int(d["n"]), weights), model, int(d["seed"]))

    @classmethod
    def load(cls, path: str | Path) -> Instance:
        return cls.from_dict(json.loads(Path(path).read_text()))


def poisson_inverse_cdf(u: np.ndarray, rate: float) -> np.ndarray:
    """Smallest ``m`` with ``F(m) >= u`` for a Poisson(rate) cdf ``F``."""
    if not 0 < rate <= _MAX_POISSON_RATE:
        raise ValueError(f"Poisson rate must lie in (0, {_MAX_POISSON_RATE}]")
    top = int(rate + 20.0 * math.sqrt(rate) + 40)
    m = np.arange(top + 1)
    log_pmf = m * math.log(rate) - rate - np.array([math.lgamma(i + 1.0) for i in m])
    cdf = np.cumsum(np.exp(log_pmf))
    cdf[-1] = 1.0
    return np.searchsorted(cdf, u, side="left").astype(np.float64)


def _draw_chunk(gen: np.random.Generator, on_edge: np.ndarray, model: ModelPair) -> np.ndarray:
    size = on_edge.size
    p, q = model.p, model.q
    if model.family == GAUSSIAN:
        out = gen.standard_normal(size)
        if q != 0.0:
            out += q
        out[on_edge] += p - q
        return out
    u = gen.random(size)
    if model.family == BERNOULLI:
        return (u < np.where(on_edge, p, q)).astype(np.float64)
    out = np.empty(size)
    out[on_edge] = poisson_inverse_cdf(u[on_edge], p)
    out[~on_edge] = poisson_inverse_cdf(u[~on_edge], q)
    return out


def sample_weights(x_star: KnnGraph, model: ModelPair, seed: int) -> WeightMatrix:
    """Draw every edge weight: ``P`` on edges of ``x_star``, ``Q`` elsewhere."""
    total = num_pairs(x_star.n)
    on = x_star.mask()
    weights = np.empty(total, dtype=np.float64)
    for c, start in enumerate(range(0, total, CHUNK)):
        stop = min(start + CHUNK, total)
        gen = rng_stream(seed, c + 1)
        weights[start:stop] = _draw_chunk(gen, on[start:stop], model)
    return WeightMatrix(x_star.n, weights)


def sample_instance(
    n: int,
    k: int,
    model: ModelPair,
    sigma: Permutation | str = "random",
    seed: int = 0,
) -> Instance:
    """Plant a 2k-NN graph and draw the complete weighted graph around it."""
    seed = int(seed) & SEED_MASK
    if isinstance(sigma, str):
        if sigma != "random":
            raise ValueError("sigma must be a Permutation or 'random'")
        sigma = Permutation.random(n, rng_stream(seed, _PERM_STREAM))
    elif sigma.n != n:
        raise ValueError("sigma has the wrong length")
    x_star = knn_from_permutation(sigma, k)
    return Instance(x_star, sample_weights(x_star, model, seed), model, seed)


def sample_smallworld(sw: SmallWorldParams, seed: int = 0, sigma: Permutation | str = "random") -> Instance:
    return sample_instance(sw.n, sw.k, smallworld_params(sw), sigma, seed)
