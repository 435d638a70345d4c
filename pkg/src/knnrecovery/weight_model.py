"""Edge-weight families, log-likelihood ratios, divergences and rate functions.

All quantities are in nats. ``P`` is the law of weights on planted edges and
``Q`` the law elsewhere. The log-MGFs of the log-likelihood ratio are

    psi_Q(lam) = log E_Q[(dP/dQ)^lam],   psi_P(lam) = psi_Q(lam + 1),

and the rate functions are their Legendre transforms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

__all__ = [
    "GAUSSIAN",
    "POISSON",
    "BERNOULLI",
    "BERNOULLI_CLAMP",
    "DistributionSpec",
    "ModelPair",
    "SmallWorldParams",
    "llr",
    "renyi_half",
    "kl",
    "kl_reverse",
    "log_mgf_q",
    "log_mgf_p",
    "rate_eq",
    "rate_ep",
    "rate_sum_minimum",
    "smallworld_params",
    "threshold_ratios",
]

GAUSSIAN = "gaussian"
POISSON = "poisson"
BERNOULLI = "bernoulli"
FAMILIES = (GAUSSIAN, POISSON, BERNOULLI)

BERNOULLI_CLAMP = 1e-12
LAMBDA_BRACKET = (-10.0, 11.0)
LEGENDRE_XTOL = 1e-10


@dataclass(frozen=True)
class DistributionSpec:
    """One weight law: ``gaussian`` (mean, unit variance), ``poisson`` (rate)
    or ``bernoulli`` (success probability)."""

    family: str
    param: float

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        value = float(self.param)
        if not math.isfinite(value):
            raise ValueError("parameter must be finite")
        if self.family == POISSON and value <= 0:
            raise ValueError("Poisson rate must be positive")
        if self.family == BERNOULLI and not 0.0 < value < 1.0:
            raise ValueError("Bernoulli probability must lie strictly inside (0, 1)")
        object.__setattr__(self, "param", value)

    @classmethod
    def gaussian(cls, mean: float) -> DistributionSpec:
        return cls(GAUSSIAN, mean)

    @classmethod
    def poisson(cls, rate: float) -> DistributionSpec:
        return cls(POISSON, rate)

    @classmethod
    def bernoulli(cls, prob: float) -> DistributionSpec:
        return cls(BERNOULLI, prob)

    def mean(self) -> float:
        return self.param

    def variance(self) -> float:
        if self.family == GAUSSIAN:
            return 1.0
        if self.family == POISSON:
            return self.param
        return self.param * (1.0 - self.param)

    def to_dict(self) -> dict:
        return {"family": self.family, "param": self.param}

    @classmethod
    def from_dict(cls, d: dict) -> DistributionSpec:
        return cls(d["family"], d["param"])


@dataclass(frozen=True)
class ModelPair:
    p_dist: DistributionSpec
    q_dist: DistributionSpec

    def __post_init__(self) -> None:
        if self.p_dist.family != self.q_dist.family:
            raise ValueError("P and Q must belong to the same family")
        # P == Q is allowed: it is the no-signal end of every sweep
        if self.family == BERNOULLI and self.p_dist.param < self.q_dist.param:
            raise ValueError("Bernoulli models need p >= q")

    @property
    def family(self) -> str:
        return self.p_dist.family

    @property
    def p(self) -> float:
        return self.p_dist.param

    @property
    def q(self) -> float:
        return self.q_dist.param

    @classmethod
    def gaussian(cls, mu: float, nu: float = 0.0) -> ModelPair:
        return cls(DistributionSpec.gaussian(mu), DistributionSpec.gaussian(nu))

    @classmethod
    def poisson(cls, mu: float, nu: float) -> ModelPair:
        return cls(DistributionSpec.poisson(mu), DistributionSpec.poisson(nu))

    @classmethod
    def bernoulli(cls, p: float, q: float) -> ModelPair:
        return cls(DistributionSpec.bernoulli(p), DistributionSpec.bernoulli(q))

    def to_dict(self) -> dict:
        return {"family": self.family, "p": self.p, "q": self.q}

    @classmethod
    def from_dict(cls, d: dict) -> ModelPair:
        return cls(DistributionSpec(d["family"], d["p"]), DistributionSpec(d["family"], d["q"]))


@dataclass(frozen=True)
class SmallWorldParams:
    n: int
    k: int
    epsilon: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.n < 2:
            raise ValueError("need at least two vertices")

    @property
    def p(self) -> float:
        return 1.0 - self.epsilon + 2.0 * self.epsilon * self.k / (self.n - 1)

    @property
    def q(self) -> float:
        return 2.0 * self.epsilon * self.k / (self.n - 1)


def llr(m: ModelPair, w):
    """Log-likelihood ratio ``log dP/dQ`` evaluated at weight(s) ``w``."""
    w_arr = np.asarray(w, dtype=np.float64)
    if m.family == GAUSSIAN:
        mu, nu = m.p, m.q
        out = (mu - nu) * w_arr - (mu * mu - nu * nu) / 2.0
    elif m.family == POISSON:
        if np.any(w_arr < 0) or np.any(w_arr != np.floor(w_arr)):
            raise ValueError("Poisson weights must be non-negative integers")
        mu, nu = m.p, m.q
        out = w_arr * math.log(mu / nu) - (mu - nu)
    else:
        if np.any((w_arr != 0) & (w_arr != 1)):
            raise ValueError("Bernoulli weights must be 0 or 1")
        p, q = m.p, m.q
        out = w_arr * math.log(p / q) + (1.0 - w_arr) * math.log((1.0 - p) / (1.0 - q))
    return float(out) if np.ndim(out) == 0 else out


def log_mgf_q(m: ModelPair, lam: float) -> float:
    """``psi_Q(lam) = log int dP^lam dQ^(1-lam)``."""
    lam = float(lam)
    if m.family == GAUSSIAN:
        return lam * (lam - 1.0) * (m.p - m.q) ** 2 / 2.0
    if m.family == POISSON:
        mu, nu = m.p, m.q
        return mu**lam * nu ** (1.0 - lam) - lam * mu - (1.0 - lam) * nu
    p, q = m.p, m.q
    # log-sum-exp of the two atoms
    a = lam * math.log(p) + (1.0 - lam) * math.log(q)
    b = lam * math.log1p(-p) + (1.0 - lam) * math.log1p(-q)
    hi = max(a, b)
    return hi + math.log(math.exp(a - hi) + math.exp(b - hi))


def log_mgf_p(m: ModelPair, lam: float) -> float:
    return log_mgf_q(m, float(lam) + 1.0)


def renyi_half(m: ModelPair) -> float:
    """Renyi divergence of order 1/2, ``-2 log int sqrt(dP dQ)``."""
    if m.family == GAUSSIAN:
        return (m.p - m.q) ** 2 / 4.0
    if m.family == POISSON:
        return (math.sqrt(m.p) - math.sqrt(m.q)) ** 2
    p, q = m.p, m.q
    return -2.0 * math.log(math.sqrt(p * q) + math.sqrt((1.0 - p) * (1.0 - q)))


def _kl(family: str, a: float, b: float) -> float:
    if family == GAUSSIAN:
        return (a - b) ** 2 / 2.0
    if family == POISSON:
        return a * math.log(a / b) + b - a
    return a * math.log(a / b) + (1.0 - a) * math.log((1.0 - a) / (1.0 - b))


def kl(m: ModelPair) -> float:
    """``D(P || Q)``."""
    return _kl(m.family, m.p, m.q)


def kl_reverse(m: ModelPair) -> float:
    """``D(Q || P)``."""
    return _kl(m.family, m.q, m.p)


def _check_tau(m: ModelPair, tau: float) -> None:
    lo, hi = -kl_reverse(m), kl(m)
    slack = 1e-12 * max(1.0, hi - lo)
    if not lo - slack <= tau <= hi + slack:
        raise ValueError(f"tau={tau} outside [{lo}, {hi}]")


def rate_eq(m: ModelPair, tau: float) -> float:
    """``E_Q(tau) = sup_lam (lam*tau - psi_Q(lam))`` on ``[-D(Q||P), D(P||Q)]``."""
    tau = float(tau)
    _check_tau(m, tau)
    if m.p == m.q:
        return 0.0
    if m.family == GAUSSIAN:
        s2 = (m.p - m.q) ** 2
        return (tau + s2 / 2.0) ** 2 / (2.0 * s2)
    res = optimize.minimize_scalar(
        lambda lam: log_mgf_q(m, lam) - lam * tau,
        bounds=LAMBDA_BRACKET,
        method="bounded",
        options={"xatol": LEGENDRE_XTOL},
    )
    lo, hi = LAMBDA_BRACKET
    if not lo + 1e-6 < res.x < hi - 1e-6:
        raise RuntimeError(f"Legendre maximiser hit the bracket edge at lam={res.x}")
    # the admissible tau range puts the maximiser in [0, 1]; check the endpoints too
    best = -res.fun
    for lam in (0.0, 1.0):
        best = max(best, lam * tau - log_mgf_q(m, lam))
    return max(best, 0.0)


def rate_ep(m: ModelPair, tau: float) -> float:
    """``E_P(tau) = E_Q(tau) - tau``."""
    return rate_eq(m, tau) - float(tau)


def rate_sum_minimum(m: ModelPair) -> tuple[float, float]:
    """Minimise ``E_P + E_Q`` over the admissible interval; returns ``(tau, value)``."""
    lo, hi = -kl_reverse(m), kl(m)
    res = optimize.minimize_scalar(
        lambda t: rate_eq(m, t) + rate_ep(m, t),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12 * max(1.0, hi - lo)},
    )
    return float(res.x), float(res.fun)


def smallworld_params(sw: SmallWorldParams) -> ModelPair:
    """Bernoulli pair of the rewired 2k-NN graph, clamped away from 0 and 1."""
    p, q = sw.p, sw.q
    if not (0.0 <= q <= 1.0 and 0.0 <= p <= 1.0):
        raise ValueError(f"derived p={p}, q={q} outside [0, 1]")
    if not p > q:
        raise ValueError(f"derived p={p} does not exceed q={q}")
    p = min(max(p, BERNOULLI_CLAMP), 1.0 - BERNOULLI_CLAMP)
    q = min(max(q, BERNOULLI_CLAMP), 1.0 - BERNOULLI_CLAMP)
    return ModelPair.bernoulli(p, q)


def threshold_ratios(n: int, k: int, m: ModelPair) -> tuple[float, float]:
    """``(2*alpha/log n, k*D(P||Q)/log n)``; each exceeds 1 above its threshold."""
    if n < 2 * k + 2:
        raise ValueError(f"need n >= 2k+2, got n={n}, k={k}")
    log_n = math.log(n)
    return 2.0 * renyi_half(m) / log_n, k * kl(m) / log_n
