"""Seeded Monte Carlo sweeps over signal strength.

Each (sweep index, trial index) pair gets its own seed from :func:`mix64`, so
results do not depend on how trials are scheduled across workers.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import NormalDist

from .estimators import ESTIMATORS, MLE_MAX_N, recover
from .sampler import sample_instance
from .weight_model import ModelPair, SmallWorldParams, smallworld_params

__all__ = [
    "OUTPUT_DIR_ENV",
    "CSV_COLUMNS",
    "ExperimentConfig",
    "TrialRecord",
    "mix64",
    "wilson_interval",
    "model_for",
    "run_trial",
    "run_experiment",
    "summarize",
    "summary_csv",
    "resolve_output",
]

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "KNNRECOVERY_OUTPUT_DIR"
CSV_COLUMNS = (
    "sweep_value",
    "trials",
    "exact_rate",
    "exact_ci_lo",
    "exact_ci_hi",
    "mean_misclassified_fraction",
    "mean_wall_time_ms",
)
FAMILIES = ("gaussian", "poisson", "bernoulli", "smallworld")
_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mix64(*parts: int) -> int:
    """Avalanche-hash a tuple of integers into one 64-bit seed."""
    h = 0
    for part in parts:
        h = _splitmix64(h ^ (int(part) & _MASK64))
    return h


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("need at least one trial")
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denom
    # the closed form is exact at 0 and 1 but rounding can leave an ulp
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


@dataclass
class ExperimentConfig:
    """One sweep.

    ``sweep`` holds the signal values: the mean ``mu`` for ``gaussian``
    (``nu`` is fixed by ``nu``), ``[mu, nu]`` pairs for ``poisson``,
    ``[p, q]`` pairs for ``bernoulli`` and the rewiring probability for
    ``smallworld``.
    """

    n: int
    k: int
    family: str
    sweep: list
    trials: int
    estimator: str
    master_seed: int = 0
    output: str | None = None
    nu: float = 0.0
    estimator_options: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.sweep:
            raise ValueError("sweep must be non-empty")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.n < 2 * self.k + 2:
            raise ValueError(f"need n >= 2k+2, got n={self.n}, k={self.k}")
        if self.estimator == "threshold" and (self.family != "gaussian" or self.nu != 0.0):
            raise ValueError("threshold estimator needs a Gaussian model with nu = 0")
        if self.estimator == "greedy" and self.family not in ("bernoulli", "smallworld"):
            raise ValueError("greedy estimator needs an unweighted (bernoulli/smallworld) model")
        if self.estimator == "mle" and self.n > MLE_MAX_N:
            raise ValueError(f"mle estimator needs n <= {MLE_MAX_N}")

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrialRecord:
    sweep_value: str
    sweep_index: int
    trial: int
    seed: int
    exact_match: bool
    hamming: int
    misclassified_fraction: float
    wall_time_ms: float
    status: str

    def deterministic_fields(self) -> tuple:
        d = asdict(self)
        d.pop("wall_time_ms")
        return tuple(d.values())


def _format_value(value) -> str:
    if isinstance(value, (list, tuple)):
        return ";".join(repr(float(v)) for v in value)
    return repr(float(value))


def model_for(cfg: ExperimentConfig, value) -> ModelPair:
    if cfg.family == "gaussian":
        return ModelPair.gaussian(float(value), cfg.nu)
    if cfg.family == "poisson":
        mu, nu = value
        return ModelPair.poisson(float(mu), float(nu))
    if cfg.family == "bernoulli":
        p, q = value
        return ModelPair.bernoulli(float(p), float(q))
    return smallworld_params(SmallWorldParams(cfg.n, cfg.k, float(value)))


def run_trial(cfg: ExperimentConfig, sweep_index: int, trial: int) -> TrialRecord:
    value = cfg.sweep[sweep_index]
    seed = mix64(cfg.master_seed, sweep_index, trial)
    inst = sample_instance(cfg.n, cfg.k, model_for(cfg, value), "random", seed)
    t0 = time.perf_counter()
    result = recover(inst, cfg.estimator, **cfg.estimator_options)
    wall_ms = (time.perf_counter() - t0) * 1e3
    hamming = result.hamming_to(inst.x_star)
    exact = result.ok and hamming == 0
    status = result.status if result.ok else f"{result.status}:{result.error_reason}"
    return TrialRecord(
        sweep_value=_format_value(value),
        sweep_index=sweep_index,
        trial=trial,
        seed=seed,
        exact_match=exact,
        hamming=hamming,
        misclassified_fraction=min(1.0, hamming / (2.0 * cfg.n * cfg.k)),
        wall_time_ms=wall_ms,
        status=status,
    )


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> tuple[list[TrialRecord], list[dict]]:
    """Run every trial of the sweep; returns records sorted by index and the summary rows."""
    jobs = [(s, t) for s in range(len(cfg.sweep)) for t in range(cfg.trials)]
    log.info("running %d trials with %d worker(s)", len(jobs), workers)
    if workers <= 1:
        records = [run_trial(cfg, s, t) for s, t in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda job: run_trial(cfg, *job), jobs))
    records.sort(key=lambda r: (r.sweep_index, r.trial))
    return records, summarize(records)


def summarize(records) -> list[dict]:
    """One row per sweep value that has at least one trial."""
    groups: dict[int, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault(r.sweep_index, []).append(r)
    rows = []
    for idx in sorted(groups):
        recs = groups[idx]
        if not recs:
            continue
        trials = len(recs)
        hits = sum(r.exact_match for r in recs)
        lo, hi = wilson_interval(hits, trials)
        rows.append(
            {
                "sweep_value": recs[0].sweep_value,
                "trials": trials,
                "exact_rate": hits / trials,
                "exact_ci_lo": lo,
                "exact_ci_hi": hi,
                "mean_misclassified_fraction": sum(r.misclassified_fraction for r in recs) / trials,
                "mean_wall_time_ms": sum(r.wall_time_ms for r in recs) / trials,
            }
        )
    return rows


def summary_csv(rows: list[dict], include_wall_time: bool = True) -> str:
    columns = CSV_COLUMNS if include_wall_time else CSV_COLUMNS[:-1]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: (repr(row[c]) if isinstance(row[c], float) else row[c]) for c in columns})
    return buf.getvalue()


def resolve_output(path: str | Path) -> Path:
    """Place relative output paths under ``$KNNRECOVERY_OUTPUT_DIR`` when it is set."""
    path = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path
