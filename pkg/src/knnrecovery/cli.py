"""Command line entry point: ``knnrecovery <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .core_graph import Permutation, knn_from_permutation
from .enumeration import LEMMAS, run_lemmas
from .estimators import ESTIMATORS, recover
from .harness import ExperimentConfig, resolve_output, run_experiment, summary_csv
from .sampler import Instance, rng_stream, sample_instance
from .weight_model import (
    ModelPair,
    SmallWorldParams,
    kl,
    kl_reverse,
    renyi_half,
    smallworld_params,
    threshold_ratios,
)

log = logging.getLogger("knnrecovery")


def _model_from_args(args) -> ModelPair:
    if args.family == "smallworld":
        if args.epsilon is None:
            raise SystemExit("--epsilon is required for the smallworld family")
        return smallworld_params(SmallWorldParams(args.n, args.k, args.epsilon))
    if args.p is None or args.q is None:
        raise SystemExit("--p and --q are required")
    return ModelPair.from_dict({"family": args.family, "p": args.p, "q": args.q})


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        resolve_output(out).write_text(text + "\n")
    else:
        print(text)


def cmd_generate(args) -> int:
    model = _model_from_args(args)
    sigma = Permutation.identity(args.n) if args.sigma == "identity" else "random"
    inst = sample_instance(args.n, args.k, model, sigma, args.seed)
    path = resolve_output(args.out)
    inst.save(path)
    log.info("wrote instance n=%d k=%d to %s", args.n, args.k, path)
    return 0


def cmd_recover(args) -> int:
    inst = Instance.load(args.instance)
    options = {}
    if args.estimator == "greedy":
        options["start"] = args.start
    if args.estimator == "threshold" and args.eps_n is not None:
        options["eps_n"] = args.eps_n
    t0 = time.perf_counter()
    result = recover(inst, args.estimator, **options)
    wall_ms = (time.perf_counter() - t0) * 1e3
    hamming = result.hamming_to(inst.x_star)
    payload = {
        "estimator": args.estimator,
        "status": result.status,
        "hamming_distance_to_truth": hamming,
        "exact_match": bool(result.ok and hamming == 0),
        "wall_time_ms": wall_ms,
    }
    if not result.ok:
        payload["error_step"] = result.error_step
        payload["error_reason"] = result.error_reason
    if result.objective is not None:
        payload["objective"] = result.objective
    if result.notes:
        payload["notes"] = result.notes
    _emit(payload, args.out)
    return 0


def cmd_divergence(args) -> int:
    model = _model_from_args(args)
    exact, almost = threshold_ratios(args.n, args.k, model)
    _emit(
        {
            "model": model.to_dict(),
            "n": args.n,
            "k": args.k,
            "alpha": renyi_half(model),
            "kl_pq": kl(model),
            "kl_qp": kl_reverse(model),
            "exact_ratio": exact,
            "almost_exact_ratio": almost,
        },
        args.out,
    )
    return 0


def cmd_enumerate(args) -> int:
    if args.random_xstar:
        sigma = Permutation.random(args.n, rng_stream(args.seed, 0))
    else:
        sigma = Permutation.identity(args.n)
    report = run_lemmas(knn_from_permutation(sigma, args.k), args.lemma)
    _emit(report, args.out)
    return 0 if report["passed"] else 1


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    out = args.out or cfg.output
    records, rows = run_experiment(cfg, workers=args.threads)
    text = summary_csv(rows)
    if out:
        resolve_output(out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.records:
        resolve_output(args.records).write_text(
            json.dumps([r.__dict__ for r in records], indent=1) + "\n"
        )
    return 0


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--family", choices=["gaussian", "poisson", "bernoulli", "smallworld"], required=True)
    p.add_argument("--p", type=float, help="parameter of P (mean, rate or probability)")
    p.add_argument("--q", type=float, help="parameter of Q")
    p.add_argument("--epsilon", type=float, help="rewiring probability (smallworld only)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="knnrecovery", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample an instance and write it as JSON")
    _add_model_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", choices=["random", "identity"], default="random")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("recover", help="run an estimator on an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--estimator", choices=ESTIMATORS, required=True)
    p.add_argument("--start", type=int, default=0, help="greedy start vertex")
    p.add_argument("--eps-n", type=float, default=None, help="thresholding slack")
    p.add_argument("--out")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("divergence", help="print divergences and threshold ratios")
    _add_model_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_divergence)

    p = sub.add_parser("enumerate", help="exhaustively check the counting lemmas")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--lemma", choices=("all",) + LEMMAS, default="all")
    p.add_argument("--random-xstar", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("experiment", help="run a Monte Carlo sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="summary CSV path (overrides the config)")
    p.add_argument("--records", help="optional JSON dump of every trial")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
