"""Command line entry point: ``hcbandits run|bounds|gen-fixture``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import bounds
from .core import RNG_ALGORITHM, RngStream
from .harness import ENVIRONMENTS, ExperimentConfig, ExperimentError, run_experiment, write_outputs


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()] if text else []


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hcbandits",
                                     description="Bandits with historical observations and clustered arms.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded experiment")
    run.add_argument("--env", choices=ENVIRONMENTS, default="synthetic-classical")
    run.add_argument("--policies", default=None,
                     help="comma separated, e.g. ucb,hucb,ucbc,hucbc,meta")
    run.add_argument("--rounds", type=int, default=10_000)
    run.add_argument("--trials", type=int, default=None,
                     help="default 20 for synthetic, 10 for datasets")
    run.add_argument("--seed", type=int, default=42)
    run.add_argument("--alpha", type=float, default=1.0)
    run.add_argument("--epsilon", type=float, default=0.1)
    run.add_argument("--cluster-mode", choices=("quintile", "domain"), default="quintile")
    run.add_argument("--history-size", type=int, default=None,
                     help="historical readings (latency, default 200) or patients (dose, default 1500)")
    run.add_argument("--data", default=None, help="dataset CSV; a synthetic fixture is used if omitted")
    run.add_argument("--resample-env", choices=("per-trial", "fixed"), default="per-trial")
    run.add_argument("--share-feedback", action="store_true",
                     help="META updates both sub-policies every round")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", default="results")

    bnd = sub.add_parser("bounds", help="evaluate a closed-form regret bound")
    bsub = bnd.add_subparsers(dest="bound", required=True)
    b = bsub.add_parser("hucb", help="expected plays of a suboptimal arm under HUCB")
    b.add_argument("--T", type=float, required=True)
    b.add_argument("--gap", type=float, required=True)
    b.add_argument("--H-k", type=float, default=0)
    b.add_argument("--H-kstar", type=float, default=0)
    b = bsub.add_parser("hucbc", help="HUCBC regret under tight clustering")
    b.add_argument("--T", type=float, required=True)
    b.add_argument("--cluster-gaps", required=True)
    b.add_argument("--cluster-hist", default="")
    b.add_argument("--optimal-cluster-hist", type=float, default=0)
    b.add_argument("--arm-gaps", default="")
    b.add_argument("--arm-hist", default="")
    b.add_argument("--best-arm-hist", type=float, default=0)
    b = bsub.add_parser("hucbc-prime", help="HUCBC' regret under any clustering")
    b.add_argument("--T", type=float, required=True)
    b.add_argument("--cluster-arm-gaps", required=True,
                   help="clusters separated by ';', arm gaps by ',' e.g. '0.4,0.5;0.3'")
    b.add_argument("--r", type=float, required=True)
    b.add_argument("--s", type=float, required=True)
    b.add_argument("--arm-gaps", default="")
    b.add_argument("--arm-hist", default="")
    b.add_argument("--best-arm-hist", type=float, default=0)
    b = bsub.add_parser("hlinucb", help="HLINUCB high-probability regret bound")
    b.add_argument("--T", type=float, required=True)
    b.add_argument("--d", type=int, required=True)
    b.add_argument("--sigma", type=float, required=True)
    b.add_argument("--delta", type=float, required=True)
    b.add_argument("--phi", type=float, required=True)
    b.add_argument("--theta-norm", type=float, required=True)
    b.add_argument("--logdet-A", type=float, required=True)
    b.add_argument("--logdet-H", type=float, default=0.0)

    fix = sub.add_parser("gen-fixture", help="write a synthetic dataset CSV")
    fix.add_argument("kind", choices=("latency", "dose"))
    fix.add_argument("--out", required=True)
    fix.add_argument("--seed", type=int, default=0)
    fix.add_argument("--sources", type=int, default=700)
    fix.add_argument("--readings", type=int, default=1300)
    fix.add_argument("--patients", type=int, default=5000)
    return parser


def _hist(text, n):
    h = _floats(text)
    return h if h else [0.0] * n


def _bound(args) -> float:
    if args.bound == "hucb":
        return bounds.hucb_plays_bound(args.T, args.gap, args.H_k, args.H_kstar)
    if args.bound == "hucbc":
        gaps = _floats(args.cluster_gaps)
        arm_gaps = _floats(args.arm_gaps)
        return bounds.hucbc_tight_regret_bound(
            args.T, gaps, _hist(args.cluster_hist, len(gaps)), args.optimal_cluster_hist,
            arm_gaps, _hist(args.arm_hist, len(arm_gaps)), args.best_arm_hist)
    if args.bound == "hucbc-prime":
        clusters = [_floats(c) for c in args.cluster_arm_gaps.split(";") if c.strip()]
        arm_gaps = _floats(args.arm_gaps)
        return bounds.hucbc_prime_regret_bound(args.T, clusters, args.r, args.s, arm_gaps,
                                               _hist(args.arm_hist, len(arm_gaps)),
                                               args.best_arm_hist)
    return bounds.hlinucb_regret_bound(args.T, args.d, args.sigma, args.delta, args.phi,
                                       args.theta_norm, args.logdet_A, args.logdet_H)


DEFAULT_POLICIES = {
    "synthetic-classical": "ucb,hucb,ucbc,hucbc,meta",
    "latency": "ucb,hucb,ucbc,hucbc,meta",
    "synthetic-contextual": "linucb,hlinucb,linucbc,hlinucbc,meta",
    "dose": "linucb,hlinucb,linucbc,hlinucbc,meta",
}


def _run(args) -> int:
    trials = args.trials or (20 if args.env.startswith("synthetic") else 10)
    policies = (args.policies or DEFAULT_POLICIES[args.env]).split(",")
    config = ExperimentConfig(
        env=args.env, policies=tuple(policies), rounds=args.rounds, trials=trials,
        seed=args.seed, alpha=args.alpha, epsilon=args.epsilon, cluster_mode=args.cluster_mode,
        history_size=args.history_size, data=args.data, resample_env=args.resample_env,
        share_feedback=args.share_feedback, workers=args.workers, out=args.out)
    try:
        result = run_experiment(config)
    except ExperimentError as exc:
        print(f"error: {exc} (partial results in {args.out})", file=sys.stderr)
        return 1
    paths = write_outputs(result, config)
    summary = {"seed": config.seed, "rng": RNG_ALGORITHM, "config_hash": config.config_hash(),
               "dataset": result.dataset,
               "terminal_per_round_reward": {p: round(float(v.mean()), 6)
                                             for p, v in result.terminal_per_round_reward.items()},
               "outputs": {k: str(v) for k, v in paths.items()}}
    print(json.dumps(summary, indent=1))
    return 0


def _gen_fixture(args) -> int:
    from .environments import write_dose_fixture, write_latency_fixture
    rng = RngStream(args.seed, (3,)).generator()
    if args.kind == "latency":
        write_latency_fixture(args.out, rng, n_sources=args.sources, readings=args.readings)
    else:
        write_dose_fixture(args.out, rng, n=args.patients)
    print(args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "bounds":
            print(f"{_bound(args):.6f}")
            return 0
        return _gen_fixture(args)
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
