"""Command-line entry point.

Run from the repository root, e.g.

    python -m src.cli gen --kind countsketch --m 16 --n 64 --seed 1 --out pi.ose
"""

import json
import logging
import os
import sys
from argparse import ArgumentParser, Namespace
from collections.abc import Sequence

import pandas as pd

from src.eval.audit import collision_pair_stats, heavy_entry_audit
from src.eval.sweep import SweepConfig, threshold_sweep
from src.eval.tightness import demo_hadamard_tightness, hadamard_duplicate_prob
from src.models.adversary import find_colliding_pairs, find_colliding_pairs_general
from src.models.witness import anticoncentration_prob, build_witness, certificate_to_text
from src.utils.construction import KINDS, make_construction
from src.utils.eval import estimate_failure_prob, failure_record
from src.utils.general import (
    atomic_write,
    check_seed,
    DEFAULT_SEED,
    derive_seed,
    get_dir,
    InfeasibleInstanceError,
    parse_real,
)
from src.utils.hard_instances import DBeta, FAMILIES, get_distribution
from src.utils.sparsemat import (
    column_inner_product,
    read_dense,
    read_sketch,
    SketchMatrix,
    write_dense,
    write_sketch,
)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


class CliUsageError(ValueError):
    """Invalid command line."""


class CliParser(ArgumentParser):
    """Argument parser that raises instead of exiting, so usage errors share the exit path."""

    def error(self, message: str) -> None:
        raise CliUsageError(message)


def provenance(args: Namespace) -> list[str]:
    """Resolved configuration as sorted `key: value` lines."""
    config = {k: v for k, v in vars(args).items() if k not in ("handler", "verbose")}
    return [f"{key}: {config[key]}" for key in sorted(config)]


def default_out(args: Namespace, name: str) -> str:
    if args.out is not None:
        return args.out
    return os.path.join(get_dir(f"eval/results/{args.subcommand}"), name)


def write_csv(path: str, df: pd.DataFrame, comments: list[str]) -> None:
    atomic_write(path, "".join(f"# {c}\n" for c in comments) + df.to_csv(index=False, lineterminator="\n"))


def write_json(path: str, payload: dict) -> None:
    atomic_write(path, json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def load_sketch(path: str) -> SketchMatrix:
    """Read an OSE1 or OSE1D file."""
    with open(path) as f:
        header = f.readline()
    if header.startswith("OSE1D"):
        return SketchMatrix(read_dense(path))
    return read_sketch(path)


def sketch_from_args(args: Namespace) -> SketchMatrix:
    """The sketch named by `--sketch`, otherwise one drawn from `--kind`, `--m`, `--n`."""
    if args.sketch is not None:
        return load_sketch(args.sketch)
    if args.m is None or args.n is None:
        raise CliUsageError("Either --sketch or both --m and --n are required.")
    construction = make_construction(args.kind, args.m, args.n, args.s, args.eps)
    return construction.generate_sketch(args.seed)


def gen(args: Namespace) -> None:
    construction = make_construction(args.kind, args.m, args.n, args.s, args.eps)
    pi = construction.generate(args.seed)
    ext = "osed" if args.kind == "gaussian" else "ose"
    out = default_out(args, f"{args.kind}-m_{args.m}-n_{args.n}-seed_{args.seed}.{ext}")
    if isinstance(pi, SketchMatrix):
        write_sketch(out, pi, provenance(args))
    else:
        write_dense(out, pi, provenance(args))
    logger.info("Wrote %s", out)


def check(args: Namespace) -> None:
    if args.sketch is not None:
        pi = load_sketch(args.sketch)
        m, n = pi.rows, pi.cols
    else:
        if args.m is None or args.n is None:
            raise CliUsageError("Either --sketch or both --m and --n are required.")
        pi = make_construction(args.kind, args.m, args.n, args.s, args.eps)
        m, n = pi.m, pi.n
    dist = get_distribution(args.family, n, args.d, eps=args.eps, r=args.r)
    estimate = estimate_failure_prob(
        pi, dist, args.eps, args.trials, args.seed, n_jobs=args.threads, show_progress=args.verbose,
    )
    record = failure_record(
        estimate, m=m, n=n, d=args.d, r_or_family=dist.r_or_family, eps=args.eps, seed=args.seed,
    )
    out = default_out(args, f"{dist.r_or_family}-m_{m}-n_{n}-d_{args.d}-eps_{args.eps}-seed_{args.seed}.csv")
    write_csv(out, pd.DataFrame([record]), provenance(args))
    logger.info("p_hat = %.4f, written to %s", estimate.p_hat, out)


def adversary(args: Namespace) -> None:
    pi = sketch_from_args(args)
    r = 1 if args.ell is None else 2 ** args.ell_prime
    inst, _ = DBeta(pi.cols, args.d, r).sample(derive_seed(args.seed, 1))
    if args.ell is None:
        pairs, trace = find_colliding_pairs(pi, inst, args.eps, args.eta, derive_seed(args.seed, 2))
    else:
        pairs, trace = find_colliding_pairs_general(
            pi, inst, args.eps, args.ell, args.ell_prime, args.eta,
            seed=derive_seed(args.seed, 2), abundance=args.abundance,
        )

    out = default_out(args, f"certificate-d_{args.d}-eps_{args.eps}-seed_{args.seed}.txt")
    header = "".join(f"# {c}\n" for c in provenance(args)) + f"pairs: {len(pairs)}\n"
    if pairs:
        # Certify the emitted pair with the largest inner product.
        col_p, col_q = max(pairs, key=lambda pair: column_inner_product(pi, *pair))
        cert = build_witness(pi, inst, col_p, col_q, trace.theta)
        anticoncentration_prob(pi, inst, cert, args.eps, seed=derive_seed(args.seed, 3))
        atomic_write(out, header + certificate_to_text(cert, len(trace)))
    else:
        logger.warning("No colliding pair found; writing an empty certificate record")
        atomic_write(out, header + f"trace_length: {len(trace)}\n")

    if args.trace is not None:
        atomic_write(args.trace, "\n".join(trace.to_lines()) + "\n")


def sweep(args: Namespace) -> None:
    cfg = SweepConfig(
        d_list=tuple(args.d),
        eps=args.eps[0],
        delta=args.delta[0],
        s=args.s,
        m_grid=tuple(args.m or ()),
        m_lo=args.m_lo,
        m_hi=args.m_hi,
        factor=args.factor,
        trials_per_point=args.trials,
        distribution=args.family,
        r=args.r,
        kind=args.kind,
        seed=args.seed,
        eps_list=tuple(args.eps),
        delta_list=tuple(args.delta),
        n=args.n,
        force_large_n=args.force_large_n,
        n_jobs=args.threads,
    )
    result = threshold_sweep(cfg, show_progress=args.verbose)
    out = default_out(args, f"{args.kind}-{args.family}-seed_{args.seed}.csv")
    write_csv(out, result.rows, provenance(args))
    write_json(out + ".json", result.summary(cfg))
    logger.info("Sweep over %d points written to %s", len(result.rows), out)


def audit(args: Namespace) -> None:
    pi = sketch_from_args(args)
    report = heavy_entry_audit(pi, args.eps)
    out = default_out(args, f"audit-eps_{args.eps}-seed_{args.seed}.csv")
    write_csv(out, report.table, provenance(args))

    summary = {"heavy_entries": report.summary(), "config": provenance(args)}
    if args.d is not None:
        seeds = [derive_seed(args.seed, i) for i in range(args.trials)]
        stats = collision_pair_stats(
            pi, seeds, args.eps, args.d, args.ell, args.ell_prime, args.eta,
            abundance=args.abundance, n_jobs=args.threads,
        )
        summary["collisions"] = stats.summary()
    write_json(out + ".json", summary)


def demo(args: Namespace) -> None:
    estimate = demo_hadamard_tightness(
        args.eps, args.d, args.delta, args.trials, args.seed, c=args.c, n=args.n, n_jobs=args.threads,
    )
    m = args.c * args.d ** 2
    n = 4 * m if args.n is None else args.n
    record = failure_record(estimate, m=m, n=n, d=args.d, r_or_family="1", eps=args.eps, seed=args.seed)
    record["delta"] = args.delta
    record["duplicate_prob"] = hadamard_duplicate_prob(m, n, args.d)
    out = default_out(args, f"hadamard-eps_{args.eps}-d_{args.d}-c_{args.c}-seed_{args.seed}.csv")
    write_csv(out, pd.DataFrame([record]), provenance(args))


def seed_arg(text: str) -> int:
    return check_seed(int(text))


def add_common(p: ArgumentParser) -> None:
    p.add_argument("--seed", type=seed_arg, default=DEFAULT_SEED)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--verbose", action="store_true")


def add_sketch(p: ArgumentParser, required: bool = False) -> None:
    p.add_argument("--kind", type=str, choices=KINDS, default="countsketch")
    p.add_argument("--m", type=int, required=required)
    p.add_argument("--n", type=int, required=required)
    p.add_argument("--s", type=int, default=1)


def build_parser() -> CliParser:
    parser = CliParser(prog="python -m src.cli")
    subparsers = parser.add_subparsers(dest="subcommand", required=True, parser_class=CliParser)

    p = subparsers.add_parser("gen")
    add_sketch(p, required=True)
    p.add_argument("--eps", type=parse_real, default=None)
    add_common(p)
    p.set_defaults(handler=gen)

    p = subparsers.add_parser("check")
    add_sketch(p)
    p.add_argument("--sketch", type=str, default=None)
    p.add_argument("--family", type=str, choices=("dbeta", *FAMILIES), default="d_beta")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--eps", type=parse_real, required=True)
    p.add_argument("--trials", type=int, default=1000)
    add_common(p)
    p.set_defaults(handler=check)

    p = subparsers.add_parser("adversary")
    add_sketch(p)
    p.add_argument("--sketch", type=str, default=None)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--eps", type=parse_real, required=True)
    p.add_argument("--ell", type=int, default=None)
    p.add_argument("--ell-prime", type=int, default=0)
    p.add_argument("--eta", type=parse_real, default=3.0)
    p.add_argument("--abundance", type=parse_real, default=None)
    p.add_argument("--trace", type=str, default=None)
    add_common(p)
    p.set_defaults(handler=adversary)

    p = subparsers.add_parser("sweep")
    p.add_argument("--kind", type=str, choices=KINDS, default="countsketch")
    p.add_argument("--s", type=int, default=1)
    p.add_argument("--d", type=int, nargs="+", required=True)
    p.add_argument("--eps", type=parse_real, nargs="+", required=True)
    p.add_argument("--delta", type=parse_real, nargs="+", required=True)
    p.add_argument("--m", type=int, nargs="+", default=None)
    p.add_argument("--m-lo", type=int, default=2)
    p.add_argument("--m-hi", type=int, default=1024)
    p.add_argument("--factor", type=parse_real, default=1.3)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--family", type=str, choices=("dbeta", *FAMILIES), default="d_beta")
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--force-large-n", action="store_true")
    add_common(p)
    p.set_defaults(handler=sweep)

    p = subparsers.add_parser("audit")
    add_sketch(p)
    p.add_argument("--sketch", type=str, default=None)
    p.add_argument("--eps", type=parse_real, required=True)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--ell", type=int, default=None)
    p.add_argument("--ell-prime", type=int, default=0)
    p.add_argument("--eta", type=parse_real, default=3.0)
    p.add_argument("--abundance", type=parse_real, default=None)
    p.add_argument("--trials", type=int, default=1000)
    add_common(p)
    p.set_defaults(handler=audit)

    p = subparsers.add_parser("demo")
    p.add_argument("--eps", type=parse_real, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--delta", type=parse_real, required=True)
    p.add_argument("--c", type=int, default=4)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--trials", type=int, default=1000)
    add_common(p)
    p.set_defaults(handler=demo)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Parse, run one subcommand and map failures to exit statuses."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        if args.threads < 1 and args.threads != -1:
            raise CliUsageError(f"--threads must be positive or -1, got {args.threads}.")
        if hasattr(args, "trials") and args.trials < 1:
            raise CliUsageError(f"--trials must be positive, got {args.trials}.")
        args.handler(args)
    except InfeasibleInstanceError as err:
        print(f"{parser.prog}: infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, IndexError, OSError) as err:
        print(f"{parser.prog}: error: {err}", file=sys.stderr)
        return EXIT_ERROR

    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
