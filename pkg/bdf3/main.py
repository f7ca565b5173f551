"""bdf3 — command-line front end for the experiments.

Each subcommand writes CSV (or Markdown for ``converge --format md``) on
stdout; logging goes to stderr.  Exit status: 0 on success, 1 when a
``--check`` acceptance test fails or a numerical step breaks down, 2 on
usage or configuration errors.

Ratio flags accept a float or the tokens ``Re``, ``2Re``, ``4Re`` … which
resolve against the computed R_e.
"""

import argparse
import logging
import re
import sys

from bdf3 import config, experiments
from bdf3.errors import EXIT_OK, Bdf3Error, CheckFailure
from bdf3.kernels import re_equation, compute_gamma_bar, compute_Re, r_e
from bdf3.positivity import scan_lemma_positivity
from bdf3.quad_forms import eigscan
from bdf3.time_mesh import dump_csv

logger = logging.getLogger("bdf3")

_RE_TOKEN = re.compile(r"^\s*(\d+(?:\.\d*)?|\.\d+)?\s*Re\s*$")


# ── argument types ───────────────────────────────────────────────────────────


def parse_ratio(token: str) -> float:
    match = _RE_TOKEN.match(token)
    if match:
        factor = float(match.group(1)) if match.group(1) else 1.0
        return factor * r_e()
    try:
        value = float(token)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{token!r} is neither a number nor a kRe token") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"ratio must be positive, got {token}")
    return value


def parse_levels(text: str) -> list[int]:
    try:
        levels = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated integers, got {text!r}") from None
    if not levels:
        raise argparse.ArgumentTypeError("at least one level is required")
    return levels


def _fail_if(problems: list[str], enabled: bool) -> None:
    if enabled and problems:
        for p in problems:
            logger.error("check failed: %s", p)
        raise CheckFailure("; ".join(problems))


# ── subcommands ──────────────────────────────────────────────────────────────


def cmd_converge(args, settings) -> str:
    starter = "sdirk3" if args.starter in ("rk3", "sdirk3") else args.starter
    rows = experiments.converge_table(
        args.mesh,
        starter,
        levels=args.levels,
        mu=args.mu,
        seed=args.seed,
        grid=args.grid,
        horizon=settings.horizon,
        epsilon=args.eps,
        workers=args.workers,
    )
    _fail_if(experiments.convergence_problems(rows, args.mesh), args.check)
    return experiments.emit(rows, args.format)


def cmd_eigscan(args, settings) -> str:
    result = eigscan(args.re, args.n, args.runs, args.seed, solver=args.solver, workers=args.workers)
    problems = []
    if args.re < r_e() and not result.min_over_runs > 0:
        problems.append(f"min eigenvalue {result.min_over_runs:.3e} <= 0 below R_e")
    _fail_if(problems, args.check)
    return experiments.eigscan_csv(result)


def cmd_lemmas(args, settings) -> str:
    report = scan_lemma_positivity(args.grid)
    problems = [f"{c.check}: {c.violations} violations" for c in report.checks if c.violations]
    _fail_if(problems, args.check)
    return experiments.lemmas_csv(report)


def cmd_energy(args, settings) -> str:
    mesh = experiments.build_mesh(args.mesh, settings.horizon, args.n, args.mu, args.seed)
    study = experiments.energy_study(mesh, args.eps, args.kappa, args.grid, args.seed)
    bad = study.trace.violations()
    _fail_if([f"energy increased at {bad} steps"] if bad else [], args.check)
    return experiments.energy_csv(study)


def cmd_doc_stats(args, settings) -> str:
    mesh = experiments.build_mesh(args.mesh, settings.horizon, args.n, args.mu, args.seed)
    stats = experiments.doc_stats(mesh)
    logger.info("K3_hat=%.6f, max orthogonality residual %.3e", stats.k3_hat, stats.max_residual)
    problems = []
    if not stats.max_residual < 1e-11:
        problems.append(f"orthogonality residual {stats.max_residual:.3e} >= 1e-11")
    _fail_if(problems, args.check)
    return experiments.doc_stats_csv(stats)


def cmd_trunc(args, settings) -> str:
    rows = experiments.trunc_study(args.fn, args.levels)
    problems = []
    if args.fn == "cubic":
        worst = max(abs(r.zeta) for r in rows)
        if not worst < 1e-12:
            problems.append(f"cubic truncation error {worst:.3e} >= 1e-12")
    elif len(rows) > 1 and abs(rows[-1].slope - 3.0) > 0.05:
        problems.append(f"halving slope {rows[-1].slope:.3f} outside 3 ± 0.05")
    _fail_if(problems, args.check)
    return experiments.trunc_csv(rows)


def cmd_re_root(args, settings) -> str:
    root = compute_Re(args.tol)
    residual = abs(re_equation(root))
    gamma, R_bar = compute_gamma_bar(args.tol)
    _fail_if([f"residual {residual:.3e} >= 1e-10"] if not residual < 1e-10 else [], args.check)
    lines = ["quantity,value", f"Re,{root!r}", f"residual,{residual!r}"]
    lines += [f"gamma_bar,{gamma!r}", f"R_bar,{R_bar!r}"]
    return "\n".join(lines) + "\n"


def cmd_mesh(args, settings) -> str:
    mesh = experiments.build_mesh(args.mesh, settings.horizon, args.n, args.mu, args.seed)
    return dump_csv(mesh)


# ── parser ───────────────────────────────────────────────────────────────────


def build_parser(settings: config.Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bdf3", description="Variable-step BDF3 experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        p.add_argument("--check", action="store_true", help="exit 1 if the acceptance test fails")
        return p

    def mesh_flags(p, default_kind: str, default_n: int) -> None:
        p.add_argument("--mesh", choices=experiments.MESH_KINDS, default=default_kind)
        p.add_argument("--n", type=int, default=default_n, help="number of steps N")
        p.add_argument("--mu", type=parse_ratio, default=None, help="periodic ratio μ")
        p.add_argument("--seed", type=int, default=settings.seed)

    p = add("converge", cmd_converge, "convergence table on periodic or random meshes")
    p.add_argument("--mesh", choices=experiments.MESH_KINDS, default="periodic")
    p.add_argument("--mu", type=parse_ratio, default=None)
    p.add_argument("--starter", choices=("rk3", "sdirk3", "bdf2"), default="rk3")
    p.add_argument("--levels", type=parse_levels, default=list(experiments.DEFAULT_LEVELS))
    p.add_argument("--seed", type=int, default=settings.seed)
    p.add_argument("--grid", type=int, default=settings.grid)
    p.add_argument("--eps", type=float, default=settings.epsilon)
    p.add_argument("--format", choices=("csv", "md"), default="csv")
    p.add_argument("--workers", type=int, default=1)

    p = add("eigscan", cmd_eigscan, "minimum eigenvalue of the step-rescaled matrix")
    p.add_argument("--re", type=parse_ratio, default=parse_ratio("1.5"), help="ratio limit")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--seed", type=int, default=settings.seed)
    p.add_argument("--solver", choices=("banded", "jacobi"), default="banded")
    p.add_argument("--workers", type=int, default=1)

    p = add("lemmas", cmd_lemmas, "grid scans of the coefficient positivity lemmas")
    p.add_argument("--grid", type=int, default=64, help="points per axis")

    p = add("energy", cmd_energy, "modified discrete energy trace with f = 0")
    mesh_flags(p, "admissible", 100)
    p.add_argument("--kappa", type=float, default=-1.0)
    p.add_argument("--eps", type=float, default=settings.epsilon)
    p.add_argument("--grid", type=int, default=settings.grid)

    p = add("doc-stats", cmd_doc_stats, "DOC kernel absolute sums and leading kernels")
    mesh_flags(p, "uniform", 200)

    p = add("trunc", cmd_trunc, "truncation error under step halving")
    p.add_argument("--fn", choices=sorted(experiments.TEST_FUNCTIONS), default="sin")
    p.add_argument("--levels", type=parse_levels, default=[32, 64, 128, 256])

    p = add("re-root", cmd_re_root, "the step-ratio limit R_e and the optimal γ̄")
    p.add_argument("--tol", type=float, default=1e-12)

    p = add("mesh", cmd_mesh, "dump a time mesh as CSV")
    mesh_flags(p, "uniform", 10)

    return parser


def main(argv: list[str] | None = None) -> int:
    settings = config.load()
    logging.basicConfig(
        level=settings.log_level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser(settings).parse_args(argv)
    try:
        sys.stdout.write(args.handler(args, settings))
    except Bdf3Error as exc:
        logger.error("%s: %s", type(exc).__name__, exc.detail)
        return exc.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
