"""Table builders behind the CLI: convergence studies, scans and reports.

Every builder returns plain dataclass rows; ``*_csv`` helpers render them
with full precision (``repr`` of each float) so the CSV round-trips
bitwise, and ``emit`` additionally renders convergence tables as Markdown
with three significant digits.

Random convergence tables give level ``i`` (0-based, ascending N) the mesh
seed ``seed + i``.
"""

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from bdf3 import spectral
from bdf3.doc_kernels import (
    abs_sums,
    build_doc_table,
    mutual_orthogonality_residual,
    orthogonality_residual,
)
from bdf3.errors import Bdf3Error, MeshError
from bdf3.heat_solver import EnergyTrace, SolverConfig, run, truncation_error_direct
from bdf3.kernels import r_e
from bdf3.positivity import LemmaReport
from bdf3.quad_forms import EigscanResult
from bdf3.time_mesh import (
    TimeMesh,
    generator,
    periodic_ratio_mesh,
    random_mesh,
    random_ratio_mesh,
    ratio_stats,
    uniform_mesh,
)

logger = logging.getLogger(__name__)

MESH_KINDS = ("uniform", "periodic", "random", "admissible")
DEFAULT_LEVELS = (80, 160, 320, 640, 1280)
ORDER_BAND = (2.85, 3.15)
SLOPE_BAND = (2.8, 3.2)

CONVERGENCE_HEADER = ["N", "tau", "eN", "order", "rmax", "N1"]


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _full(x: float | None) -> str:
    return "" if x is None else repr(float(x))


# ── meshes ───────────────────────────────────────────────────────────────────


def build_mesh(kind: str, T: float, N: int, mu: float | None = None, seed: int = 0) -> TimeMesh:
    """``admissible`` draws ratios uniformly on (1/R_e, R_e)."""
    if kind == "uniform":
        return uniform_mesh(T, N)
    if kind == "periodic":
        if mu is None:
            raise MeshError("periodic mesh needs --mu")
        return periodic_ratio_mesh(T, N, mu)
    if kind == "random":
        return random_mesh(T, N, seed)
    if kind == "admissible":
        Re = r_e()
        return random_ratio_mesh(T, N, ratio_max=Re, seed=seed, ratio_min=1.0 / Re)
    raise MeshError(f"unknown mesh kind {kind!r}; expected one of {MESH_KINDS}")


# ── convergence tables ───────────────────────────────────────────────────────


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    tau_N: float
    e_N: float
    order: float | None
    r_max: float
    N1: int


def order_of(e_coarse: float, e_fine: float, tau_coarse: float, tau_fine: float) -> float:
    """log(e_coarse/e_fine) / log(tau_coarse/tau_fine)."""
    if min(e_coarse, e_fine, tau_coarse, tau_fine) <= 0:
        raise Bdf3Error("errors and step sizes must be positive")
    if not tau_coarse > tau_fine:
        raise Bdf3Error(f"need tau_coarse > tau_fine, got {tau_coarse} <= {tau_fine}")
    return math.log(e_coarse / e_fine) / math.log(tau_coarse / tau_fine)


def converge_table(
    mesh_kind: str,
    starter: str,
    levels=DEFAULT_LEVELS,
    mu: float | None = None,
    seed: int = 0,
    grid: int = 32,
    horizon: float = 1.0,
    epsilon: float = 0.1,
    workers: int = 1,
) -> list[ConvergenceRow]:
    """One manufactured-solution run per level (κ = 0), orders between neighbours."""
    levels = list(levels)
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise Bdf3Error(f"levels must be strictly ascending, got {levels}")
    if any(N < 8 for N in levels):
        raise Bdf3Error("every level needs N >= 8")
    Re = r_e()

    def one(i_N: tuple[int, int]) -> tuple[float, float, float, int]:
        i, N = i_N
        mesh = build_mesh(mesh_kind, horizon, N, mu, seed + i)
        result = run(SolverConfig(mesh, epsilon, 0.0, starter, grid))
        stats = ratio_stats(mesh, Re)
        logger.info("N=%d tau=%.3e e(N)=%.3e r_max=%.3g", N, mesh.max_step, result.e_N, stats.r_max)
        return mesh.max_step, result.e_N, stats.r_max, stats.count_ge

    jobs = list(enumerate(levels))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, jobs))
    else:
        outcomes = [one(job) for job in jobs]

    rows: list[ConvergenceRow] = []
    for N, (tau, err, r_max, n1) in zip(levels, outcomes):
        order = None
        if rows:
            prev = rows[-1]
            order = order_of(prev.e_N, err, prev.tau_N, tau)
        rows.append(ConvergenceRow(N, tau, err, order, r_max, n1))
    return rows


def regression_slope(rows: list[ConvergenceRow]) -> float:
    """Least-squares slope of log e(N) against log τ(N)."""
    if len(rows) < 2:
        raise Bdf3Error("a slope needs at least two rows")
    tau = np.log([r.tau_N for r in rows])
    err = np.log([r.e_N for r in rows])
    return float(np.polyfit(tau, err, 1)[0])


def convergence_problems(rows: list[ConvergenceRow], mesh_kind: str) -> list[str]:
    """Acceptance: neighbour orders for N ≥ 160 on regular meshes, the slope on random ones."""
    problems: list[str] = []
    if mesh_kind in ("random", "admissible"):
        slope = regression_slope(rows)
        if not SLOPE_BAND[0] <= slope <= SLOPE_BAND[1]:
            problems.append(f"regression slope {slope:.3f} outside {SLOPE_BAND}")
        return problems
    for row in rows:
        if row.order is None or row.N < 160:
            continue
        if not ORDER_BAND[0] <= row.order <= ORDER_BAND[1]:
            problems.append(f"N={row.N}: order {row.order:.3f} outside {ORDER_BAND}")
    return problems


def emit(rows: list[ConvergenceRow], fmt: str = "csv") -> str:
    if not rows:
        raise Bdf3Error("nothing to emit")
    if fmt == "csv":
        return _csv(
            CONVERGENCE_HEADER,
            ([r.N, _full(r.tau_N), _full(r.e_N), _full(r.order), _full(r.r_max), r.N1] for r in rows),
        )
    if fmt in ("md", "markdown"):
        lines = [
            "| N | τ(N) | e(N) | Order | r_max | N₁ |",
            "|---:|---:|---:|---:|---:|---:|",
        ]
        for r in rows:
            order = "–" if r.order is None else f"{r.order:.2f}"
            lines.append(
                f"| {r.N} | {r.tau_N:.2e} | {r.e_N:.2e} | {order} | {r.r_max:.2f} | {r.N1} |"
            )
        return "\n".join(lines) + "\n"
    raise Bdf3Error(f"unknown format {fmt!r}; expected csv or md")


def parse_csv(text: str) -> list[ConvergenceRow]:
    """Inverse of ``emit(rows, "csv")``."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CONVERGENCE_HEADER:
        raise Bdf3Error(f"unexpected header {reader.fieldnames}")
    return [
        ConvergenceRow(
            N=int(rec["N"]),
            tau_N=float(rec["tau"]),
            e_N=float(rec["eN"]),
            order=float(rec["order"]) if rec["order"] else None,
            r_max=float(rec["rmax"]),
            N1=int(rec["N1"]),
        )
        for rec in reader
    ]


# ── eigenvalue scan, lemma scans ─────────────────────────────────────────────


def eigscan_csv(result: EigscanResult) -> str:
    body = _csv(["run", "min_eig"], ((i, _full(v)) for i, v in enumerate(result.per_run)))
    return body + f"# min over {len(result.per_run)} runs (R<{result.re_limit}, n={result.n}): {result.min_over_runs!r}\n"


def lemmas_csv(report: LemmaReport) -> str:
    return _csv(
        ["check", "grid", "min_value", "argmin_x", "argmin_y", "argmin_z", "violations"],
        (
            [c.check, c.grid, _full(c.min_value), *(_full(a) for a in c.argmin), c.violations]
            for c in report.checks
        ),
    )


# ── energy traces ────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class EnergyStudy:
    mesh: TimeMesh
    trace: EnergyTrace


def energy_study(
    mesh: TimeMesh, epsilon: float, kappa: float, grid: int, seed: int
) -> EnergyStudy:
    """f ≡ 0 from a smooth random u⁰ drawn on stream (seed, 1)."""
    fourier = spectral.FourierGrid(grid)
    u0 = spectral.smooth_random_field(fourier, generator(seed, 1))
    result = run(SolverConfig(mesh, epsilon, kappa, "sdirk3", grid), initial=u0, record_energy=True)
    return EnergyStudy(mesh, result.energy)


def energy_csv(study: EnergyStudy) -> str:
    terms = study.trace.terms
    rows = []
    prev = None
    for t in terms:
        total = t.total
        delta = "" if prev is None else _full(total - prev)
        rows.append([t.n, _full(total), _full(t.grad), _full(t.reaction), _full(t.g_term), delta])
        prev = total
    return _csv(["n", "E", "grad_term", "reaction_term", "G_term", "delta_E"], rows)


# ── DOC statistics ───────────────────────────────────────────────────────────


@dataclass(frozen=True)
class DocStats:
    levels: np.ndarray
    row_abs_sum: np.ndarray
    theta_0: np.ndarray
    k3_hat: float
    max_residual: float


def doc_stats(mesh: TimeMesh) -> DocStats:
    table = build_doc_table(mesh)
    sums = abs_sums(table)
    levels = np.arange(3, table.n_max + 1)
    residual = max(
        max(orthogonality_residual(table, n), mutual_orthogonality_residual(table, n))
        for n in levels
    )
    return DocStats(levels, sums.row_sums[3:], table.leading(), sums.k3_hat, residual)


def doc_stats_csv(stats: DocStats) -> str:
    return _csv(
        ["n", "row_abs_sum", "theta_0"],
        ([int(n), _full(s), _full(t)] for n, s, t in zip(stats.levels, stats.row_abs_sum, stats.theta_0)),
    )


# ── truncation-error study ───────────────────────────────────────────────────


TEST_FUNCTIONS = {
    "cubic": (lambda t: t**3, lambda t: 3.0 * t * t),
    "quartic": (lambda t: t**4, lambda t: 4.0 * t**3),
    "sin": (np.sin, math.cos),
}


@dataclass(frozen=True)
class TruncRow:
    tau: float
    zeta: float
    slope: float | None


def trunc_study(fn: str, levels) -> list[TruncRow]:
    """ζᴺ at t = 1 on uniform meshes with N = each level."""
    if fn not in TEST_FUNCTIONS:
        raise Bdf3Error(f"unknown test function {fn!r}; expected one of {sorted(TEST_FUNCTIONS)}")
    v, dv = TEST_FUNCTIONS[fn]
    rows: list[TruncRow] = []
    for N in levels:
        mesh = uniform_mesh(1.0, N)
        zeta = truncation_error_direct(v, dv, mesh, N)
        slope = None
        if rows and fn != "cubic":
            prev = rows[-1]
            slope = math.log(abs(prev.zeta) / abs(zeta)) / math.log(prev.tau / mesh.max_step)
        rows.append(TruncRow(mesh.max_step, zeta, slope))
    return rows


def trunc_csv(rows: list[TruncRow]) -> str:
    return _csv(["tau", "zeta", "slope"], ([_full(r.tau), _full(r.zeta), _full(r.slope)] for r in rows))
