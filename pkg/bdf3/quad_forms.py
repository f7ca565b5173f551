"""Quadratic forms of the BDF3 and DOC kernels and the step-rescaled matrix.

The step-rescaled matrix B̃₃ = Λ⁻¹(B_L + B_Lᵀ)Λ⁻¹ is symmetric pentadiagonal
and depends only on the step ratios, so the eigenvalue scan draws ratios
directly.  Its rows are indexed k = 3 … n:

    diagonal           2·d0(rₖ, rₖ₋₁)
    first sub-diagonal √rₖ·d1(rₖ, rₖ₋₁)
    second sub-diag.   √(rₖrₖ₋₁)·d2(rₖ, rₖ₋₁)
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvals_banded

from bdf3.doc_kernels import DocKernelTable
from bdf3.errors import EigenError, KernelError
from bdf3.kernels import d_coeffs
from bdf3.time_mesh import TimeMesh, generator, open_uniform

logger = logging.getLogger(__name__)

MAX_SWEEPS = 100
JACOBI_TOL = 1e-14
# entries this far below ‖A‖ are zeroed instead of rotated
NEGLIGIBLE = 1e-3 * np.finfo(float).eps
FORM_FLOOR = 1.0 / 50.0


# ── the banded matrix ────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class SymmetricBandMatrix:
    diag: np.ndarray  # length m
    sub1: np.ndarray  # length m-1, entry i couples rows i+1 and i
    sub2: np.ndarray  # length m-2

    @property
    def order(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub1, -1) + np.diag(self.sub1, 1) + np.diag(
            self.sub2, -2
        ) + np.diag(self.sub2, 2)

    def lower_bands(self) -> np.ndarray:
        """LAPACK lower band storage, shape (3, m)."""
        m = self.order
        bands = np.zeros((3, m))
        bands[0] = self.diag
        bands[1, : m - 1] = self.sub1
        bands[2, : max(m - 2, 0)] = self.sub2
        return bands


def rescaled_matrix(ratios) -> SymmetricBandMatrix:
    """B̃₃ of order n − 2 from the ratios r₂ … rₙ."""
    r = np.asarray(ratios, dtype=float)
    if len(r) < 3:
        raise KernelError(f"need ratios r_2..r_n with n >= 4, got {len(r)} values")
    if np.any(r <= 0):
        raise KernelError("step ratios must be positive")
    rk, rk1 = r[1:], r[:-1]  # rows k = 3..n
    d0, d1, d2 = d_coeffs(rk, rk1)
    return SymmetricBandMatrix(
        diag=2.0 * d0,
        sub1=(np.sqrt(rk) * d1)[1:],
        sub2=(np.sqrt(rk * rk1) * d2)[2:],
    )


# ── eigen-solvers ────────────────────────────────────────────────────────────


def _off_norm(a: np.ndarray) -> float:
    """Frobenius norm of the off-diagonal part, summed entry by entry."""
    return math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))


def jacobi_eigenvalues(matrix: np.ndarray, tol: float = JACOBI_TOL) -> np.ndarray:
    """All eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm drops below tol·‖A‖_F.

    Raises:
        EigenError: no convergence within MAX_SWEEPS sweeps.
    """
    a = np.array(matrix, dtype=float)
    m = a.shape[0]
    scale = float(np.linalg.norm(a))
    if m == 1 or scale == 0.0:
        return np.diag(a).copy()

    for sweep in range(MAX_SWEEPS):
        if _off_norm(a) < tol * scale:
            logger.debug("jacobi converged after %d sweeps (m=%d)", sweep, m)
            return np.diag(a).copy()
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                if abs(apq) <= NEGLIGIBLE * scale:
                    a[p, q] = a[q, p] = 0.0
                    continue
                app, aqq = a[p, p], a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                a[p, :] = a[:, p]
                a[q, :] = a[:, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = a[q, p] = 0.0

    if _off_norm(a) < tol * scale:
        return np.diag(a).copy()
    raise EigenError(f"Jacobi did not converge in {MAX_SWEEPS} sweeps (m={m})")


def min_eigenvalue(matrix: SymmetricBandMatrix, tol: float = JACOBI_TOL) -> float:
    if matrix.order < 1:
        raise KernelError("matrix order must be at least 1")
    return float(np.min(jacobi_eigenvalues(matrix.dense(), tol)))


def banded_min_eigenvalue(matrix: SymmetricBandMatrix) -> float:
    return float(eigvals_banded(matrix.lower_bands(), lower=True, select="i", select_range=(0, 0))[0])


# ── the random-ratio scan ────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class EigscanResult:
    re_limit: float
    n: int
    min_over_runs: float
    per_run: np.ndarray


def _one_run(re_limit: float, n: int, seed: int, run: int, solver: str) -> float:
    ratios = open_uniform(generator(seed, run), n - 1, 0.0, re_limit)
    matrix = rescaled_matrix(ratios)
    if solver == "jacobi":
        return min_eigenvalue(matrix)
    return banded_min_eigenvalue(matrix)


def eigscan(
    re_limit: float,
    n: int,
    runs: int,
    seed: int,
    solver: str = "banded",
    workers: int = 1,
) -> EigscanResult:
    """Minimum eigenvalue of B̃₃ over *runs* independent ratio draws on (0, re_limit).

    Run ``i`` uses the stream ``(seed, i)``, so results do not depend on
    the number of workers.
    """
    if runs < 1:
        raise KernelError(f"runs must be >= 1, got {runs}")
    if n < 4:
        raise KernelError(f"n must be >= 4, got {n}")
    if not re_limit > 0:
        raise KernelError(f"ratio limit must be positive, got {re_limit}")
    if solver not in ("banded", "jacobi"):
        raise KernelError(f"unknown eigen-solver {solver!r}")

    def job(run: int) -> float:
        return _one_run(re_limit, n, seed, run, solver)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_run = np.array(list(pool.map(job, range(runs))))
    else:
        per_run = np.array([job(run) for run in range(runs)])

    result = EigscanResult(re_limit, n, float(per_run.min()), per_run)
    logger.info("eigscan R<%.4g n=%d runs=%d: min %.4e", re_limit, n, runs, result.min_over_runs)
    return result


def eigscan_table(limits, sizes, runs: int, seed: int, workers: int = 1) -> list[EigscanResult]:
    """The full scan grid, one cell per (limit, n), limits outermost."""
    return [
        eigscan(limit, n, runs, seed, workers=workers) for limit in limits for n in sizes
    ]


# ── quadratic forms ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class QuadraticForm:
    value: float
    lower_bound: float


def _xi_range(mesh: TimeMesh, xi) -> tuple[np.ndarray, int]:
    x = np.asarray(xi, dtype=float)
    n = len(x) + 2
    if not 3 <= n <= mesh.N:
        raise KernelError(f"xi must hold ξ_3..ξ_n with n <= N={mesh.N}, got {len(x)} values")
    return x, n


def bdf3_quadratic_form(mesh: TimeMesh, xi) -> QuadraticForm:
    """2Σₖ ξₖ Σⱼ τₖ d⁽ᵏ⁾ₖ₋ⱼ ξⱼ for ξ₃ … ξₙ, with the floor (1/50)Σ τₖξₖ²."""
    x, n = _xi_range(mesh, xi)
    k = np.arange(3, n + 1)
    r = mesh.ratios
    d0, d1, d2 = d_coeffs(r[k], r[k - 1])
    padded = np.concatenate(([0.0, 0.0], x))  # ξ₁ = ξ₂ = 0
    tau = mesh.steps[k]
    inner = d0 * padded[2:] + d1 * padded[1:-1] + d2 * padded[:-2]
    return QuadraticForm(
        value=float(2.0 * np.sum(x * tau * inner)),
        lower_bound=float(FORM_FLOOR * np.sum(tau * x * x)),
    )


def doc_convolve(table: DocKernelTable, xi) -> np.ndarray:
    """ηₖ = Σⱼ θ⁽ᵏ⁾ₖ₋ⱼ ξⱼ for k = 3 … n."""
    x = np.asarray(xi, dtype=float)
    n = len(x) + 2
    if n > table.n_max:
        raise KernelError(f"xi reaches n={n} beyond the table (n_max={table.n_max})")
    return table.theta[3 : n + 1, 3 : n + 1] @ x


def doc_quadratic_form(table: DocKernelTable, xi) -> float:
    """2Σₖ ξₖ Σⱼ τₖ θ⁽ᵏ⁾ₖ₋ⱼ ξⱼ; positive on admissible meshes."""
    x = np.asarray(xi, dtype=float)
    eta = doc_convolve(table, x)
    tau = table.mesh.steps[3 : len(x) + 3]
    return float(2.0 * np.sum(x * tau * eta))
