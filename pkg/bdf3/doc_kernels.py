"""Discrete orthogonal convolution (DOC) kernels of the BDF3 formula.

With the banded kernel matrix D[i, j] = d⁽ⁱ⁾ᵢ₋ⱼ (nonzero for i − j ∈ {0, 1, 2}),
the DOC kernels are its lower-triangular inverse: ``theta[n, j]`` holds
θ⁽ⁿ⁾ₙ₋ⱼ for 3 ≤ j ≤ n ≤ n_max and zero elsewhere.  Both orderings of the
product are identities:

    Σᵢ θ⁽ⁿ⁾ₙ₋ᵢ d⁽ⁱ⁾ᵢ₋ⱼ = δₙⱼ          (orthogonality)
    Σᵢ d⁽ⁿ⁾ₙ₋ᵢ θ⁽ⁱ⁾ᵢ₋ⱼ = δₙⱼ          (mutual orthogonality)

Summing the BDF3 formula against θ leaves ∂vⁿ plus a starting term I₃ⁿ[v]
that only sees ∂v¹ and ∂v².
"""

from dataclasses import dataclass

import numpy as np

from bdf3.errors import KernelError
from bdf3.kernels import Bdf3Coefficients, bdf3_apply, kernel_table
from bdf3.time_mesh import TimeMesh


@dataclass(frozen=True, eq=False)
class DocKernelTable:
    mesh: TimeMesh
    coeffs: Bdf3Coefficients
    theta: np.ndarray  # (n_max+1, n_max+1); theta[n, j] = θ⁽ⁿ⁾ₙ₋ⱼ

    @property
    def n_max(self) -> int:
        return self.theta.shape[0] - 1

    def leading(self) -> np.ndarray:
        """θ⁽ⁿ⁾₀ for n = 3 … n_max."""
        return np.diag(self.theta)[3:].copy()

    def _check(self, n: int) -> None:
        if not 3 <= n <= self.n_max:
            raise KernelError(f"n={n} outside the table range 3..{self.n_max}")


def _padded(values: np.ndarray, length: int) -> np.ndarray:
    out = np.zeros(length)
    out[3 : len(values)] = values[3:]
    return out


def build_doc_table(mesh: TimeMesh, n_max: int | None = None) -> DocKernelTable:
    """Solve θ·D = I column by column, from j = n_max down to 3."""
    n_max = mesh.N if n_max is None else n_max
    if not 3 <= n_max <= mesh.N:
        raise KernelError(f"n_max={n_max} outside 3..{mesh.N}")

    coeffs = kernel_table(mesh)
    size = n_max + 1
    d0 = _padded(coeffs.d0[:size], size + 2)
    d1 = _padded(coeffs.d1[:size], size + 2)
    d2 = _padded(coeffs.d2[:size], size + 2)

    theta = np.zeros((size, size + 2))
    for j in range(n_max, 2, -1):
        theta[:, j] = -(theta[:, j + 1] * d1[j + 1] + theta[:, j + 2] * d2[j + 2]) / d0[j]
        theta[:j, j] = 0.0
        theta[j, j] = 1.0 / d0[j]

    theta = np.ascontiguousarray(theta[:, :size])
    theta.flags.writeable = False
    return DocKernelTable(mesh=mesh, coeffs=coeffs, theta=theta)


# ── identities ───────────────────────────────────────────────────────────────


def _band(table: DocKernelTable, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    c = table.coeffs
    last = min(n + 3, len(c.d0))
    return (
        _padded(c.d0[:last], n + 3),
        _padded(c.d1[:last], n + 3),
        _padded(c.d2[:last], n + 3),
    )


def orthogonality_residual(table: DocKernelTable, n: int) -> float:
    """max_j |Σᵢ θ⁽ⁿ⁾ₙ₋ᵢ d⁽ⁱ⁾ᵢ₋ⱼ − δₙⱼ| over 3 ≤ j ≤ n."""
    table._check(n)
    d0, d1, d2 = _band(table, n)
    row = np.zeros(n + 3)
    row[: n + 1] = table.theta[n, : n + 1]
    j = np.arange(3, n + 1)
    total = row[j] * d0[j] + row[j + 1] * d1[j + 1] + row[j + 2] * d2[j + 2]
    total[-1] -= 1.0
    return float(np.max(np.abs(total)))


def mutual_orthogonality_residual(table: DocKernelTable, n: int) -> float:
    """max_j |Σᵢ d⁽ⁿ⁾ₙ₋ᵢ θ⁽ⁱ⁾ᵢ₋ⱼ − δₙⱼ| over 3 ≤ j ≤ n."""
    table._check(n)
    d0, d1, d2 = table.coeffs.at(n)
    th = table.theta
    total = d0 * th[n, 3 : n + 1] + d1 * th[n - 1, 3 : n + 1] + d2 * th[n - 2, 3 : n + 1]
    total[-1] -= 1.0
    return float(np.max(np.abs(total)))


# ── absolute sums ────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class AbsSums:
    row_sums: np.ndarray  # indexed by n, zero below 3
    col_sums: np.ndarray  # indexed by j, zero below 3
    k3_hat: float


def abs_sums(table: DocKernelTable) -> AbsSums:
    """Row and column absolute sums; their supremum estimates K₃."""
    mag = np.abs(table.theta)
    rows = mag.sum(axis=1)
    cols = mag.sum(axis=0)
    return AbsSums(row_sums=rows, col_sums=cols, k3_hat=float(max(rows.max(), cols.max())))


# ── starting effect and the DOC form ─────────────────────────────────────────


def initial_effect(table: DocKernelTable, dtau_v1: float, dtau_v2: float, n: int) -> float:
    """I₃ⁿ[v] = ∂v²·(θ⁽ⁿ⁾ₙ₋₃d⁽³⁾₁ + θ⁽ⁿ⁾ₙ₋₄d⁽⁴⁾₂) + θ⁽ⁿ⁾ₙ₋₃d⁽³⁾₂·∂v¹.

    The slopes may be scalars, complex Fourier modes or whole fields.
    """
    table._check(n)
    c = table.coeffs
    th = table.theta
    via_v2 = th[n, 3] * c.d1[3]
    if n >= 4:
        via_v2 += th[n, 4] * c.d2[4]
    return dtau_v2 * via_v2 + th[n, 3] * c.d2[3] * dtau_v1


def starting_slopes(mesh: TimeMesh, values) -> tuple[float, float]:
    """(∂v¹, ∂v²) from the first three levels."""
    v = np.asarray(values)
    return (v[1] - v[0]) / mesh.steps[1], (v[2] - v[1]) / mesh.steps[2]


def doc_transform_residual(table: DocKernelTable, values, n: int) -> float:
    """|Σᵢ θ⁽ⁿ⁾ₙ₋ᵢ D₃vⁱ − I₃ⁿ[v] − ∂vⁿ| for values v⁰ … vⁿ."""
    table._check(n)
    mesh = table.mesh
    v = np.asarray(values, dtype=float)
    applied = np.array([bdf3_apply(mesh, v, i) for i in range(3, n + 1)])
    lhs = float(table.theta[n, 3 : n + 1] @ applied)
    dv1, dv2 = starting_slopes(mesh, v)
    dvn = (v[n] - v[n - 1]) / mesh.steps[n]
    return abs(lhs - initial_effect(table, dv1, dv2, n) - dvn)
