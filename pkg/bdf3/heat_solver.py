"""Variable-step BDF3 for u_t = εΔu + κu + f on (0, 2π)² with periodic data.

Space is pseudo-spectral, so every Fourier mode evolves as the scalar ODE
û′ = λ_k û + f̂ with λ_k = −ε|k|² + κ and each implicit solve is a
division.  The two starting values come from either

* ``sdirk3``: the two-stage, third-order SDIRK scheme with diagonal
  γ = (3+√3)/6, second row (1−2γ, γ), nodes (γ, 1−γ), weights (½, ½); or
* ``bdf2``: one Crank–Nicolson step for u¹, then one variable-step BDF2
  step for u².

After that, BDF3 steps

    (d0/τₙ − λ_k)·ûⁿ = f̂ⁿ + d0·ûⁿ⁻¹/τₙ − d1·∂ûⁿ⁻¹ − d2·∂ûⁿ⁻²

advance the solution.  The module also carries the modified discrete
energy, the two truncation-error routes and the DOC-form diagnostics.
"""

import logging
import math
from collections import deque
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from bdf3 import spectral
from bdf3.doc_kernels import DocKernelTable, abs_sums, build_doc_table, initial_effect
from bdf3.errors import GridError, SolverError
from bdf3.kernels import G_functional, bdf2_coeffs, bdf3_apply, kernel_table
from bdf3.spectral import FourierGrid
from bdf3.time_mesh import TimeMesh

logger = logging.getLogger(__name__)

STARTERS = ("sdirk3", "bdf2")

SDIRK_GAMMA = (3.0 + math.sqrt(3.0)) / 6.0
SDIRK_A = np.array([[SDIRK_GAMMA, 0.0], [1.0 - 2.0 * SDIRK_GAMMA, SDIRK_GAMMA]])
SDIRK_C = np.array([SDIRK_GAMMA, 1.0 - SDIRK_GAMMA])
SDIRK_B = np.array([0.5, 0.5])

Field = Callable[[float], np.ndarray]


# ── configuration ────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class SolverConfig:
    mesh: TimeMesh
    epsilon: float
    kappa: float = 0.0
    starter: str = "sdirk3"
    grid: int = 32

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise SolverError(f"diffusivity must be positive, got {self.epsilon}")
        if self.starter not in STARTERS:
            raise SolverError(f"unknown starter {self.starter!r}; expected one of {STARTERS}")
        spectral.check_grid(self.grid)


# ── manufactured solution u = cos t · sin x · sin y ──────────────────────────


def _profile(grid: FourierGrid) -> np.ndarray:
    X, Y = grid.points
    return np.sin(X) * np.sin(Y)


def exact_solution(grid: FourierGrid, t: float) -> np.ndarray:
    return math.cos(t) * _profile(grid)


def forcing(grid: FourierGrid, t: float, epsilon: float, kappa: float = 0.0) -> np.ndarray:
    """f = ∂ₜu − εΔu − κu for the manufactured solution."""
    return (-math.sin(t) + (2.0 * epsilon - kappa) * math.cos(t)) * _profile(grid)


# ── the stepper ──────────────────────────────────────────────────────────────


class HeatSolver:
    """Per-mode BDF3 integrator bound to one configuration and source term."""

    def __init__(self, config: SolverConfig, source: Field | None = None) -> None:
        self.config = config
        self.mesh = config.mesh
        self.grid = FourierGrid(config.grid)
        self.source = source
        self.lam = -config.epsilon * self.grid.k_squared + config.kappa
        self.coeffs = kernel_table(self.mesh)
        if config.kappa > 0:
            self._check_step_restriction()

    def _check_step_restriction(self) -> None:
        k3 = abs_sums(build_doc_table(self.mesh)).k3_hat
        limit = 1.0 / (4.0 * k3 * self.config.kappa)
        if self.mesh.max_step > limit:
            logger.warning(
                "max step %.3e exceeds 1/(4·K3·κ) = %.3e (K3≈%.3f, κ=%g); stability bound void",
                self.mesh.max_step, limit, k3, self.config.kappa,
            )

    # ── helpers ──────────────────────────────────────────────────────────

    def forcing_hat(self, t: float) -> np.ndarray:
        if self.source is None:
            return np.zeros(self.lam.shape, dtype=complex)
        return spectral.enforce_hermitian(spectral.transform(self.source(t)).coeffs)

    def _positive(self, multiplier: np.ndarray, what: str) -> np.ndarray:
        worst = np.unravel_index(np.argmin(multiplier), multiplier.shape)
        if multiplier[worst] <= 0:
            k1, k2 = self.grid.wavenumbers
            raise SolverError(
                f"{what}: nonpositive multiplier {multiplier[worst]:.3e} at mode "
                f"({int(k1[worst])}, {int(k2[worst])}); κ={self.config.kappa} is too large "
                f"for the step"
            )
        return multiplier

    # ── starters ─────────────────────────────────────────────────────────

    def _sdirk3_step(self, u: np.ndarray, t: float, tau: float) -> np.ndarray:
        denom = self._positive(1.0 - tau * SDIRK_GAMMA * self.lam, "sdirk3 stage")
        stages: list[np.ndarray] = []
        for i in range(2):
            base = u + tau * sum(SDIRK_A[i, j] * stages[j] for j in range(i))
            stages.append((self.lam * base + self.forcing_hat(t + SDIRK_C[i] * tau)) / denom)
        return u + tau * (SDIRK_B[0] * stages[0] + SDIRK_B[1] * stages[1])

    def sdirk3_start(self, u0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nodes, tau = self.mesh.nodes, self.mesh.steps
        u1 = self._sdirk3_step(u0, nodes[0], tau[1])
        u2 = self._sdirk3_step(u1, nodes[1], tau[2])
        return u1, u2

    def bdf2_start(self, u0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nodes, tau = self.mesh.nodes, self.mesh.steps
        cn = self._positive(1.0 / tau[1] - 0.5 * self.lam, "trapezoidal step")
        u1 = (
            (1.0 / tau[1] + 0.5 * self.lam) * u0
            + 0.5 * (self.forcing_hat(nodes[0]) + self.forcing_hat(nodes[1]))
        ) / cn

        b0, b1 = bdf2_coeffs(self.mesh.ratios[2])
        mult = self._positive(b0 / tau[2] - self.lam, "bdf2 step")
        rhs = self.forcing_hat(nodes[2]) + b0 * u1 / tau[2] - b1 * (u1 - u0) / tau[1]
        return u1, rhs / mult

    def start(self, u0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.config.starter == "sdirk3":
            return self.sdirk3_start(u0)
        return self.bdf2_start(u0)

    # ── BDF3 ─────────────────────────────────────────────────────────────

    def bdf3_step(self, history: tuple[np.ndarray, np.ndarray, np.ndarray], n: int) -> np.ndarray:
        """ûⁿ from (ûⁿ⁻³, ûⁿ⁻², ûⁿ⁻¹)."""
        d0, d1, d2 = self.coeffs.at(n)
        tau = self.mesh.steps
        u3, u2, u1 = history
        mult = self._positive(d0 / tau[n] - self.lam, f"BDF3 step n={n}")
        rhs = (
            self.forcing_hat(self.mesh.nodes[n])
            + d0 * u1 / tau[n]
            - d1 * (u1 - u2) / tau[n - 1]
            - d2 * (u2 - u3) / tau[n - 2]
        )
        return rhs / mult

    # ── energy ───────────────────────────────────────────────────────────

    def energy(self, levels: Mapping[int, np.ndarray], n: int) -> "EnergyTerms":
        """Eⁿ = ε‖∇uⁿ‖² − κ‖uⁿ‖² + ⟨1, G[∂uⁿ, ∂uⁿ⁻¹]⟩ for 2 ≤ n ≤ N−1.

        ``levels`` maps level index to Fourier coefficients and must hold
        n, n−1 and n−2.
        """
        if not 2 <= n <= self.mesh.N - 1:
            raise SolverError(f"energy is defined for 2 <= n <= N-1={self.mesh.N - 1}, got {n}")
        tau = self.mesh.steps
        u_n, u_1, u_2 = levels[n], levels[n - 1], levels[n - 2]
        slope = spectral.inverse_transform(self._field((u_n - u_1) / tau[n]))
        slope_prev = spectral.inverse_transform(self._field((u_1 - u_2) / tau[n - 1]))
        return EnergyTerms(
            n=n,
            grad=self.config.epsilon * spectral.grad_norm_sq(self.grid, u_n),
            reaction=-self.config.kappa * spectral.l2_norm_sq(u_n),
            g_term=spectral.grid_integral(G_functional(self.mesh, n, slope, slope_prev)),
        )

    def _field(self, coeffs: np.ndarray) -> spectral.SpectralField:
        return spectral.SpectralField(self.grid, coeffs)


# ── energy records ───────────────────────────────────────────────────────────


@dataclass(frozen=True)
class EnergyTerms:
    n: int
    grad: float
    reaction: float
    g_term: float

    @property
    def total(self) -> float:
        return math.fsum((self.grad, self.reaction, self.g_term))


@dataclass
class EnergyTrace:
    terms: list[EnergyTerms] = field(default_factory=list)

    @property
    def levels(self) -> np.ndarray:
        return np.array([t.n for t in self.terms])

    @property
    def energies(self) -> np.ndarray:
        return np.array([t.total for t in self.terms])

    def increments(self) -> np.ndarray:
        """Eⁿ − Eⁿ⁻¹ for every recorded n ≥ 3."""
        return np.diff(self.energies)

    def violations(self, rel: float = 1e-12) -> int:
        """Steps where the energy grows beyond rel·max(1, E²)."""
        e = self.energies
        slack = rel * np.maximum(1.0, e[1:] ** 2)
        return int(np.count_nonzero(np.diff(e) > slack))


# ── whole runs ───────────────────────────────────────────────────────────────


@dataclass(eq=False)
class RunResult:
    mesh: TimeMesh
    errors: np.ndarray | None  # ‖uⁿ − u(tₙ)‖, NaN at n = 0
    energy: EnergyTrace | None
    trajectory: list[np.ndarray] | None
    final: np.ndarray
    imag_max: float

    @property
    def e_N(self) -> float:
        if self.errors is None:
            raise SolverError("run had no reference solution")
        return float(np.nanmax(self.errors[1:]))


def run(
    config: SolverConfig,
    initial: np.ndarray | None = None,
    source: Field | None = None,
    reference: Field | None = None,
    record_energy: bool = False,
    keep_trajectory: bool = False,
) -> RunResult:
    """Integrate to T.

    Without ``initial`` the manufactured solution drives everything: its
    value at t = 0, its forcing and its exact values for the error.  With
    ``initial`` (a physical M×M field) the source and reference default to
    none.
    """
    grid = FourierGrid(config.grid)
    if initial is None:
        initial = exact_solution(grid, 0.0)
        source = source or (lambda t: forcing(grid, t, config.epsilon, config.kappa))
        reference = reference or (lambda t: exact_solution(grid, t))

    if np.shape(initial) != (config.grid, config.grid):
        raise GridError(f"initial field must be {config.grid}×{config.grid}, got {np.shape(initial)}")
    solver = HeatSolver(config, source)
    mesh = config.mesh
    u0 = spectral.enforce_hermitian(spectral.transform(initial).coeffs)
    u1, u2 = solver.start(u0)

    errors = None
    if reference is not None:
        errors = np.full(mesh.N + 1, np.nan)

    def record_error(n: int, u: np.ndarray) -> None:
        if errors is not None:
            exact = spectral.transform(reference(mesh.nodes[n])).coeffs
            errors[n] = math.sqrt(spectral.l2_norm_sq(u - exact))

    window: deque[np.ndarray] = deque([u0, u1, u2], maxlen=3)
    trajectory = [u0, u1, u2] if keep_trajectory else None
    trace = EnergyTrace() if record_energy else None
    record_error(1, u1)
    record_error(2, u2)
    if trace is not None and mesh.N > 2:
        trace.terms.append(solver.energy({0: u0, 1: u1, 2: u2}, 2))

    for n in range(3, mesh.N + 1):
        u_n = spectral.enforce_hermitian(solver.bdf3_step(tuple(window), n))
        if trace is not None and n <= mesh.N - 1:
            trace.terms.append(solver.energy({n - 2: window[1], n - 1: window[2], n: u_n}, n))
        window.append(u_n)
        if trajectory is not None:
            trajectory.append(u_n)
        record_error(n, u_n)

    final = window[-1]
    imag_max = float(np.max(np.abs(np.fft.ifft2(final, norm="forward").imag)))
    return RunResult(mesh, errors, trace, trajectory, final, imag_max)


# ── truncation error ─────────────────────────────────────────────────────────


def truncation_error_direct(
    v: Callable[[np.ndarray], np.ndarray], dv: Callable[[float], float], mesh: TimeMesh, j: int
) -> float:
    """ζʲ[v] = D₃v(tⱼ) − v′(tⱼ) from sampled values."""
    values = v(mesh.nodes[: j + 1])
    return bdf3_apply(mesh, values, j) - dv(float(mesh.nodes[j]))


def truncation_error_integral(
    v4: Callable[[np.ndarray], np.ndarray], mesh: TimeMesh, j: int, panels: int = 64
) -> float:
    """ζʲ[v] through the cubic Peano kernels integrated against v⁽⁴⁾."""
    if not 3 <= j <= mesh.N:
        raise SolverError(f"truncation error needs 3 <= j <= N, got {j}")
    d0, d1, d2 = kernel_table(mesh).at(j)
    t = mesh.nodes
    r_j, r_1 = mesh.ratios[j], mesh.ratios[j - 1]

    def kernel(offset: int, s: np.ndarray) -> np.ndarray:
        c1 = (t[j - 2] - s) ** 3
        c0 = (t[j - 3] - s) ** 3
        if offset == 0:
            return (
                (d0 - r_j * d1) * (t[j - 1] - s) ** 3
                + r_j * (d1 - r_1 * d2) * c1
                + r_j * r_1 * d2 * c0
            )
        if offset == 1:
            return (d1 - r_1 * d2) * c1 + r_1 * d2 * c0
        return d2 * c0

    total = []
    for offset in range(3):
        i = j - offset
        s = np.linspace(t[i - 1], t[i], 2 * panels + 1)
        integral = simpson(kernel(offset, s) * v4(s), x=s)
        total.append(integral / (6.0 * mesh.steps[i]))
    return math.fsum(total)


# ── DOC-form diagnostics ─────────────────────────────────────────────────────


def doc_equation_residual(table: DocKernelTable, values, rhs, n: int) -> float:
    """|∂uⁿ + I₃ⁿ[u] − Σₖ θ⁽ⁿ⁾ₙ₋ₖ·rhsᵏ| for one Fourier mode.

    ``values[k]`` is uᵏ (k = 0 … n) and ``rhs[k]`` is λuᵏ + fᵏ.
    """
    mesh = table.mesh
    u = np.asarray(values)
    g = np.asarray(rhs)
    dv1 = (u[1] - u[0]) / mesh.steps[1]
    dv2 = (u[2] - u[1]) / mesh.steps[2]
    dvn = (u[n] - u[n - 1]) / mesh.steps[n]
    convolved = table.theta[n, 3 : n + 1] @ g[3 : n + 1]
    return float(abs(dvn + initial_effect(table, dv1, dv2, n) - convolved))


@dataclass(frozen=True, eq=False)
class StabilityBound:
    levels: np.ndarray  # n = 3 … n_max
    sharp: np.ndarray
    k3_form: np.ndarray
    k3_hat: float


def stability_bound(table: DocKernelTable, trajectory, forcing_norms) -> StabilityBound:
    """Right-hand sides of the mesh-robust L² estimate for κ ≤ 0.

    ``sharp`` keeps the actual kernel sums; ``k3_form`` replaces them with
    K3_hat and the constants of the closed form.
    """
    mesh = table.mesh
    n_max = table.n_max
    tau = mesh.steps
    tau_max = mesh.max_step
    f_norm = np.asarray(forcing_norms, dtype=float)

    u0, u1, u2 = trajectory[0], trajectory[1], trajectory[2]
    dv1 = (u1 - u0) / tau[1]
    dv2 = (u2 - u1) / tau[2]
    norm_u2 = math.sqrt(spectral.l2_norm_sq(u2))
    norm_dv1 = math.sqrt(spectral.l2_norm_sq(dv1))
    norm_dv2 = math.sqrt(spectral.l2_norm_sq(dv2))
    k3 = abs_sums(table).k3_hat

    levels = np.arange(3, n_max + 1)
    start_terms = np.array(
        [math.sqrt(spectral.l2_norm_sq(initial_effect(table, dv1, dv2, k))) for k in levels]
    )
    theta = np.abs(table.theta[3:, 3:])
    source_terms = tau[levels] * (theta @ f_norm[3 : n_max + 1])

    sharp = norm_u2 + 2.0 * tau_max * np.cumsum(start_terms) + 2.0 * np.cumsum(source_terms)
    f_max = np.maximum.accumulate(f_norm[3 : n_max + 1])
    k3_form = (
        norm_u2
        + k3 * tau_max * norm_dv1
        + 4.0 * k3 * tau_max * norm_dv2
        + 2.0 * k3 * mesh.nodes[levels] * f_max
    )
    return StabilityBound(levels, sharp, k3_form, k3)
