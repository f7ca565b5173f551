"""Variable time grids on [0, T] and their step-ratio diagnostics.

Indexing follows the scheme: ``mesh.steps[k]`` is τₖ = tₖ − tₖ₋₁ for
1 ≤ k ≤ N and ``mesh.ratios[k]`` is rₖ = τₖ/τₖ₋₁ for 2 ≤ k ≤ N.  The unused
leading slots hold NaN so formulas can be written with the scheme's
indices directly.

Random meshes draw from numpy's PCG64 generator (128-bit LCG state,
multiplier 0x2360ED051FC65DA44385DF649FCCF645, XSL-RR output to 64 bits),
seeded through ``SeedSequence([seed, *stream])``.  Uniform variates on
[0, 1) come from the top 53 bits of each 64-bit output; an exact zero is
lifted to the smallest normal double so every draw lies in (0, 1).
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from bdf3.errors import MeshError

MIN_STEPS = 4  # three history levels plus one BDF3 step

_SUM_TOL = 1e-12
_RATIO_TOL = 1e-14


# ── random streams ───────────────────────────────────────────────────────────


def generator(seed: int, *stream: int) -> np.random.Generator:
    """Return an independent PCG64 stream for ``(seed, *stream)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *stream])))


def open_uniform(rng: np.random.Generator, size: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """Uniform draws on the open interval (low, high)."""
    u = np.maximum(rng.random(size), np.finfo(float).tiny)
    return low + (high - low) * u


# ── the mesh ─────────────────────────────────────────────────────────────────


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float)
    values.flags.writeable = False
    return values


@dataclass(frozen=True, eq=False)
class TimeMesh:
    """Immutable grid 0 = t₀ < t₁ < … < t_N = T."""

    nodes: np.ndarray  # t_0 … t_N
    steps: np.ndarray  # [nan, τ_1, …, τ_N]
    ratios: np.ndarray  # [nan, nan, r_2, …, r_N]

    @property
    def N(self) -> int:
        return len(self.nodes) - 1

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1])

    @property
    def max_step(self) -> float:
        return float(np.max(self.steps[1:]))

    def tau(self, k: int) -> float:
        if not 1 <= k <= self.N:
            raise MeshError(f"step index k={k} outside 1..{self.N}")
        return float(self.steps[k])

    def ratio(self, k: int) -> float:
        if not 2 <= k <= self.N:
            raise MeshError(f"ratio index k={k} outside 2..{self.N}")
        return float(self.ratios[k])

    def scaled(self, factor: float) -> "TimeMesh":
        """Dilate every step by *factor*; ratios are carried over unchanged."""
        if not factor > 0:
            raise MeshError(f"scale factor must be positive, got {factor}")
        return _build(self.steps[1:] * factor, self.ratios[2:])


def _build(steps: np.ndarray, ratios: np.ndarray | None = None) -> TimeMesh:
    steps = np.asarray(steps, dtype=float)
    n = len(steps)
    if n < MIN_STEPS:
        raise MeshError(f"N={n} steps is too few; BDF3 needs N >= {MIN_STEPS}")
    if not np.all(np.isfinite(steps)) or np.any(steps <= 0):
        raise MeshError("all steps must be finite and positive")

    nodes = np.concatenate(([0.0], np.cumsum(steps)))
    if np.any(np.diff(nodes) <= 0):
        raise MeshError("nodes are not strictly increasing (steps below resolution)")

    computed = steps[1:] / steps[:-1]
    if ratios is None:
        ratios = computed
    else:
        ratios = np.asarray(ratios, dtype=float)
        if ratios.shape != computed.shape:
            raise MeshError("ratio array does not match the step array")
        if np.any(np.abs(ratios * steps[:-1] - steps[1:]) > _RATIO_TOL * 8 * steps[1:]):
            raise MeshError("ratios are inconsistent with the steps")

    return TimeMesh(
        nodes=_frozen(nodes),
        steps=_frozen(np.concatenate(([np.nan], steps))),
        ratios=_frozen(np.concatenate(([np.nan, np.nan], ratios))),
    )


def _check_horizon(T: float) -> None:
    if not T > 0:
        raise MeshError(f"horizon T must be positive, got {T}")


# ── constructors ─────────────────────────────────────────────────────────────


def mesh_from_steps(steps) -> TimeMesh:
    """Build a mesh from explicit step sizes τ₁ … τ_N."""
    return _build(np.asarray(steps, dtype=float))


def uniform_mesh(T: float, N: int) -> TimeMesh:
    _check_horizon(T)
    if N < MIN_STEPS:
        raise MeshError(f"N={N} is too few; BDF3 needs N >= {MIN_STEPS}")
    return _build(np.full(N, T / N), np.ones(N - 1))


def periodic_ratio_mesh(T: float, N: int, mu: float) -> TimeMesh:
    """Steps {τ₁, μτ₁, τ₁, μτ₁, …} with τ₁ = 2T/(N(1+μ))."""
    _check_horizon(T)
    if N % 2:
        raise MeshError(f"periodic mesh needs an even N, got {N}")
    if not mu > 0:
        raise MeshError(f"mu must be positive, got {mu}")
    tau1 = 2.0 * T / (N * (1.0 + mu))
    steps = np.tile([tau1, mu * tau1], N // 2)
    ratios = np.tile([mu, 1.0 / mu], N // 2)[: N - 1]
    return _build(steps, ratios)


def random_mesh(T: float, N: int, seed: int) -> TimeMesh:
    """τₖ = T·εₖ/Σεₖ with εₖ i.i.d. uniform on (0, 1)."""
    _check_horizon(T)
    if N < MIN_STEPS:
        raise MeshError(f"N={N} is too few; BDF3 needs N >= {MIN_STEPS}")
    eps = open_uniform(generator(seed), N)
    return _build(T * eps / eps.sum())


def random_ratio_mesh(
    T: float, N: int, ratio_max: float, seed: int, ratio_min: float = 0.0
) -> TimeMesh:
    """Mesh whose ratios r₂ … r_N are i.i.d. uniform on (ratio_min, ratio_max)."""
    _check_horizon(T)
    if N < MIN_STEPS:
        raise MeshError(f"N={N} is too few; BDF3 needs N >= {MIN_STEPS}")
    if not 0 <= ratio_min < ratio_max:
        raise MeshError(f"need 0 <= ratio_min < ratio_max, got ({ratio_min}, {ratio_max})")
    ratios = open_uniform(generator(seed), N - 1, ratio_min, ratio_max)
    steps = np.concatenate(([1.0], np.cumprod(ratios)))
    steps *= T / steps.sum()
    return _build(steps, ratios)


# ── diagnostics ──────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class RatioStats:
    r_max: float
    count_ge: int  # N₁ when threshold = R_e
    gamma_n: float  # Σ_{k=3}^{N} |r_k − r_{k−1}|


def ratio_stats(mesh: TimeMesh, threshold: float) -> RatioStats:
    r = mesh.ratios[2:]
    return RatioStats(
        r_max=float(r.max()),
        count_ge=int(np.count_nonzero(r >= threshold)),
        gamma_n=float(np.abs(np.diff(r)).sum()),
    )


def check_invariants(mesh: TimeMesh) -> None:
    """Raise MeshError if *mesh* breaks a structural invariant."""
    steps = mesh.steps[1:]
    if np.any(steps <= 0):
        raise MeshError("nonpositive step")
    if abs(steps.sum() - mesh.horizon) > _SUM_TOL * mesh.horizon:
        raise MeshError("steps do not sum to the horizon")
    if np.any(np.diff(mesh.nodes) <= 0):
        raise MeshError("nodes are not strictly increasing")
    if np.any(np.abs(mesh.ratios[2:] * steps[:-1] - steps[1:]) > 8 * _RATIO_TOL * steps[1:]):
        raise MeshError("ratios are inconsistent with the steps")


def dump_csv(mesh: TimeMesh) -> str:
    """Mesh dump with header ``k,t_k,tau_k,r_k`` (blank where undefined)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "t_k", "tau_k", "r_k"])
    for k in range(mesh.N + 1):
        tau = repr(float(mesh.steps[k])) if k >= 1 else ""
        r = repr(float(mesh.ratios[k])) if k >= 2 else ""
        writer.writerow([k, repr(float(mesh.nodes[k])), tau, r])
    return buf.getvalue()
