"""Coefficient-level mathematics of the variable-step BDF3 formula.

The three kernel functions

    d0(x, y) = (1+2x)/(1+x) + xy/(1+y+xy)
    d1(x, y) = −x/(1+x) − xy/(1+y+xy) − xy²(1+x)/((1+y+xy)(1+y))
    d2(x, y) = xy²(1+x)/((1+y+xy)(1+y))

give the per-step weights d⁽ⁿ⁾ⱼ = dⱼ(rₙ, rₙ₋₁).  Everything here accepts
numpy arrays as well as scalars so the lemma scans can stay vectorised.

The gradient-structure part (d★, p, q, G, F) uses the fixed splitting
parameter γ = 7/10 and is valid while every ratio stays below R_e.
"""

import logging
import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from bdf3.errors import KernelError
from bdf3.time_mesh import TimeMesh

logger = logging.getLogger(__name__)

GAMMA = 0.7
RE_TOL = 1e-12


# ── kernel functions ─────────────────────────────────────────────────────────


def _d(x, y):
    s = 1.0 + y + x * y
    tail = x * y * y * (1.0 + x) / (s * (1.0 + y))
    d0 = (1.0 + 2.0 * x) / (1.0 + x) + x * y / s
    d1 = -x / (1.0 + x) - x * y / s - tail
    return d0, d1, tail


def d_coeffs(x, y):
    """Return ``(d0, d1, d2)`` at ratio arguments ``x, y ≥ 0``."""
    if np.any(np.asarray(x) < 0) or np.any(np.asarray(y) < 0):
        raise KernelError(f"kernel arguments must be non-negative, got ({x}, {y})")
    return _d(x, y)


def bdf2_coeffs(x):
    """Variable-step BDF2 weights; the BDF3 kernels collapse to them at y = 0."""
    d0, d1, _ = d_coeffs(x, 0.0)
    return d0, d1


@dataclass(frozen=True, eq=False)
class Bdf3Coefficients:
    """Per-step kernels d⁽ⁿ⁾ⱼ for 3 ≤ n ≤ N (NaN below n = 3)."""

    d0: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    def at(self, n: int) -> tuple[float, float, float]:
        if n < 3 or n >= len(self.d0):
            raise KernelError(f"kernels are defined for 3 <= n <= {len(self.d0) - 1}, got {n}")
        return float(self.d0[n]), float(self.d1[n]), float(self.d2[n])


def kernel_table(mesh: TimeMesh) -> Bdf3Coefficients:
    r = mesh.ratios
    d0 = np.full(mesh.N + 1, np.nan)
    d1 = d0.copy()
    d2 = d0.copy()
    d0[3:], d1[3:], d2[3:] = _d(r[3:], r[2:-1])
    return Bdf3Coefficients(d0=d0, d1=d1, d2=d2)


def bdf3_apply(mesh: TimeMesh, values, n: int) -> float:
    """D₃vⁿ = d0·∂vⁿ + d1·∂vⁿ⁻¹ + d2·∂vⁿ⁻² with ∂vʲ = (vʲ − vʲ⁻¹)/τⱼ."""
    if not 3 <= n <= mesh.N:
        raise KernelError(f"BDF3 needs 3 <= n <= N={mesh.N}, got n={n}")
    v = np.asarray(values, dtype=float)
    if len(v) <= n:
        raise KernelError(f"need values v^0..v^{n}, got {len(v)}")
    d0, d1, d2 = _d(mesh.ratios[n], mesh.ratios[n - 1])
    tau = mesh.steps
    dv = [(v[j] - v[j - 1]) / tau[j] for j in (n, n - 1, n - 2)]
    return math.fsum((d0 * dv[0], d1 * dv[1], d2 * dv[2]))


def consistency_identities(x: float, y: float) -> tuple[float, float, float]:
    """Residuals of the three consistency identities (exact for degree ≤ 3)."""
    if x <= 0 or y <= 0:
        raise KernelError(f"identities need x, y > 0, got ({x}, {y})")
    d0, d1, d2 = _d(x, y)
    w1 = (1 + 2 * x) / x
    w2 = (1 + 2 * y + 2 * x * y) / (x * y)
    v1 = (1 + 3 * x + 3 * x * x) / (x * x)
    v2 = (1 + 3 * y + 3 * x * y + 3 * y * y + 6 * x * y * y + 3 * x * x * y * y) / (x * x * y * y)
    return (
        math.fsum((d0, d1, d2, -1.0)),
        math.fsum((d0, w1 * d1, w2 * d2)),
        math.fsum((d0, v1 * d1, v2 * d2)),
    )


# ── step-ratio limits ────────────────────────────────────────────────────────


def re_equation(R: float) -> float:
    return 10.0 / (7.0 * (R + 1.0)) - R * R * math.sqrt(R) / (R * R + R + 1.0)


def compute_Re(tol: float = RE_TOL) -> float:
    """Root R_e ≈ 1.4877 of 10/(7(R+1)) = R²√R/(R²+R+1) on [1, 2]."""
    if not tol > 0:
        raise KernelError(f"tolerance must be positive, got {tol}")
    if not (re_equation(1.0) > 0 > re_equation(2.0)):
        raise KernelError("R_e equation is not bracketed by [1, 2]")
    root = bisect(re_equation, 1.0, 2.0, xtol=tol * 1e-3, maxiter=200)
    if abs(re_equation(root)) >= tol:
        raise KernelError(f"R_e residual {re_equation(root):.3e} exceeds tol={tol}")
    return root


_re_cache: float | None = None
_re_lock = threading.Lock()


def r_e() -> float:
    """Cached R_e at tolerance 1e-12."""
    global _re_cache
    if _re_cache is None:
        with _re_lock:
            if _re_cache is None:
                _re_cache = compute_Re(RE_TOL)
                logger.debug("R_e initialised to %.15f", _re_cache)
    return _re_cache


def gamma_bar(R: float) -> float:
    _, d1_0, _ = _d(R, 0.0)
    _, _, d2_rr = _d(R, R)
    return -d1_0 / (math.sqrt(R) * d2_rr)


def _gamma_bar_equation(R: float) -> float:
    g = gamma_bar(R)
    d0, d1, d2 = _d(R, R)
    sr = math.sqrt(R)
    return math.fsum((
        2.0 * d0,
        g * sr * d1,
        (g * g - 1.0) * R * d2,
        sr * d1 / g,
        R * d2,
    ))


def compute_gamma_bar(tol: float = RE_TOL) -> tuple[float, float]:
    """Return ``(γ̄, R̄)``, the optimal splitting parameter and its ratio limit."""
    if not tol > 0:
        raise KernelError(f"tolerance must be positive, got {tol}")
    lo, hi = _gamma_bar_equation(1.0), _gamma_bar_equation(2.0)
    if not lo > 0 > hi:
        raise KernelError(f"no root of the γ̄ condition in [1, 2] ({lo:.3g}, {hi:.3g})")
    R = bisect(_gamma_bar_equation, 1.0, 2.0, xtol=tol * 1e-3, maxiter=200)
    if abs(_gamma_bar_equation(R)) >= tol:
        raise KernelError(f"γ̄ residual {_gamma_bar_equation(R):.3e} exceeds tol={tol}")
    return gamma_bar(R), R


# ── gradient-structure coefficients ──────────────────────────────────────────


def d_star(x, y):
    _, d1, d2 = _d(x, y)
    return -(10.0 / 7.0) * np.sqrt(x) * d1 - np.sqrt(x * y) * d2


def p_fun(x, y, z):
    d0, _, d2 = _d(y, z)
    return 2.0 * d0 - np.sqrt(y * z) * d2 - GAMMA**2 * d_star(y, z) - d_star(x, y)


def q_fun(x, y, z):
    _, _, d2 = _d(x, y)
    return d_star(y, z) - np.sqrt(x * y) * d2


@dataclass(frozen=True)
class DgsCoefficients:
    a: float
    b: float
    c: float
    p: float
    q: float
    gamma: float = GAMMA


def _lookahead(mesh: TimeMesh, n: int, low: int) -> None:
    if not low <= n <= mesh.N - 1:
        raise KernelError(
            f"n={n} outside {low}..{mesh.N - 1}; r_(n+1) is needed and undefined at n=N"
        )


def dgs_coefficients(mesh: TimeMesh, n: int) -> DgsCoefficients:
    _lookahead(mesh, n, 3)
    r_next, r_n, r_prev = mesh.ratios[n + 1], mesh.ratios[n], mesh.ratios[n - 1]
    bc = float(math.sqrt(r_n * r_prev) * _d(r_n, r_prev)[2])
    return DgsCoefficients(
        a=float(d_star(r_n, r_prev)),
        b=bc,
        c=bc,
        p=float(p_fun(r_next, r_n, r_prev)),
        q=float(q_fun(r_next, r_n, r_prev)),
    )


def G_functional(mesh: TimeMesh, n: int, v_n: float, v_prev: float) -> float:
    """Lyapunov part G[vₙ, vₙ₋₁] of the gradient structure (2 ≤ n ≤ N−1).

    Works pointwise on arrays of values as well as on scalars.
    """
    _lookahead(mesh, n, 2)
    r_next, r_n = mesh.ratios[n + 1], mesh.ratios[n]
    tau = mesh.steps
    coupled = GAMMA * math.sqrt(tau[n]) * v_n - math.sqrt(tau[n - 1]) * v_prev
    return (
        d_star(r_next, r_n) * tau[n] * v_n * v_n
        + math.sqrt(r_next * r_n) * _d(r_next, r_n)[2] * coupled * coupled
    )


def F_functional(mesh: TimeMesh, n: int, v_n: float, v_prev: float, v_prev2: float) -> float:
    """Nonnegative remainder F[vₙ, vₙ₋₁, vₙ₋₂] (3 ≤ n ≤ N−1), F ≥ τₙvₙ²/50."""
    _lookahead(mesh, n, 3)
    c = dgs_coefficients(mesh, n)
    tau = mesh.steps
    s0, s1, s2 = math.sqrt(tau[n]), math.sqrt(tau[n - 1]), math.sqrt(tau[n - 2])
    coupled = GAMMA * s0 * v_n - s1 * v_prev
    chained = s0 * v_n - GAMMA * s1 * v_prev + s2 * v_prev2
    return c.p * tau[n] * v_n * v_n + c.q * coupled * coupled + c.c * chained * chained


def dgs_residual(mesh: TimeMesh, values, n: int) -> float:
    """|2vₙτₙ(d0vₙ + d1vₙ₋₁ + d2vₙ₋₂) − (G[vₙ,vₙ₋₁] − G[vₙ₋₁,vₙ₋₂] + F)|.

    ``values[j]`` is vⱼ; zeros at j = 1, 2 give the truncated convolution.
    """
    _lookahead(mesh, n, 3)
    v = np.asarray(values, dtype=float)
    d0, d1, d2 = _d(mesh.ratios[n], mesh.ratios[n - 1])
    lhs = 2.0 * v[n] * mesh.steps[n] * math.fsum((d0 * v[n], d1 * v[n - 1], d2 * v[n - 2]))
    rhs = math.fsum((
        G_functional(mesh, n, v[n], v[n - 1]),
        -G_functional(mesh, n - 1, v[n - 1], v[n - 2]),
        F_functional(mesh, n, v[n], v[n - 1], v[n - 2]),
    ))
    return abs(lhs - rhs)
