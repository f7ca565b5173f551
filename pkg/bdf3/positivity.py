"""Numerical grid scans standing in for the positivity lemmas of q and p.

Two auxiliary functions, η and ζ, are written in the square-root variables
(x, y, z) ∈ (0, √R_e)³ and bridge back to the coefficients:

    q(x², y², z²) = y³·η(x, y, z)
    p(x², y², z²) = (1 + y²)·ζ(x, y, z)

``scan_lemma_positivity`` evaluates q > 0, p > 1/50, η > 0 and ζ > 1/50 on
uniform grids (upper endpoint excluded, smallest coordinate 1e-6) and
checks both bridges at every η/ζ grid point.  Violations are report
entries, not exceptions.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from bdf3.errors import KernelError
from bdf3.kernels import d_coeffs, p_fun, q_fun, r_e
from bdf3.time_mesh import generator

logger = logging.getLogger(__name__)

P_FLOOR = 1.0 / 50.0
BRIDGE_TOL = 1e-12
GRID_FLOOR = 1e-6

_MONO_RTOL = 4 * np.finfo(float).eps


# ── auxiliary functions ──────────────────────────────────────────────────────


def eta(x, y, z):
    x2, y2, z2 = x * x, y * y, z * z
    return (
        10.0 / (7.0 * (y2 + 1.0))
        - x**3 * (x2 + 1.0) * y2 / ((y2 + 1.0) * (x2 * y2 + y2 + 1.0))
        + 10.0 * z2 * (y2 * z2 + 2.0 * z2 + 1.0) / (7.0 * (z2 + 1.0) * (y2 * z2 + z2 + 1.0))
        - (y2 + 1.0) * z**5 / ((z2 + 1.0) * (y2 * z2 + z2 + 1.0))
    )


def _zeta1(y, z):
    d0, d1, d2 = d_coeffs(y * y, z * z)
    return 2.0 * d0 + 0.7 * y * d1 - 0.51 * y * z * d2


def _zeta2(x, y):
    x2, y2, x3, y3 = x * x, y * y, x**3, y**3
    return (
        -10.0 * x3 / (7.0 * (x2 + 1.0))
        - x3 * y2 * (10.0 - 7.0 * y) / (7.0 * (y2 + 1.0))
        - (10.0 * y + 7.0) * y3 * x3 / (7.0 * (y2 + 1.0) * (1.0 + y2 + y2 * x2))
    )


def zeta(x, y, z):
    return (_zeta1(y, z) + _zeta2(x, y)) / (1.0 + y * y)


# ── reports ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class LemmaCheck:
    """One scan row.  For ``*_bridge`` rows ``min_value`` holds the largest
    residual and ``argmin`` its location."""

    check: str
    grid: int
    min_value: float
    argmin: tuple[float, float, float]
    violations: int


@dataclass
class LemmaReport:
    grid: int
    checks: list[LemmaCheck] = field(default_factory=list)

    @property
    def violations(self) -> int:
        return sum(c.violations for c in self.checks)

    def by_name(self, name: str) -> LemmaCheck:
        for c in self.checks:
            if c.check == name:
                return c
        raise KeyError(name)


def _axes(upper: float, g: int):
    axis = np.linspace(GRID_FLOOR, upper, g, endpoint=False)
    return np.meshgrid(axis, axis, axis, indexing="ij")


def _at(X, Y, Z, idx) -> tuple[float, float, float]:
    return float(X[idx]), float(Y[idx]), float(Z[idx])


def _lower_bound(name, values, floor, X, Y, Z, g) -> LemmaCheck:
    idx = np.unravel_index(np.argmin(values), values.shape)
    bad = int(np.count_nonzero(values <= floor))
    if bad:
        logger.warning("%s: %d grid points at or below %g", name, bad, floor)
    return LemmaCheck(name, g, float(values[idx]), _at(X, Y, Z, idx), bad)


def _bridge(name, residual, X, Y, Z, g) -> LemmaCheck:
    idx = np.unravel_index(np.argmax(residual), residual.shape)
    bad = int(np.count_nonzero(residual >= BRIDGE_TOL))
    if bad:
        logger.warning("%s: %d grid points with residual >= %g", name, bad, BRIDGE_TOL)
    return LemmaCheck(name, g, float(residual[idx]), _at(X, Y, Z, idx), bad)


def scan_lemma_positivity(grid_points_per_axis: int = 64) -> LemmaReport:
    g = grid_points_per_axis
    if g < 8:
        raise KernelError(f"grid must have at least 8 points per axis, got {g}")
    Re = r_e()
    report = LemmaReport(grid=g)

    X, Y, Z = _axes(Re, g)
    report.checks.append(_lower_bound("q_positive", q_fun(X, Y, Z), 0.0, X, Y, Z, g))
    report.checks.append(_lower_bound("p_lower", p_fun(X, Y, Z), P_FLOOR, X, Y, Z, g))

    X, Y, Z = _axes(np.sqrt(Re), g)
    eta_v = eta(X, Y, Z)
    zeta_v = zeta(X, Y, Z)
    report.checks.append(_lower_bound("eta_positive", eta_v, 0.0, X, Y, Z, g))
    report.checks.append(_lower_bound("zeta_lower", zeta_v, P_FLOOR, X, Y, Z, g))

    X2, Y2, Z2 = X * X, Y * Y, Z * Z
    report.checks.append(
        _bridge("q_bridge", np.abs(q_fun(X2, Y2, Z2) - Y**3 * eta_v), X, Y, Z, g)
    )
    report.checks.append(
        _bridge("p_bridge", np.abs(p_fun(X2, Y2, Z2) - (1.0 + Y2) * zeta_v), X, Y, Z, g)
    )
    return report


# ── monotonicity of the kernel functions ─────────────────────────────────────


@dataclass(frozen=True)
class MonotonicityReport:
    samples: int
    violations: int
    d2_max: float
    d2_limit: float  # d2(R_e, R_e)


def _count_drops(lo, hi) -> int:
    """Entries where ``hi`` falls below ``lo`` beyond roundoff."""
    slack = _MONO_RTOL * np.maximum(np.abs(lo), np.abs(hi))
    return int(np.count_nonzero(hi < lo - slack))


def monotonicity_check(samples: int, seed: int) -> MonotonicityReport:
    """d0, −d1 and d2 must not decrease in either argument on (0, R_e)²."""
    if samples < 100:
        raise KernelError(f"need at least 100 samples, got {samples}")
    Re = r_e()
    rng = generator(seed)
    xs = np.sort(rng.uniform(0.0, Re, (2, samples)), axis=0)
    ys = np.sort(rng.uniform(0.0, Re, (2, samples)), axis=0)
    x, x_up = xs
    y, y_up = ys

    base = d_coeffs(x, y)
    moved_x = d_coeffs(x_up, y)
    moved_y = d_coeffs(x, y_up)
    signs = (1.0, -1.0, 1.0)

    violations = 0
    for s, b, mx, my in zip(signs, base, moved_x, moved_y):
        violations += _count_drops(s * b, s * mx)
        violations += _count_drops(s * b, s * my)
    if violations:
        logger.warning("monotonicity: %d violations over %d samples", violations, samples)

    return MonotonicityReport(
        samples=samples,
        violations=violations,
        d2_max=float(np.max(np.concatenate((base[2], moved_x[2], moved_y[2])))),
        d2_limit=float(d_coeffs(Re, Re)[2]),
    )
