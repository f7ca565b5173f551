"""Fourier representation of real periodic fields on (0, 2π)².

Normalisation is pinned to numpy's ``norm="forward"``:

    û_k = (1/M²) Σ u(x_ij) e^{−ik·x_ij},      u(x) = Σ û_k e^{ik·x}

so ‖u‖² = (2π)²·Σ|û_k|² and sin x·sin y has the four modes (±1, ±1), each
of magnitude 1/4.  Wavenumbers follow ``np.fft.fftfreq`` ordering
(0, 1, …, M/2−1, −M/2, …, −1).
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from bdf3.errors import GridError

TWO_PI = 2.0 * math.pi
_NORM = "forward"
MIN_GRID = 8


def check_grid(M: int) -> None:
    if M < MIN_GRID or M & (M - 1):
        raise GridError(f"grid size M={M} must be a power of two >= {MIN_GRID}")


@dataclass(frozen=True)
class FourierGrid:
    M: int

    def __post_init__(self) -> None:
        check_grid(self.M)

    @cached_property
    def points(self) -> tuple[np.ndarray, np.ndarray]:
        axis = TWO_PI * np.arange(self.M) / self.M
        return np.meshgrid(axis, axis, indexing="ij")

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        k = np.fft.fftfreq(self.M, 1.0 / self.M)
        return np.meshgrid(k, k, indexing="ij")

    @cached_property
    def k_squared(self) -> np.ndarray:
        k1, k2 = self.wavenumbers
        return k1 * k1 + k2 * k2


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real field; ``coeffs[i, j]`` ↔ (k₁, k₂)."""

    grid: FourierGrid
    coeffs: np.ndarray

    @property
    def M(self) -> int:
        return self.grid.M


# ── transforms ───────────────────────────────────────────────────────────────


def transform(field: np.ndarray) -> SpectralField:
    u = np.asarray(field, dtype=float)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise GridError(f"expected a square M×M field, got shape {u.shape}")
    grid = FourierGrid(u.shape[0])
    return SpectralField(grid, np.fft.fft2(u, norm=_NORM))


def inverse_transform(spectral: SpectralField) -> np.ndarray:
    return np.fft.ifft2(spectral.coeffs, norm=_NORM).real


def conjugate_partner(coeffs: np.ndarray) -> np.ndarray:
    """c[−k] for every k (indices taken modulo M)."""
    return np.roll(coeffs[::-1, ::-1], 1, axis=(0, 1))


def enforce_hermitian(coeffs: np.ndarray) -> np.ndarray:
    """Project onto û(−k) = conj(û(k)), the spectra of real fields."""
    return 0.5 * (coeffs + np.conj(conjugate_partner(coeffs)))


def hermitian_defect(coeffs: np.ndarray) -> float:
    return float(np.max(np.abs(coeffs - np.conj(conjugate_partner(coeffs)))))


# ── norms ────────────────────────────────────────────────────────────────────


def l2_norm_sq(coeffs: np.ndarray) -> float:
    """‖u‖² over (0, 2π)² by Parseval."""
    return TWO_PI**2 * float(np.sum(np.abs(coeffs) ** 2))


def grad_norm_sq(grid: FourierGrid, coeffs: np.ndarray) -> float:
    return TWO_PI**2 * float(np.sum(grid.k_squared * np.abs(coeffs) ** 2))


def grid_l2_norm_sq(field: np.ndarray) -> float:
    """Periodic trapezoid rule (2π/M)²Σu²."""
    M = field.shape[0]
    return (TWO_PI / M) ** 2 * float(np.sum(np.asarray(field) ** 2))


def grid_integral(field: np.ndarray) -> float:
    M = field.shape[0]
    return (TWO_PI / M) ** 2 * float(np.sum(field))


def smooth_random_field(grid: FourierGrid, rng: np.random.Generator, max_mode: int = 3) -> np.ndarray:
    """Real field spanned by modes with |k₁|, |k₂| ≤ max_mode, normal amplitudes."""
    k1, k2 = grid.wavenumbers
    coeffs = rng.standard_normal(k1.shape) + 1j * rng.standard_normal(k1.shape)
    coeffs[(np.abs(k1) > max_mode) | (np.abs(k2) > max_mode)] = 0.0
    coeffs = enforce_hermitian(coeffs) / (2 * max_mode + 1) ** 2
    return np.fft.ifft2(coeffs, norm=_NORM).real
