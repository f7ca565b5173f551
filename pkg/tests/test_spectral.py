"""Tests for bdf3.spectral — transforms, Hermitian symmetry and Parseval norms."""

import math

import numpy as np
import pytest

from bdf3.errors import EXIT_USAGE, GridError
from bdf3.spectral import (
    FourierGrid,
    enforce_hermitian,
    grad_norm_sq,
    grid_integral,
    grid_l2_norm_sq,
    hermitian_defect,
    inverse_transform,
    l2_norm_sq,
    smooth_random_field,
    transform,
)
from bdf3.time_mesh import generator


@pytest.fixture()
def grid() -> FourierGrid:
    return FourierGrid(32)


def _sin_sin(grid: FourierGrid) -> np.ndarray:
    X, Y = grid.points
    return np.sin(X) * np.sin(Y)


# ════════════════════════════════════════════════════════════════════════════════
# the grid
# ════════════════════════════════════════════════════════════════════════════════


class TestFourierGrid:
    @pytest.mark.parametrize("M", [0, 1, 2, 4, 12, 48])
    def test_rejects_small_or_non_powers_of_two(self, M):
        with pytest.raises(GridError) as exc:
            FourierGrid(M)
        assert exc.value.exit_code == EXIT_USAGE

    def test_smallest_grid(self):
        assert FourierGrid(8).k_squared.shape == (8, 8)

    def test_wavenumber_order(self):
        k1, _ = FourierGrid(8).wavenumbers
        assert list(k1[:, 0]) == [0, 1, 2, 3, -4, -3, -2, -1]

    def test_points_span_period(self, grid):
        X, Y = grid.points
        assert X[0, 0] == 0.0
        assert X[-1, 0] == pytest.approx(2 * math.pi * 31 / 32)
        assert np.array_equal(X[:, 0], Y[0, :])


# ════════════════════════════════════════════════════════════════════════════════
# transforms
# ════════════════════════════════════════════════════════════════════════════════


class TestTransform:
    def test_delta_has_flat_spectrum(self, grid):
        field = np.zeros((32, 32))
        field[0, 0] = 1.0
        coeffs = transform(field).coeffs
        assert np.allclose(coeffs, 1 / 32**2, rtol=0, atol=1e-18)

    def test_sin_sin_has_four_modes(self, grid):
        coeffs = transform(_sin_sin(grid)).coeffs
        big = np.argwhere(np.abs(coeffs) > 1e-12)
        k1, k2 = grid.wavenumbers
        modes = {(int(k1[i, j]), int(k2[i, j])) for i, j in big}
        assert modes == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
        assert np.allclose(np.abs(coeffs[tuple(big.T)]), 0.25, rtol=0, atol=1e-14)

    def test_round_trip(self, grid):
        field = generator(1).standard_normal((32, 32))
        back = inverse_transform(transform(field))
        assert np.max(np.abs(back - field)) < 1e-13

    def test_non_square_rejected(self):
        with pytest.raises(GridError):
            transform(np.zeros((8, 16)))

    def test_non_power_of_two_rejected(self):
        with pytest.raises(GridError):
            transform(np.zeros((12, 12)))


class TestHermitian:
    def test_real_field_is_hermitian(self, grid):
        coeffs = transform(generator(2).standard_normal((32, 32))).coeffs
        assert hermitian_defect(coeffs) < 1e-15

    def test_projection_is_idempotent(self, grid):
        rng = generator(3)
        raw = rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32))
        once = enforce_hermitian(raw)
        assert hermitian_defect(once) < 1e-15
        assert np.allclose(enforce_hermitian(once), once, rtol=0, atol=1e-15)

    def test_projected_spectrum_is_real_in_space(self, grid):
        rng = generator(4)
        raw = rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32))
        space = np.fft.ifft2(enforce_hermitian(raw), norm="forward")
        assert np.max(np.abs(space.imag)) < 1e-12


# ════════════════════════════════════════════════════════════════════════════════
# norms
# ════════════════════════════════════════════════════════════════════════════════


class TestNorms:
    def test_sin_sin_norm_is_pi(self, grid):
        assert math.sqrt(l2_norm_sq(transform(_sin_sin(grid)).coeffs)) == pytest.approx(math.pi, rel=1e-13)

    def test_sin_sin_gradient(self, grid):
        coeffs = transform(_sin_sin(grid)).coeffs
        assert grad_norm_sq(grid, coeffs) == pytest.approx(2 * math.pi**2, rel=1e-13)

    def test_parseval(self, grid):
        field = smooth_random_field(grid, generator(5))
        spectral = l2_norm_sq(transform(field).coeffs)
        assert grid_l2_norm_sq(field) == pytest.approx(spectral, rel=1e-12)

    def test_grid_integral_of_constant(self, grid):
        assert grid_integral(np.full((32, 32), 3.0)) == pytest.approx(3.0 * (2 * math.pi) ** 2)

    def test_grid_integral_of_mean_free_field(self, grid):
        assert abs(grid_integral(_sin_sin(grid))) < 1e-13


class TestSmoothField:
    def test_real_and_band_limited(self, grid):
        field = smooth_random_field(grid, generator(6), max_mode=3)
        coeffs = transform(field).coeffs
        k1, k2 = grid.wavenumbers
        outside = (np.abs(k1) > 3) | (np.abs(k2) > 3)
        assert np.max(np.abs(coeffs[outside])) < 1e-15
        assert np.max(np.abs(coeffs[~outside])) > 0.0

    def test_seeded(self, grid):
        a = smooth_random_field(grid, generator(7, 1))
        b = smooth_random_field(grid, generator(7, 1))
        assert np.array_equal(a, b)
