import numpy as np
import pytest

from ico3d.core.sh import C0, C1, C2, C3, eval_sh, num_coeffs, rgb_to_dc, sh_basis
from ico3d.errors import InvalidInputError

# Tabulated real-SH basis values (community splat ordering) at two probe
# directions, worked out by hand from the polynomial forms.
_Z_PLUS = np.array([
    C0,
    0.0, C1, 0.0,
    0.0, 0.0, 2 * C2[2], 0.0, 0.0,
    0.0, 0.0, 0.0, 2 * C3[3], 0.0, 0.0, 0.0,
])
_X_PLUS = np.array([
    C0,
    0.0, 0.0, -C1,
    0.0, 0.0, -C2[2], 0.0, C2[4],
    0.0, 0.0, 0.0, 0.0, -C3[4], 0.0, C3[6],
])


def test_zero_coeffs_give_mid_gray():
    out = eval_sh(np.zeros((1, 1, 3)), np.array([[0.0, 0.0, 1.0]]), degree=0)
    assert np.allclose(out, 0.5)


def test_degree0_is_view_independent():
    rng = np.random.default_rng(2)
    coeffs = rng.normal(size=(4, 1, 3))
    d1 = np.tile([0.0, 0.0, 1.0], (4, 1))
    d2 = rng.normal(size=(4, 3))
    d2 /= np.linalg.norm(d2, axis=1, keepdims=True)
    assert np.array_equal(eval_sh(coeffs, d1, 0), eval_sh(coeffs, d2, 0))


def test_degree1_z_flip_matches_tabulated_oracle():
    # Flipping z negates exactly the z-linear band-1 term: the difference of
    # the two evaluations is 2 * C1 * coeff[2] per channel (pre-clamp).
    rng = np.random.default_rng(4)
    coeffs = rng.normal(scale=0.05, size=(1, 4, 3))
    up = eval_sh(coeffs, np.array([[0.0, 0.0, 1.0]]), 1)
    down = eval_sh(coeffs, np.array([[0.0, 0.0, -1.0]]), 1)
    expected = 2.0 * C1 * coeffs[0, 2, :]
    assert np.abs((up - down)[0] - expected).max() < 1e-12


@pytest.mark.parametrize("direction,table", [
    (np.array([0.0, 0.0, 1.0]), _Z_PLUS),
    (np.array([1.0, 0.0, 0.0]), _X_PLUS),
])
def test_basis_matches_hand_tabulated_values(direction, table):
    assert np.abs(sh_basis(direction, 3) - table).max() < 1e-14


def test_higher_degree_reduces_with_zero_bands():
    rng = np.random.default_rng(6)
    dirs = rng.normal(size=(10, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    for deg in (1, 2, 3):
        low = rng.normal(scale=0.1, size=(10, num_coeffs(deg - 1), 3))
        high = np.zeros((10, num_coeffs(deg), 3))
        high[:, :num_coeffs(deg - 1), :] = low
        diff = eval_sh(high, dirs, deg) - eval_sh(low, dirs, deg - 1)
        assert np.abs(diff).max() < 1e-15


def test_output_clamped_to_unit_interval():
    coeffs = np.full((1, 1, 3), 100.0)
    assert np.all(eval_sh(coeffs, np.array([[0.0, 0.0, 1.0]]), 0) == 1.0)
    assert np.all(eval_sh(-coeffs, np.array([[0.0, 0.0, 1.0]]), 0) == 0.0)


def test_coefficient_count_mismatch_rejected():
    with pytest.raises(InvalidInputError):
        eval_sh(np.zeros((1, 4, 3)), np.array([[0.0, 0.0, 1.0]]), degree=0)


def test_rgb_to_dc_roundtrip():
    rgb = np.array([[0.25, 0.5, 0.9]])
    out = eval_sh(rgb_to_dc(rgb)[:, None, :], np.array([[0.0, 0.0, 1.0]]), 0)
    assert np.abs(out - rgb).max() < 1e-12
