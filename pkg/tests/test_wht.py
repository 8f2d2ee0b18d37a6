# Third-party imports
import numpy as np
import pytest

# Local application imports
from src.instrumentation.tally import OpTally
from src.wht import (
    fwht1d,
    fwht2d,
    fwht_images,
    hadamard_matrix,
    is_pow2,
    pad_to_pow2,
    plan_transform,
)

SIZES = [2, 4, 8, 16, 32]


@pytest.mark.parametrize("n", SIZES)
def test_fwht1d_matches_hadamard_matrix(n, rng):
    matrix = hadamard_matrix(n) / np.sqrt(n)
    for x in rng.normal(size=(100, n)):
        np.testing.assert_allclose(fwht1d(x), matrix @ x, rtol=0, atol=1e-12)


@pytest.mark.parametrize("n", SIZES)
def test_fwht1d_is_an_involution_and_preserves_energy(n, rng):
    x = rng.normal(size=n)
    y = fwht1d(x)
    np.testing.assert_allclose(fwht1d(y), x, rtol=0, atol=1e-10)
    assert abs(np.sum(x**2) - np.sum(y**2)) < 1e-10


def test_fwht1d_known_values():
    np.testing.assert_allclose(fwht1d(np.array([1.0, 0, 0, 0])), [0.5, 0.5, 0.5, 0.5])
    np.testing.assert_allclose(
        fwht1d(np.array([1.0, 1, 1, 1]), apply_scaling=False), [4, 0, 0, 0]
    )
    np.testing.assert_allclose(fwht1d(np.array([3.0, 5.0])), [8 / np.sqrt(2), -2 / np.sqrt(2)])


def test_fwht1d_rejects_bad_lengths():
    with pytest.raises(ValueError, match="empty array"):
        fwht1d(np.array([]))
    with pytest.raises(ValueError, match="length must be power of two"):
        fwht1d(np.ones(3))


def test_pad_to_pow2():
    padded = pad_to_pow2(np.arange(1, 6, dtype=float))
    np.testing.assert_array_equal(padded, [1, 2, 3, 4, 5, 0, 0, 0])
    np.testing.assert_array_equal(pad_to_pow2(np.array([1, 2, 3])), [1, 2, 3, 0])
    np.testing.assert_array_equal(pad_to_pow2(np.array([5])), [5])
    same = np.ones(8)
    assert pad_to_pow2(same) is same
    with pytest.raises(ValueError, match="empty array"):
        pad_to_pow2(np.array([]))


def test_plan_transform():
    plan = plan_transform(28)
    assert (plan.padded_length, plan.m) == (32, 5)
    assert plan.scale == pytest.approx(2 ** -2.5)
    assert plan_transform(1).padded_length == 1
    assert is_pow2(1) and is_pow2(64) and not is_pow2(0) and not is_pow2(12)


@pytest.mark.parametrize("shape", [(4, 4), (8, 2), (32, 16)])
def test_fwht2d_matches_matrix_product(shape, rng):
    img = rng.normal(size=shape)
    h_rows, h_cols = hadamard_matrix(shape[0]), hadamard_matrix(shape[1])
    expected = h_rows @ img @ h_cols.T / np.sqrt(shape[0] * shape[1])
    np.testing.assert_allclose(fwht2d(img), expected, rtol=0, atol=1e-12)


def test_fwht2d_pads_mnist_images_and_is_separable(rng):
    img = rng.random((28, 28))
    out = fwht2d(img)
    assert out.shape == (32, 32)
    padded = np.zeros((32, 32))
    padded[:28, :28] = img
    np.testing.assert_allclose(fwht2d(out), padded, atol=1e-10)
    np.testing.assert_allclose(fwht2d(img, rows_first=False), out, atol=1e-12)
    assert abs(np.sum(img**2) - np.sum(out**2)) < 1e-10


def test_fwht_images_transforms_each_channel(rng):
    images = rng.random((2, 3, 28, 28))
    out = fwht_images(images)
    assert out.shape == (2, 3, 32, 32)
    np.testing.assert_allclose(out[1, 2], fwht2d(images[1, 2]), atol=1e-12)


def test_transform_operation_counts():
    tally = OpTally()
    fwht1d(np.ones(8), tally=tally)
    assert (tally.adds_subs, tally.multiplies) == (8 * 3, 8)

    tally = OpTally()
    fwht1d(np.ones(16), apply_scaling=False, tally=tally)
    assert (tally.adds_subs, tally.multiplies) == (16 * 4, 0)

    tally = OpTally()
    fwht2d(np.ones((28, 28)), tally=tally)
    # 32 rows and 32 columns of length 32, five stages each.
    assert tally.adds_subs == 2 * 32 * 32 * 5
    assert tally.multiplies == 32 * 32


def test_fwht2d_of_a_constant_image():
    out = fwht2d(np.ones((4, 4)))
    assert out[0, 0] == pytest.approx(4.0)
    out[0, 0] = 0.0
    np.testing.assert_allclose(out, 0.0, atol=1e-12)
    with pytest.raises(ValueError, match="empty array"):
        fwht2d(np.zeros((0, 4)))
