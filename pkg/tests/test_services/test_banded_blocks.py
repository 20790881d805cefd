"""
Tests for Banded Block Storage
"""

import numpy as np
import pytest

from src.services.banded_blocks import BandedBlocks
from src.services.rz_model import coupling_matrix
from src.utils.error_handling import InvalidArgumentError


def random_blocks(rng, r: int, k: int, w: int) -> BandedBlocks:
    """Random banded blocks with out-of-range diagonal slots zeroed."""
    data = rng.standard_normal((r, 2, 2, 2 * w + 1, k)) + 1j * rng.standard_normal(
        (r, 2, 2, 2 * w + 1, k)
    )
    for d in range(-w, w + 1):
        i = np.arange(k)
        data[:, :, :, w + d, (i + d < 0) | (i + d >= k)] = 0.0
    return BandedBlocks(data)


def sigma1_coupling(k: int) -> np.ndarray:
    return np.kron(np.array([[0.0, 1.0], [1.0, 0.0]]), coupling_matrix(k))


class TestConstruction:
    """Test construction and shape checks."""

    def test_identity(self):
        """identity(k) is the single block I_N."""
        blocks = BandedBlocks.identity(3)
        assert (blocks.rank, blocks.k, blocks.N, blocks.width) == (1, 3, 6, 0)
        np.testing.assert_array_equal(blocks.to_dense()[0], np.eye(6))
        assert blocks.nnz() == 6
        assert blocks.bandwidth() == 0

    def test_bad_shape(self):
        """Data must be (r, 2, 2, 2w+1, k)."""
        with pytest.raises(InvalidArgumentError):
            BandedBlocks(np.zeros((1, 2, 2, 2, 3)))
        with pytest.raises(InvalidArgumentError):
            BandedBlocks(np.zeros((1, 3, 2, 1, 3)))


class TestOperations:
    """Compare every operation with its dense counterpart."""

    def test_apply_coupling(self, rng):
        """Left multiplication by sigma1 (x) M_k."""
        blocks = random_blocks(rng, 2, 5, 1)
        dense = blocks.to_dense()
        coupled = blocks.apply_coupling()
        assert coupled.width == 2
        np.testing.assert_allclose(coupled.to_dense(), sigma1_coupling(5) @ dense, atol=1e-14)

    def test_repeated_coupling_saturates_width(self):
        """Bandwidth stops growing at k - 1."""
        blocks = BandedBlocks.identity(3)
        expected = np.eye(6)
        for _ in range(5):
            blocks = blocks.apply_coupling()
            expected = sigma1_coupling(3) @ expected
        assert blocks.width == 2
        np.testing.assert_allclose(blocks.to_dense()[0], expected)

    def test_apply_sign(self, rng):
        """Left multiplication by sigma3 (x) I_k."""
        blocks = random_blocks(rng, 2, 4, 1)
        sigma3 = np.kron(np.diag([1.0, -1.0]), np.eye(4))
        np.testing.assert_allclose(blocks.apply_sign().to_dense(), sigma3 @ blocks.to_dense())

    @pytest.mark.parametrize("block_row", [0, 1])
    def test_restrict(self, rng, block_row):
        """D1 keeps the top block row and D2 the bottom one."""
        blocks = random_blocks(rng, 1, 3, 1)
        selector = np.zeros(6)
        selector[block_row * 3 : (block_row + 1) * 3] = 1.0
        np.testing.assert_allclose(
            blocks.restrict(block_row).to_dense(), np.diag(selector) @ blocks.to_dense()
        )

    def test_restrict_bad_row(self):
        with pytest.raises(InvalidArgumentError):
            BandedBlocks.identity(2).restrict(2)

    def test_concat_pads_widths(self, rng):
        """Blocks of different widths are stacked after padding."""
        narrow = BandedBlocks.identity(4)
        wide = random_blocks(rng, 2, 4, 2)
        stacked = BandedBlocks.concat([narrow, wide])
        assert stacked.rank == 3
        assert stacked.width == 2
        dense = stacked.to_dense()
        np.testing.assert_allclose(dense[0], np.eye(8))
        np.testing.assert_allclose(dense[1:], wide.to_dense())

    def test_concat_empty(self):
        with pytest.raises(InvalidArgumentError):
            BandedBlocks.concat([])

    def test_combine(self, rng):
        """New block p is sum_q W[q, p] R_q."""
        blocks = random_blocks(rng, 3, 4, 1)
        W = rng.standard_normal((3, 2))
        expected = np.einsum("qp,qij->pij", W, blocks.to_dense())
        np.testing.assert_allclose(blocks.combine(W).to_dense(), expected, atol=1e-14)

    def test_combine_vector_and_mismatch(self, rng):
        """A weight vector gives one block; row count must match the rank."""
        blocks = random_blocks(rng, 3, 2, 1)
        assert blocks.combine(np.ones(3)).rank == 1
        with pytest.raises(InvalidArgumentError):
            blocks.combine(np.ones(2))

    def test_first_entries_and_columns(self, rng):
        """Entry (0, 0) and column j of every block."""
        blocks = random_blocks(rng, 2, 4, 2)
        dense = blocks.to_dense()
        np.testing.assert_allclose(blocks.first_entries(), dense[:, 0, 0])
        for j in range(8):
            np.testing.assert_allclose(blocks.column(j), dense[:, :, j].T)
        with pytest.raises(InvalidArgumentError):
            blocks.column(8)

    def test_bandwidth_and_finiteness(self):
        """Bandwidth reports the widest nonzero diagonal."""
        blocks = BandedBlocks.identity(4).apply_coupling()
        assert blocks.bandwidth() == 1
        assert blocks.all_finite()
        blocks.data[0, 0, 1, 0, 1] = np.nan
        assert not blocks.all_finite()
