"""
Banded Block Storage

Storage for the right factor of the operator iteration, R = [R_1, ..., R_r] with
each R_q an N x N matrix made of 2 x 2 banded k x k sub-blocks (N = 2k).

Diagonals are kept per sub-block: ``data[q, a, b, w + d, i]`` is the entry
(R_q)_{ab}[i, i + d] for -w <= d <= w. Positions with i + d outside [0, k)
are stored as zeros. Every operation the iteration needs costs O(r w N).
"""

from typing import Iterable, Optional

import numpy as np

from src.utils.error_handling import InvalidArgumentError


class BandedBlocks:
    """r blocks of size N x N with banded k x k sub-blocks."""

    def __init__(self, data: np.ndarray):
        if data.ndim != 5 or data.shape[1:3] != (2, 2) or data.shape[3] % 2 != 1:
            raise InvalidArgumentError(
                f"banded block data must have shape (r, 2, 2, 2w+1, k), got {data.shape}",
                field="data",
            )
        self.data = data

    @classmethod
    def identity(cls, k: int, dtype: type = complex) -> "BandedBlocks":
        """The single block I_N."""
        data = np.zeros((1, 2, 2, 1, k), dtype=dtype)
        data[0, 0, 0, 0, :] = 1.0
        data[0, 1, 1, 0, :] = 1.0
        return cls(data)

    @property
    def rank(self) -> int:
        return int(self.data.shape[0])

    @property
    def k(self) -> int:
        return int(self.data.shape[4])

    @property
    def N(self) -> int:
        return 2 * self.k

    @property
    def width(self) -> int:
        """Stored half-bandwidth w."""
        return (self.data.shape[3] - 1) // 2

    def _padded(self, width: int) -> np.ndarray:
        w = self.width
        if width == w:
            return self.data
        if width < w:
            return self.data[:, :, :, w - width : w + width + 1, :]
        out = np.zeros(self.data.shape[:3] + (2 * width + 1, self.k), dtype=self.data.dtype)
        out[:, :, :, width - w : width + w + 1, :] = self.data
        return out

    def _trimmed(self) -> "BandedBlocks":
        cap = max(self.k - 1, 0)
        if self.width <= cap:
            return self
        return BandedBlocks(self._padded(cap).copy())

    def apply_coupling(self) -> "BandedBlocks":
        """Left multiplication by sigma1 (x) M_k; the half-bandwidth grows by one."""
        padded = self._padded(self.width + 1)
        swapped = padded[:, ::-1]
        out = np.zeros_like(padded)
        # (M_k B)[i, i + d] = B[i - 1, i + d] + B[i + 1, i + d]
        out[..., :-1, 1:] += swapped[..., 1:, :-1]
        out[..., 1:, :-1] += swapped[..., :-1, 1:]
        return BandedBlocks(out)._trimmed()

    def apply_sign(self) -> "BandedBlocks":
        """Left multiplication by sigma3 (x) I_k."""
        out = self.data.copy()
        out[:, 1] *= -1
        return BandedBlocks(out)

    def restrict(self, block_row: int) -> "BandedBlocks":
        """Left multiplication by D1 (block_row=0) or D2 (block_row=1)."""
        if block_row not in (0, 1):
            raise InvalidArgumentError("block_row must be 0 or 1", field="block_row")
        out = np.zeros_like(self.data)
        out[:, block_row] = self.data[:, block_row]
        return BandedBlocks(out)

    @staticmethod
    def concat(parts: Iterable["BandedBlocks"]) -> "BandedBlocks":
        """Stack blocks side by side: [R, S, ...]."""
        parts = list(parts)
        if not parts:
            raise InvalidArgumentError("nothing to concatenate", field="parts")
        width = max(p.width for p in parts)
        return BandedBlocks(np.concatenate([p._padded(width) for p in parts], axis=0))

    def combine(self, weights: np.ndarray) -> "BandedBlocks":
        """R (W (x) I_N): new block p is sum_q W[q, p] R_q."""
        weights = np.asarray(weights)
        if weights.ndim == 1:
            weights = weights[:, None]
        if weights.shape[0] != self.rank:
            raise InvalidArgumentError(
                f"weights have {weights.shape[0]} rows for {self.rank} blocks", field="weights"
            )
        return BandedBlocks(np.tensordot(weights, self.data, axes=(0, 0)))

    def first_entries(self) -> np.ndarray:
        """(R_q)[0, 0] for every block."""
        return self.data[:, 0, 0, self.width, 0].copy()

    def column(self, j: int) -> np.ndarray:
        """N x r matrix whose column q is R_q e_j."""
        if not 0 <= j < self.N:
            raise InvalidArgumentError(f"column {j} out of range for N={self.N}", field="j")
        k, w = self.k, self.width
        b, jj = divmod(j, k)
        offsets = np.arange(-w, w + 1)
        rows = jj - offsets
        valid = (rows >= 0) & (rows < k)
        out = np.zeros((self.N, self.rank), dtype=self.data.dtype)
        for a in (0, 1):
            out[a * k + rows[valid], :] = self.data[:, a, b, w + offsets[valid], rows[valid]].T
        return out

    def to_dense(self, blocks: Optional[slice] = None) -> np.ndarray:
        """Dense (r, N, N) array of the blocks."""
        data = self.data if blocks is None else self.data[blocks]
        k, w = self.k, self.width
        out = np.zeros((data.shape[0], self.N, self.N), dtype=data.dtype)
        for d in range(-w, w + 1):
            i = np.arange(max(0, -d), min(k, k - d))
            if i.size == 0:
                continue
            for a in (0, 1):
                for b in (0, 1):
                    out[:, a * k + i, b * k + i + d] = data[:, a, b, w + d, i]
        return out

    def nnz(self) -> int:
        return int(np.count_nonzero(self.data))

    def bandwidth(self) -> int:
        """Largest |d| with a nonzero entry on diagonal d of any sub-block."""
        nonzero = np.any(self.data != 0, axis=(0, 1, 2, 4))
        if not nonzero.any():
            return 0
        return int(np.abs(np.arange(-self.width, self.width + 1))[nonzero].max())

    def all_finite(self) -> bool:
        return bool(np.isfinite(self.data).all())
