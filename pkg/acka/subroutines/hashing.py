r"""Toeplitz two-universal hashing.

The family member indexed by a seed :math:`s` of ``in_len + out_len - 1``
bits is the binary Toeplitz matrix :math:`T_{ij} = s_{i - j + in\_len - 1}`,
so hashing is one linear convolution over the integers reduced mod 2.
"""

import numpy as np
from scipy import signal

from acka.exceptions import HashLengthError
from acka.subroutines import HashFamilyIndex


def toeplitz_matrix(idx: HashFamilyIndex) -> np.ndarray:
    """Explicit ``(out_len, in_len)`` matrix of the family member."""
    rows = np.arange(idx.out_len)[:, None]
    cols = np.arange(idx.in_len)[None, :]
    return idx.seed[rows - cols + idx.in_len - 1].astype(np.uint8)


def two_universal_hash(idx: HashFamilyIndex, bits) -> np.ndarray:
    """Hash ``bits`` (length ``idx.in_len``) to ``idx.out_len`` bits."""
    x = np.asarray(bits, dtype=np.int64)
    if x.size != idx.in_len:
        msg = f"hash expects {idx.in_len} input bits, got {x.size}"
        raise HashLengthError(msg)

    if idx.out_len == 0:
        return np.zeros(0, dtype=np.uint8)

    full = signal.convolve(idx.seed.astype(np.int64), x, method="auto")
    window = full[idx.in_len - 1 : idx.in_len - 1 + idx.out_len]
    return (window % 2).astype(np.uint8)
