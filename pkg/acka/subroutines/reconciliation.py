r"""Error correction backends.

Both backends leak exactly :math:`\lceil N h(Q_Z) \rceil` syndrome bits for
an ``N``-bit key. The ideal backend hands Bob Alice's key out of band and
only meters the leakage; the block backend is a real decoder for short keys
(random linear syndrome per block, minimum-weight coset leader lookup).
Equality of the corrected keys is always confirmed afterwards by the
two-universal hash of the protocol, never by the backend.
"""

import abc
import functools
import itertools
import logging
from typing import Optional

import numpy as np

from acka.subroutines import HashFamilyIndex
from acka.subroutines.hashing import toeplitz_matrix, two_universal_hash
from acka.utils import binary_entropy, ceil_

logger = logging.getLogger(__name__)

DEFAULT_BLOCK = 32
DEFAULT_MAX_WEIGHT = 3


def syndrome_length(key_len: int, q_z: float) -> int:
    return ceil_(key_len * binary_entropy(q_z))


class Reconciler(abc.ABC):
    """One reconciliation session between Alice and her receivers.

    :param q_z: declared bit error rate; fixes the syndrome length
    :param seed: seed of the public syndrome matrices
    """

    name = "reconciler"

    def __init__(self, q_z: float, seed: int = 0) -> None:
        self.q_z = q_z
        self.seed = seed

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(q_z={self.q_z})"

    def syndrome_length(self, key_len: int) -> int:
        return syndrome_length(key_len, self.q_z)

    @abc.abstractmethod
    def syndrome(self, key: np.ndarray) -> np.ndarray:
        """Alice's syndrome of exactly :meth:`syndrome_length` bits."""

    @abc.abstractmethod
    def correct(
        self, noisy: np.ndarray, syndrome: np.ndarray
    ) -> Optional[np.ndarray]:
        """Bob's corrected key, or ``None`` when decoding fails."""


class IdealReconciler(Reconciler):
    """Out-of-band reconciliation that meters the syndrome length.

    The syndrome is a hash of the key; a receiver presenting that exact
    syndrome gets Alice's key, any other syndrome leaves the noisy key
    unchanged.
    """

    name = "ideal"

    def __init__(self, q_z: float, seed: int = 0) -> None:
        super().__init__(q_z, seed)
        self._registered: dict[bytes, np.ndarray] = {}

    def syndrome(self, key: np.ndarray) -> np.ndarray:
        out_len = self.syndrome_length(key.size)
        rng = np.random.default_rng([self.seed, key.size])
        idx = HashFamilyIndex(
            rng.integers(0, 2, size=key.size + out_len - 1, dtype=np.uint8),
            key.size,
            out_len,
        )
        syn = (
            two_universal_hash(idx, key)
            if out_len
            else np.zeros(0, dtype=np.uint8)
        )
        self._registered[syn.tobytes()] = key.copy()
        return syn

    def correct(
        self, noisy: np.ndarray, syndrome: np.ndarray
    ) -> Optional[np.ndarray]:
        key = self._registered.get(np.asarray(syndrome, np.uint8).tobytes())
        if key is None or key.size != noisy.size:
            return noisy.copy()
        return key.copy()


@functools.lru_cache(maxsize=64)
def _coset_table(matrix_bytes: bytes, rows: int, cols: int, max_weight: int):
    H = np.frombuffer(matrix_bytes, dtype=np.uint8).reshape(rows, cols)
    weights = 1 << np.arange(rows, dtype=np.int64)
    table: dict[int, tuple[int, ...]] = {}
    for w in range(min(max_weight, cols) + 1):
        for support in itertools.combinations(range(cols), w):
            col_sum = H[:, list(support)].sum(axis=1) % 2
            table.setdefault(int(col_sum @ weights), support)
    return table


class BlockReconciler(Reconciler):
    """Syndrome decoding over short blocks.

    The key is cut into blocks of ``block`` bits; the total syndrome budget
    is spread as evenly as possible over the blocks and each block is
    decoded to the lowest-weight error pattern (up to ``max_weight``)
    matching its syndrome difference.
    """

    name = "block"

    def __init__(
        self,
        q_z: float,
        seed: int = 0,
        block: int = DEFAULT_BLOCK,
        max_weight: int = DEFAULT_MAX_WEIGHT,
    ) -> None:
        super().__init__(q_z, seed)
        self.block = block
        self.max_weight = max_weight

    def _layout(self, key_len: int) -> list[tuple[int, int, int]]:
        """``(start, length, syndrome_bits)`` per block."""
        starts = list(range(0, key_len, self.block))
        total = self.syndrome_length(key_len)
        base, extra = divmod(total, len(starts))
        return [
            (s, min(self.block, key_len - s), base + (i < extra))
            for i, s in enumerate(starts)
        ]

    def _matrix(self, length: int, rows: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, length, rows])
        seed = rng.integers(0, 2, size=length + rows - 1, dtype=np.uint8)
        return toeplitz_matrix(HashFamilyIndex(seed, length, rows))

    def _block_syndromes(self, key: np.ndarray):
        for start, length, rows in self._layout(key.size):
            H = self._matrix(length, rows)
            yield H, (H @ key[start : start + length]) % 2

    def syndrome(self, key: np.ndarray) -> np.ndarray:
        parts = [syn for _, syn in self._block_syndromes(key)]
        return np.concatenate(parts).astype(np.uint8)

    def correct(
        self, noisy: np.ndarray, syndrome: np.ndarray
    ) -> Optional[np.ndarray]:
        corrected = noisy.copy()
        offset = 0
        for (start, length, rows), (H, own) in zip(
            self._layout(noisy.size), self._block_syndromes(noisy)
        ):
            diff = own ^ syndrome[offset : offset + rows]
            offset += rows
            if rows == 0:
                continue

            table = _coset_table(H.tobytes(), rows, length, self.max_weight)
            key = int(diff @ (1 << np.arange(rows, dtype=np.int64)))
            support = table.get(key)
            if support is None:
                logger.debug("block at %d not decodable", start)
                return None
            corrected[start + np.array(support, dtype=np.int64)] ^= 1

        return corrected


def make_reconciler(name: str, q_z: float, seed: int = 0) -> Reconciler:
    if name == IdealReconciler.name:
        return IdealReconciler(q_z, seed)
    elif name == BlockReconciler.name:
        return BlockReconciler(q_z, seed)
    else:
        msg = f"unknown reconciler {name!r}; use 'ideal' or 'block'"
        raise ValueError(msg)
