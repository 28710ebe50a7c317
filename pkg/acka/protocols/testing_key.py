r"""Testing key: the round schedule compressed to :math:`\lceil L h(p) \rceil`
bits.

The sender's schedule marks exactly ``w = L - ceil(L (1 - p))`` rounds as
test rounds. Such a schedule is one of :math:`\binom{L}{w}` strings and is
stored as its rank in the combinatorial number system,

.. math::

    \mathrm{rank}(c_1 < \dots < c_w) = \sum_{i=1}^{w} \binom{c_i}{i},

written on ``key_len`` bits. Ranks that do not fit are never sampled.
"""

import logging
import math

import numpy as np

from acka.exceptions import DomainError
from acka.utils import bits_to_int, int_to_bits

logger = logging.getLogger(__name__)


def compress_schedule(schedule, key_len: int) -> np.ndarray:
    """Rank of ``schedule`` (1 = test round) on ``key_len`` bits."""
    positions = np.flatnonzero(np.asarray(schedule))
    rank = sum(math.comb(int(c), i + 1) for i, c in enumerate(positions))
    return int_to_bits(rank, key_len)


def expand_schedule(key, L: int, w: int) -> np.ndarray:
    """Schedule of ``L`` rounds with ``w`` test rounds encoded by ``key``."""
    rank = bits_to_int(np.asarray(key))
    if rank >= math.comb(L, w):
        msg = f"rank {rank} is not a schedule of {w} out of {L} rounds"
        raise DomainError(msg)

    schedule = np.zeros(L, dtype=np.uint8)
    top = L
    for i in range(w, 0, -1):
        c = top - 1
        value = math.comb(c, i)
        while value > rank:
            # C(c - 1, i) from C(c, i)
            value = value * (c - i) // c
            c -= 1
        schedule[c] = 1
        rank -= value
        top = c
    return schedule


def _uniform_below(bound: int, rng: np.random.Generator) -> int:
    width = max(1, (bound - 1).bit_length())
    nbytes = (width + 7) // 8
    while True:
        raw = int.from_bytes(rng.bytes(nbytes), "big")
        value = raw >> (8 * nbytes - width)
        if value < bound:
            return value


def sample_schedule(
    L: int, w: int, key_len: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform schedule among those whose rank fits in ``key_len`` bits.

    :returns: ``(schedule, testing_key)``
    """
    total = math.comb(L, w)
    bound = min(total, 1 << key_len)
    if bound < total:
        logger.warning(
            "testing key of %d bits covers %.3g of the schedules",
            key_len,
            bound / total,
        )

    rank = _uniform_below(bound, rng)
    key = int_to_bits(rank, key_len)
    return expand_schedule(key, L, w), key
