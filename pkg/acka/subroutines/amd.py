r"""Algebraic manipulation detection code.

Systematic construction over :math:`GF(2^k)`: the message is cut into
``d`` blocks :math:`x_1, \dots, x_d` of ``k`` bits (``d`` odd, zero padded),
a uniformly random field element ``r`` is drawn and the codeword is
``(x, r, f(x, r))`` with

.. math::

    f(x, r) = r^{d+2} + \sum_{i=1}^{d} x_i r^i .

An offset fixed independently of the codeword passes the check with
probability at most :math:`(d + 1) / 2^k`. The field size is
``k = ceil(log2 max(|x|, 2)) + ceil(log2 1/eps_enc)``, which keeps
``(d + 1) / 2^k <= eps_enc`` for every message length; the codeword length
is :func:`acka.core.amd_codeword_length`.
"""

import functools
import math
from typing import Optional

import galois
import numpy as np

from acka.core import amd_codeword_length
from acka.exceptions import ParamsValueError

MAX_FIELD_BITS = 62
MAX_ENUMERATED_BITS = 12


@functools.lru_cache(maxsize=None)
def _field(k: int):
    return galois.GF(2**k)


class AMDCode:
    """AMD code for messages of ``message_len`` bits.

    :param message_len: message length in bits
    :param eps_enc: failure probability against data-independent offsets
    """

    def __init__(self, message_len: int, eps_enc: float) -> None:
        self.message_len = message_len
        self.eps_enc = eps_enc
        self.codeword_len = amd_codeword_length(message_len, eps_enc)
        self.field_bits = (self.codeword_len - message_len) // 2
        if self.field_bits > MAX_FIELD_BITS:
            msg = (
                f"AMD field of {self.field_bits} bits exceeds "
                f"{MAX_FIELD_BITS}; raise eps_enc or shorten the message"
            )
            raise ParamsValueError(msg)

        # d + 2 must be odd in characteristic 2; pad with a zero block
        blocks = math.ceil(message_len / self.field_bits)
        self.blocks = blocks + 1 - blocks % 2
        self.GF = _field(self.field_bits)
        self._shifts = np.arange(self.field_bits - 1, -1, -1, dtype=np.uint64)

    def __repr__(self) -> str:
        return (
            f"{self.__class__.__name__}(message_len={self.message_len}, "
            f"eps_enc={self.eps_enc:g})"
        )

    def _pack(self, bits: np.ndarray) -> np.ndarray:
        """``(..., k)`` bits to field integers, most significant first."""
        words = bits.astype(np.uint64) << self._shifts
        return words.sum(axis=-1).astype(np.int64)

    def _unpack(self, ints: np.ndarray) -> np.ndarray:
        words = np.asarray(ints, dtype=np.uint64)[..., None] >> self._shifts
        return (words & np.uint64(1)).astype(np.uint8)

    def _blocks(self, msgs: np.ndarray) -> np.ndarray:
        padded = np.zeros(
            (msgs.shape[0], self.blocks * self.field_bits), dtype=np.uint8
        )
        padded[:, : self.message_len] = msgs
        return self._pack(padded.reshape(msgs.shape[0], self.blocks, -1))

    def _tag(self, x: np.ndarray, r: np.ndarray) -> np.ndarray:
        GF = self.GF
        x, r = GF(x), GF(r)
        acc = r.copy()  # leading coefficient 1 times r
        for i in range(self.blocks - 1, -1, -1):
            acc = acc * r + x[:, i]
        return np.asarray((acc * r).view(np.ndarray), dtype=np.int64)

    def _verify(
        self, x: np.ndarray, r: np.ndarray, tag: np.ndarray
    ) -> np.ndarray:
        return self._tag(x, r) == tag

    def encode_batch(self, msgs, rng: np.random.Generator) -> np.ndarray:
        """Encode ``(batch, message_len)`` bits into codewords."""
        msgs = np.atleast_2d(np.asarray(msgs, dtype=np.uint8))
        x = self._blocks(msgs)
        r = rng.integers(
            0, 2**self.field_bits, size=msgs.shape[0], dtype=np.int64
        )
        tag = self._tag(x, r)
        return np.concatenate(
            [msgs, self._unpack(r), self._unpack(tag)], axis=1
        ).astype(np.uint8)

    def decode_batch(self, codewords) -> tuple[np.ndarray, np.ndarray]:
        """Decode codewords; returns ``(messages, ok)`` where ``ok`` is
        False for rejected (tampered) codewords."""
        cw = np.atleast_2d(np.asarray(codewords, dtype=np.uint8))
        if cw.shape[1] != self.codeword_len:
            got = cw.shape[1]
            msg = f"codeword must have {self.codeword_len} bits, got {got}"
            raise ParamsValueError(msg)

        k, m = self.field_bits, self.message_len
        msgs = cw[:, :m]
        r = self._pack(cw[:, m : m + k])
        tag = self._pack(cw[:, m + k :])
        return msgs, self._verify(self._blocks(msgs), r, tag)

    def encode(self, msg, rng: np.random.Generator) -> np.ndarray:
        return self.encode_batch(np.asarray(msg)[None, :], rng)[0]

    def decode(self, codeword) -> Optional[np.ndarray]:
        """Message, or ``None`` when manipulation is detected."""
        msgs, ok = self.decode_batch(np.asarray(codeword)[None, :])
        return msgs[0].copy() if ok[0] else None

    def worst_offset_acceptance(self) -> float:
        """Largest share of ``r`` values for which a non-zero offset goes
        undetected, maximised over every message and every offset.

        Enumerates all codewords and offsets, so only codes of at most
        ``MAX_ENUMERATED_BITS`` bits are accepted.
        """
        if self.codeword_len > MAX_ENUMERATED_BITS:
            msg = (
                f"cannot enumerate {self.codeword_len}-bit codewords, "
                f"at most {MAX_ENUMERATED_BITS}"
            )
            raise ParamsValueError(msg)

        m, k = self.message_len, self.field_bits
        msgs = np.repeat(_all_bits(m), 2**k, axis=0)
        r = np.tile(np.arange(2**k, dtype=np.int64), 2**m)
        tag = self._tag(self._blocks(msgs), r)
        codewords = np.concatenate(
            [msgs, self._unpack(r), self._unpack(tag)], axis=1
        ).astype(np.uint8)

        offsets = _all_bits(self.codeword_len)[1:]
        tampered = offsets[:, None, :] ^ codewords[None, :, :]
        _, ok = self.decode_batch(tampered.reshape(-1, self.codeword_len))
        accepted = ok.reshape(len(offsets), 2**m, 2**k).sum(axis=2)
        return float(accepted.max()) / 2**k


def _all_bits(width: int) -> np.ndarray:
    """Every ``width``-bit string, one per row, in counting order."""
    shifts = np.arange(width - 1, -1, -1)
    return ((np.arange(2**width)[:, None] >> shifts) & 1).astype(np.uint8)


def amd_encode(msg, eps_enc: float, rng: np.random.Generator) -> np.ndarray:
    msg = np.asarray(msg, dtype=np.uint8)
    return AMDCode(msg.size, eps_enc).encode(msg, rng)


def amd_decode(
    codeword, message_len: int, eps_enc: float
) -> Optional[np.ndarray]:
    return AMDCode(message_len, eps_enc).decode(codeword)
