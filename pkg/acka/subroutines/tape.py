import numpy as np


class BitTape:
    """Pre-recorded coin flips standing in for a ``numpy`` generator.

    Only ``integers(0, 2, size)`` is supported, which is the one draw the
    Veto and Notification inputs make; exhausting the tape is an error.
    """

    def __init__(self, bits) -> None:
        self._bits = np.asarray(bits, dtype=np.uint8).ravel()
        self._pos = 0

    def integers(self, low, high, size=None, dtype=np.int64):
        if (low, high) != (0, 2):
            msg = f"a bit tape only draws from [0, 2), not [{low}, {high})"
            raise ValueError(msg)

        shape = () if size is None else size
        count = int(np.prod(shape))
        if self._pos + count > self._bits.size:
            msg = f"bit tape exhausted after {self._pos} draws"
            raise IndexError(msg)

        out = self._bits[self._pos : self._pos + count]
        self._pos += count
        return out.reshape(shape).astype(dtype)

    @property
    def remaining(self) -> int:
        return self._bits.size - self._pos
