import math
from typing import Union

import numpy as np
from scipy import special

from acka import SIGNIFICANT_DIGITS
from acka.exceptions import DomainError

ArrayOrFloat = Union[float, np.ndarray]

LN2 = math.log(2)
FIBRE_ATTENUATION = 0.17  # dB/km

# slack for log2 of exact powers of two computed in floating point
_LOG_SLACK = 1e-9


def binary_entropy(x: ArrayOrFloat) -> ArrayOrFloat:
    r"""Binary entropy in bits.

    .. math::

        h(x) = -x \log_2 x - (1 - x) \log_2 (1 - x)

    with :math:`h(0) = h(1) = 0`.

    :param x: probability, scalar or array
    :raises DomainError: if any ``x`` is outside ``[0, 1]``
    """
    arr = np.asarray(x, dtype=np.float64)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        msg = f"binary entropy is defined on [0, 1], got {x}"
        raise DomainError(msg)

    h = (special.entr(arr) + special.entr(1.0 - arr)) / LN2
    return float(h) if h.ndim == 0 else h


def transmittance(d: float, atten: float = FIBRE_ATTENUATION) -> float:
    r"""Fibre transmittance :math:`\eta = 10^{-\alpha d / 10}`.

    :param d: fibre length (km)
    :param atten: attenuation coefficient (dB/km), defaults to 0.17
    """
    if d < 0 or atten < 0:
        msg = f"length and attenuation must be non-negative, got {d}, {atten}"
        raise DomainError(msg)

    return 10 ** (-atten * d / 10)


def log_binomial(n: ArrayOrFloat, k: ArrayOrFloat) -> ArrayOrFloat:
    """Natural log of the binomial coefficient with real arguments, through
    log-gamma so that ``n`` up to ``1e12`` does not overflow."""
    return (
        special.gammaln(np.add(n, 1))
        - special.gammaln(np.add(k, 1))
        - special.gammaln(np.subtract(n, k) + 1)
    )


def ceil_log2(x: float) -> int:
    """``ceil(log2(x))`` for ``x >= 1``; exact powers of two are not
    rounded up."""
    if x < 1:
        msg = f"ceil_log2 expects x >= 1, got {x}"
        raise DomainError(msg)

    return max(0, math.ceil(math.log2(x) - _LOG_SLACK))


def ceil_(x: float) -> int:
    """Ceiling that ignores floating point noise just above an integer."""
    return math.ceil(x - _LOG_SLACK)


def bits_to_hex(bits: np.ndarray) -> str:
    """Hex digest of a bit vector, zero padded on the right to a whole
    number of bytes; empty vectors give ``"-"``."""
    if bits.size == 0:
        return "-"

    return np.packbits(bits.astype(np.uint8)).tobytes().hex()


def bits_to_int(bits: np.ndarray) -> int:
    """Most significant bit first."""
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def int_to_bits(value: int, width: int) -> np.ndarray:
    if value < 0 or value >> width:
        msg = f"{value} does not fit in {width} bits"
        raise DomainError(msg)

    out = np.zeros(width, dtype=np.uint8)
    for i in range(width - 1, -1, -1):
        out[i] = value & 1
        value >>= 1
    return out


def sig(x: float, digits: int = SIGNIFICANT_DIGITS) -> str:
    """Format ``x`` with a fixed number of significant digits."""
    return f"{x:.{digits}g}"
