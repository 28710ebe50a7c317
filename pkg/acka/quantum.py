"""Sampling model of the untrusted source.

No quantum state is simulated: a detected GHZ round is drawn directly from
the joint distribution of the measurement outcomes. With every party in
the X basis the outcomes are uniform subject to their parity, which is odd
with probability ``Q_X``. Once any party measures Z, every X outcome is a
fresh uniform bit and the Z outcomes agree with a reference bit up to
independent flips.
"""

import enum
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from acka.core import xor_all
from acka.exceptions import OracleSizeError, ParamsValueError
from acka.utils import binary_entropy

logger = logging.getLogger(__name__)

ORACLE_MAX_PARTIES = 4


class Basis(enum.IntEnum):
    Z = 0
    X = 1

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class DirectRates:
    """Error rates given directly.

    :param q_x: probability of odd X parity
    :param q_z: probability that a receiver's Z bit differs from the
        reference (sender's) Z bit
    :param q_z_per_party: optional per-party override of ``q_z``, for a
        source that is noisier for some parties
    """

    q_x: float
    q_z: float
    q_z_per_party: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        rates = (self.q_x, self.q_z) + tuple(self.q_z_per_party or ())
        if not all(0 <= q < 0.5 for q in rates):
            msg = f"error rates must be in [0,1/2), got {rates}"
            raise ParamsValueError(msg)

    def effective_q_x(self, n: int) -> float:
        return self.q_x

    def effective_q_z(self) -> float:
        return self.q_z

    def z_flip_rates(self, n: int) -> np.ndarray:
        if self.q_z_per_party is None:
            return np.full(n, self.q_z)
        return np.asarray(self.q_z_per_party, dtype=np.float64)


@dataclass(frozen=True, slots=True)
class PauliPerQubit:
    """Independent phase and bit flips on every qubit."""

    q_phase: float
    q_bit: float

    def __post_init__(self):
        if not (0 <= self.q_phase < 0.5 and 0 <= self.q_bit < 0.5):
            msg = f"flip probabilities must be in [0,1/2), got {self}"
            raise ParamsValueError(msg)

    def effective_q_x(self, n: int) -> float:
        r""":math:`Q_X = (1 - (1 - 2 q_{phase})^n) / 2`."""
        return (1 - (1 - 2 * self.q_phase) ** n) / 2

    def effective_q_z(self) -> float:
        r"""Pairwise rate :math:`Q_Z = 2 q_{bit} (1 - q_{bit})`."""
        return 2 * self.q_bit * (1 - self.q_bit)


NoiseModel = Union[DirectRates, PauliPerQubit]

# honest source error rates as a share of the design rates Q_X and Q_Z
NOMINAL_NOISE_SHARE = 0.5


def nominal_source(q_x: float, q_z: float) -> DirectRates:
    """Default source of a run designed for ``q_x`` and ``q_z``.

    Both rates are scaled by ``NOMINAL_NOISE_SHARE``; at the threshold
    itself about half of the honest runs would abort.
    """
    return DirectRates(NOMINAL_NOISE_SHARE * q_x, NOMINAL_NOISE_SHARE * q_z)


@dataclass(slots=True)
class RoundSample:
    detected: bool
    outcomes: Optional[np.ndarray] = None


def _z_reference(is_z: np.ndarray, reference: Optional[int]) -> np.ndarray:
    first = np.argmax(is_z, axis=0)
    if reference is None:
        return first
    return np.where(is_z[reference], reference, first)


def sample_detected_rounds(
    noise: NoiseModel,
    bases: np.ndarray,
    rng: np.random.Generator,
    reference: Optional[int] = None,
) -> np.ndarray:
    """Outcomes of detected GHZ rounds.

    :param bases: ``(n, rounds)`` array of :class:`Basis` values
    :param reference: party whose Z bit the others are compared against
        under :class:`DirectRates` (the sender); defaults to the first Z
        measurer of each round
    :returns: ``(n, rounds)`` outcome bits
    """
    bases = np.asarray(bases, dtype=np.uint8)
    n, rounds = bases.shape
    is_z = bases == Basis.Z
    out = rng.integers(0, 2, size=(n, rounds), dtype=np.uint8)

    all_x = ~is_z.any(axis=0)
    cols = np.flatnonzero(all_x)
    if cols.size:
        if isinstance(noise, PauliPerQubit):
            flips = rng.random((n, cols.size)) < noise.q_phase
            odd = xor_all(flips.astype(np.uint8))
        else:
            odd = (rng.random(cols.size) < noise.q_x).astype(np.uint8)
        out[-1, cols] = xor_all(out[:-1, cols]) ^ odd

    if cols.size < rounds:
        if isinstance(noise, PauliPerQubit):
            common = rng.integers(0, 2, size=rounds, dtype=np.uint8)
            flips = rng.random((n, rounds)) < noise.q_bit
            z_bits = common[None, :] ^ flips.astype(np.uint8)
        else:
            ref = _z_reference(is_z, reference)
            ref_bits = out[ref, np.arange(rounds)]
            flips = rng.random((n, rounds)) < noise.z_flip_rates(n)[:, None]
            flips[ref, np.arange(rounds)] = False
            z_bits = ref_bits[None, :] ^ flips.astype(np.uint8)
        out = np.where(is_z, z_bits, out).astype(np.uint8)

    return out


def sample_ghz_round(
    n: int,
    eta: float,
    noise: NoiseModel,
    bases: Sequence[int],
    rng: np.random.Generator,
    reference: Optional[int] = None,
) -> RoundSample:
    """One emission of the source; detected with probability ``eta**n``."""
    if rng.random() >= eta**n:
        return RoundSample(False)

    column = np.asarray(bases, dtype=np.uint8).reshape(n, 1)
    outcomes = sample_detected_rounds(noise, column, rng, reference)
    return RoundSample(True, outcomes[:, 0])


def detection_attempts(
    rounds: int, n: int, eta: float, rng: np.random.Generator
) -> int:
    """Emissions needed until ``rounds`` GHZ states are detected by all
    ``n`` parties."""
    if rounds == 0:
        return 0
    return rounds + int(rng.negative_binomial(rounds, eta**n))


def bell_secret_bit_supply(
    n: int, eta: float, q_xb: float, q_zb: float
) -> float:
    r"""Secret bits per network use refilling the private channels.

    .. math::

        \lfloor n/2 \rfloor \eta^2 \left[1 - h(Q_{Xb}) - h(Q_{Zb})\right]

    Zero when the bracket is not positive.
    """
    bracket = 1 - binary_entropy(q_xb) - binary_entropy(q_zb)
    if bracket <= 0:
        logger.warning(
            "Bell pairs with Q_Xb=%g, Q_Zb=%g yield no secret bits", q_xb, q_zb
        )
        return 0.0
    return (n // 2) * eta**2 * bracket


def _flip_prob(bit: int, q: float) -> float:
    return q if bit else 1 - q


def joint_distribution_oracle(
    n: int, noise: NoiseModel, bases: Sequence[int], reference: int = 0
) -> dict[tuple[int, ...], float]:
    """Exact outcome distribution of one detected round, for ``n <= 4``."""
    if n > ORACLE_MAX_PARTIES:
        msg = f"oracle enumerates 2**n outcomes, n must be <= 4, got {n}"
        raise OracleSizeError(msg)

    bases = [Basis(b) for b in bases]
    z_parties = [t for t in range(n) if bases[t] is Basis.Z]
    x_parties = [t for t in range(n) if bases[t] is Basis.X]

    table = {}
    for bits in itertools.product((0, 1), repeat=n):
        if not z_parties:
            q_x = noise.effective_q_x(n)
            odd = sum(bits) % 2
            prob = _flip_prob(odd, q_x) / 2 ** (n - 1)

        else:
            prob = 0.5 ** len(x_parties)
            if isinstance(noise, PauliPerQubit):
                prob *= sum(
                    0.5
                    * math.prod(
                        _flip_prob(bits[t] ^ c, noise.q_bit) for t in z_parties
                    )
                    for c in (0, 1)
                )
            else:
                ref = reference if reference in z_parties else z_parties[0]
                rates = noise.z_flip_rates(n)
                prob *= 0.5 * math.prod(
                    _flip_prob(bits[t] ^ bits[ref], rates[t])
                    for t in z_parties
                    if t != ref
                )
        table[bits] = prob

    return table
