"""Shared domain types, parameter validation and bit-length bookkeeping.

Bit strings are ``numpy`` arrays of dtype ``uint8`` holding 0/1 values.
Every length derived from a real-valued formula is rounded up once, here,
so that simulated ledgers and analytic counts agree to the bit.
"""

import dataclasses
from dataclasses import dataclass
from typing import NewType, Union

import numpy as np

from acka.exceptions import ParamsValueError
from acka.utils import binary_entropy, ceil_, ceil_log2

PartyId = NewType("PartyId", int)
BitString = np.ndarray

_SEED_LIMIT = 2**64


@dataclass(frozen=True, slots=True)
class Sender:
    receivers: frozenset[int]

    def __str__(self) -> str:
        return f"sender(receivers={sorted(self.receivers)})"


@dataclass(frozen=True, slots=True)
class Receiver:
    def __str__(self) -> str:
        return "receiver"


@dataclass(frozen=True, slots=True)
class ReceiverInformed:
    sender: int
    co_receivers: frozenset[int]

    def __str__(self) -> str:
        return (
            f"receiver(sender={self.sender}, "
            f"co_receivers={sorted(self.co_receivers)})"
        )


@dataclass(frozen=True, slots=True)
class NonParticipant:
    def __str__(self) -> str:
        return "non-participant"


@dataclass(frozen=True, slots=True)
class Aborted:
    def __str__(self) -> str:
        return "aborted"


Role = Union[Sender, Receiver, ReceiverInformed, NonParticipant, Aborted]


def is_participant(role: Role) -> bool:
    return isinstance(role, (Sender, Receiver, ReceiverInformed))


@dataclass(slots=True)
class ProtocolParams:
    """Protocol and network parameters.

    :param n: number of parties
    :param m: number of receivers chosen by the sender
    :param L: number of detected GHZ rounds
    :param p: probability that a round is a test round
    :param q_x: GHZ phase error rate threshold
    :param q_z: GHZ pairwise bit error rate
    :param q_xb: Bell pair phase error rate
    :param q_zb: Bell pair bit error rate
    :param eta: per-channel transmittance in (0, 1]
    :param r_v: parity rounds per party in each Veto
    :param r_n: parity rounds per party in each notification
    :param eps_enc: AMD code failure probability
    :param eps_ec: error correction failure probability
    :param eps_pa: privacy amplification failure probability
    :param eps_x: phase error estimation failure probability
    :param seed: 64-bit run seed
    :param L_b: key length of the Bell pair benchmarks
    """

    n: int = 5
    m: int = 2
    L: int = 20_000
    p: float = 0.05
    q_x: float = 0.02
    q_z: float = 0.02
    q_xb: float = 0.02
    q_zb: float = 0.02
    eta: float = 1.0
    r_v: int = 40
    r_n: int = 40
    eps_enc: float = 2.0**-32
    eps_ec: float = 1e-10
    eps_pa: float = 1e-10
    eps_x: float = 1e-10
    seed: int = 0
    L_b: int = 128

    def replace(self, **changes) -> "ProtocolParams":
        return dataclasses.replace(self, **changes)


def amd_codeword_length(message_len: int, eps_enc: float) -> int:
    r"""Length of an AMD codeword.

    .. math::

        |F(x)| = |x| + 2 \left( \lceil \log_2 \max(|x|, 2) \rceil
                 + \lceil \log_2 (1/\varepsilon_{enc}) \rceil \right)

    A one-bit message gets the same field as a two-bit one: over a binary
    field the values of ``r`` accepting an offset come in pairs.
    """
    if message_len < 1:
        msg = f"AMD message must be non-empty, got length {message_len}"
        raise ParamsValueError(msg)

    field_bits = ceil_log2(max(message_len, 2)) + ceil_log2(1 / eps_enc)
    return message_len + 2 * field_bits


@dataclass(frozen=True, slots=True)
class ValidatedParams:
    """Checked parameters together with every derived bit length."""

    params: ProtocolParams
    raw_key_len: int
    test_rounds: int
    testing_key_len: int
    syndrome_len: int
    hash_len: int
    id_payload_len: int
    id_codeword_len: int
    fully_id_codeword_len: int
    verdict_len: int
    tkd_key_len: int
    bifully_codeword_len: int

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def m(self) -> int:
        return self.params.m

    @property
    def L(self) -> int:
        return self.params.L

    @property
    def degenerate(self) -> bool:
        """No round is flagged as a test round."""
        return self.test_rounds == 0


def _check_range(
    name: str, value: float, low: float, high: float, *, closed_high=False
):
    ok = low <= value <= high if closed_high else low <= value < high
    if not ok:
        bracket = "]" if closed_high else ")"
        msg = f"{name} must be in [{low:g},{high:g}{bracket}, got {value}"
        raise ParamsValueError(msg)


def _check_probability(name: str, value: float):
    if not 0 < value < 1:
        msg = f"{name} must be in (0,1), got {value}"
        raise ParamsValueError(msg)


def _check_params(raw: ProtocolParams):
    if raw.n < 3:
        msg = f"n must be at least 3, got {raw.n}"
        raise ParamsValueError(msg)

    if not 1 <= raw.m < raw.n:
        msg = f"m must satisfy 1 <= m < n, got m={raw.m}, n={raw.n}"
        raise ParamsValueError(msg)

    if raw.L < 1 or raw.L_b < 1:
        msg = f"L and L_b must be positive, got {raw.L}, {raw.L_b}"
        raise ParamsValueError(msg)

    if not 0 <= raw.q_x < 0.5:
        msg = f"Q_X must be in [0,1/2), got {raw.q_x}"
        raise ParamsValueError(msg)

    _check_range("p", raw.p, 0, 1, closed_high=True)
    _check_range("Q_Z", raw.q_z, 0, 0.5)
    _check_range("Q_Xb", raw.q_xb, 0, 0.5)
    _check_range("Q_Zb", raw.q_zb, 0, 0.5)

    if not 0 < raw.eta <= 1:
        msg = f"eta must be in (0,1], got {raw.eta}"
        raise ParamsValueError(msg)

    if raw.r_v < 1 or raw.r_n < 1:
        msg = f"r_V and r_N must be at least 1, got {raw.r_v}, {raw.r_n}"
        raise ParamsValueError(msg)

    for name in ("eps_enc", "eps_ec", "eps_pa", "eps_x"):
        _check_probability(name, getattr(raw, name))

    if not 0 <= raw.seed < _SEED_LIMIT:
        msg = f"seed must be a 64-bit unsigned integer, got {raw.seed}"
        raise ParamsValueError(msg)


def validate_params(
    raw: Union[ProtocolParams, ValidatedParams]
) -> ValidatedParams:
    """Check every invariant of ``raw`` and derive the integer bit lengths.

    Passing an already validated object returns it re-derived from its
    underlying parameters, so the operation is idempotent.
    """
    if isinstance(raw, ValidatedParams):
        raw = raw.params

    _check_params(raw)

    n, L, p = raw.n, raw.L, raw.p
    raw_key_len = ceil_(L * (1 - p))
    id_payload_len = n - 1 + ceil_log2(n)
    verdict_len = amd_codeword_length(1, raw.eps_enc)
    testing_key_len = ceil_(L * binary_entropy(p))

    return ValidatedParams(
        params=raw,
        raw_key_len=raw_key_len,
        test_rounds=L - raw_key_len,
        testing_key_len=testing_key_len,
        syndrome_len=ceil_(raw_key_len * binary_entropy(raw.q_z)),
        hash_len=ceil_log2((n - 1) / raw.eps_ec),
        id_payload_len=id_payload_len,
        id_codeword_len=amd_codeword_length(id_payload_len, raw.eps_enc),
        fully_id_codeword_len=amd_codeword_length(1, raw.eps_enc),
        verdict_len=verdict_len,
        tkd_key_len=testing_key_len
        + amd_codeword_length(1 + verdict_len, raw.eps_enc),
        bifully_codeword_len=amd_codeword_length(raw.L_b, raw.eps_enc),
    )


def random_bits(rng: np.random.Generator, size) -> BitString:
    return rng.integers(0, 2, size=size, dtype=np.uint8)


def xor_all(rows: np.ndarray) -> np.ndarray:
    """XOR over the first axis."""
    return np.bitwise_xor.reduce(rows, axis=0)
