"""Deterministic communication fabric.

Pairwise private authenticated channels, one ordered authenticated
broadcast channel, a public randomness beacon and an exact cost ledger.
Private channels are perfectly secure; what they cost in Bell pairs is
charged by :mod:`acka.rates`. Rounds are lockstep: a sub-round declares its
broadcast order up front and every broadcast must follow it.
"""

import collections
import enum
import logging
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from acka.exceptions import (
    BroadcastOrderError,
    ChannelEmptyError,
    DomainError,
    PartyIdError,
)
from acka.utils import bits_to_hex

logger = logging.getLogger(__name__)

BEACON_STREAM = 0xBEAC0


class ChannelKind(enum.Enum):
    PRIVATE = "private"
    BROADCAST = "broadcast"
    BEACON = "beacon"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, slots=True)
class CostReport:
    """Immutable snapshot of a :class:`CostLedger`."""

    ghz_network_uses: int = 0
    bell_network_uses: float = 0
    private_bits_consumed: int = 0
    private_channel_uses: int = 0
    broadcast_bits: int = 0

    @property
    def l_tot(self) -> float:
        """GHZ attempts plus Bell network uses; broadcast bits are free."""
        return self.ghz_network_uses + self.bell_network_uses

    def __sub__(self, other: "CostReport") -> "CostReport":
        return CostReport(
            **{
                f.name: getattr(self, f.name) - getattr(other, f.name)
                for f in fields(self)
            }
        )

    def as_dict(self) -> dict:
        return {
            "ghz_network_uses": int(self.ghz_network_uses),
            "bell_network_uses": float(self.bell_network_uses),
            "private_bits_consumed": int(self.private_bits_consumed),
            "private_channel_uses": int(self.private_channel_uses),
            "broadcast_bits": int(self.broadcast_bits),
        }


@dataclass(slots=True)
class CostLedger:
    ghz_network_uses: int = 0
    bell_network_uses: float = 0
    private_bits_consumed: int = 0
    private_channel_uses: int = 0
    broadcast_bits: int = 0

    def snapshot(self) -> CostReport:
        return CostReport(
            self.ghz_network_uses,
            self.bell_network_uses,
            self.private_bits_consumed,
            self.private_channel_uses,
            self.broadcast_bits,
        )


@dataclass(frozen=True, slots=True)
class BroadcastRecord:
    round: int
    sender: int
    bits: Optional[np.ndarray]

    @property
    def refused(self) -> bool:
        return self.bits is None


@dataclass(frozen=True, slots=True)
class BeaconOutput:
    hash_seed: np.ndarray
    in_len: int
    out_len: int


class Inbox:
    """Read side of the private channels addressed to one party."""

    __slots__ = ("_fabric", "party")

    def __init__(self, fabric: "ChannelFabric", party: int) -> None:
        self._fabric = fabric
        self.party = party

    def receive(self, frm: int) -> np.ndarray:
        return self._fabric._pop(frm, self.party)

    def pending(self, frm: int) -> int:
        return len(self._fabric._queues[(frm, self.party)])


class ChannelFabric:
    """Simulated classical network of ``n`` parties.

    :param n: number of parties
    :param seed: run seed; the beacon stream is derived from it and is
        independent of every party's generator
    :param record_transcript: keep a line per message for
        :meth:`dump_transcript`
    """

    def __init__(
        self, n: int, seed: int = 0, record_transcript: bool = False
    ) -> None:
        self.n = n
        self.seed = seed
        self.ledger = CostLedger()
        self.round = 0
        self.record_transcript = record_transcript

        self._queues: dict[tuple[int, int], collections.deque] = {
            (i, j): collections.deque()
            for i in range(n)
            for j in range(n)
            if i != j
        }
        self._log: list[BroadcastRecord] = []
        self._order: tuple[int, ...] = ()
        self._next = 0
        self._beacon_counter = 0
        self._transcript: list[str] = []

    def _check_party(self, party: int):
        if not 0 <= party < self.n:
            msg = f"unknown party {party}; parties are 0..{self.n - 1}"
            raise PartyIdError(msg)

    def _record(self, kind: ChannelKind, frm, to, bits) -> None:
        if self.record_transcript:
            payload = "refuse" if bits is None else bits_to_hex(bits)
            self._transcript.append(
                f"{self.round}, {kind}, {frm}, {to}, {payload}"
            )

    def tick(self) -> int:
        """Start a round that carries private messages only."""
        self.round += 1
        return self.round

    def send_private(self, frm: int, to: int, payload: np.ndarray) -> None:
        self._check_party(frm)
        self._check_party(to)
        if frm == to:
            msg = f"party {frm} cannot send a private message to itself"
            raise PartyIdError(msg)

        bits = np.asarray(payload, dtype=np.uint8).copy()
        self._queues[(frm, to)].append(bits)
        self.ledger.private_bits_consumed += bits.size
        self.ledger.private_channel_uses += bits.size
        self._record(ChannelKind.PRIVATE, frm, to, bits)

    def inbox(self, party: int) -> Inbox:
        self._check_party(party)
        return Inbox(self, party)

    def _pop(self, frm: int, to: int) -> np.ndarray:
        self._check_party(frm)
        queue = self._queues.get((frm, to))
        if not queue:
            msg = f"no pending private message from {frm} to {to}"
            raise ChannelEmptyError(msg)
        return queue.popleft()

    def open_subround(self, order: Sequence[int]) -> int:
        """Declare the broadcast order of a new sub-round."""
        if self._next < len(self._order):
            missing = self._order[self._next]
            msg = f"sub-round {self.round} still waits for party {missing}"
            raise BroadcastOrderError(msg)

        for party in order:
            self._check_party(party)
        self._order = tuple(order)
        self._next = 0
        return self.tick()

    def _advance(self, frm: int, position: int) -> None:
        expected = (
            self._order[self._next] if self._next < len(self._order) else None
        )
        if position != self._next or frm != expected:
            msg = (
                f"party {frm} broadcast at position {position}, "
                f"expected party {expected} at position {self._next}"
            )
            raise BroadcastOrderError(msg)
        self._next += 1

    def broadcast(self, frm: int, payload: np.ndarray, position: int) -> None:
        self._advance(frm, position)
        bits = np.asarray(payload, dtype=np.uint8).copy()
        self._log.append(BroadcastRecord(self.round, frm, bits))
        self.ledger.broadcast_bits += bits.size
        self._record(ChannelKind.BROADCAST, frm, "*", bits)

    def refuse(self, frm: int, position: int) -> None:
        """Explicit refusal to broadcast at ``position``."""
        self._advance(frm, position)
        self._log.append(BroadcastRecord(self.round, frm, None))
        self._record(ChannelKind.BROADCAST, frm, "*", None)
        logger.debug(
            "party %d refused to broadcast in round %d", frm, self.round
        )

    def broadcasts(
        self, round_: Optional[int] = None
    ) -> list[BroadcastRecord]:
        """Broadcast records of one round (default: the current one)."""
        round_ = self.round if round_ is None else round_
        out = []
        for rec in reversed(self._log):
            if rec.round < round_:
                break
            if rec.round == round_:
                out.append(rec)
        return out[::-1]

    @property
    def broadcast_log(self) -> tuple[BroadcastRecord, ...]:
        return tuple(self._log)

    def beacon_sample(self, in_len: int, out_len: int) -> BeaconOutput:
        """Seed of a Toeplitz hash from ``in_len`` to ``out_len`` bits.

        The output depends only on the run seed and the invocation counter.
        """
        if in_len < 1 or out_len < 0 or out_len > in_len:
            msg = (
                "beacon needs 0 <= out_len <= in_len, "
                f"got {out_len}, {in_len}"
            )
            raise DomainError(msg)

        rng = np.random.default_rng(
            [self.seed, BEACON_STREAM, self._beacon_counter]
        )
        self._beacon_counter += 1
        seed_len = in_len + out_len - 1 if out_len else 0
        hash_seed = rng.integers(0, 2, size=seed_len, dtype=np.uint8)
        self._record(ChannelKind.BEACON, "-", "*", hash_seed)
        return BeaconOutput(hash_seed, in_len, out_len)

    def charge_ghz(self, attempts: int) -> None:
        self.ledger.ghz_network_uses += attempts

    def charge_bell(self, uses: float) -> None:
        self.ledger.bell_network_uses += uses

    def ledger_report(self) -> CostReport:
        return self.ledger.snapshot()

    def transcript_lines(self) -> list[str]:
        return list(self._transcript)

    def dump_transcript(self, path: Union[str, Path]) -> None:
        Path(path).write_text("\n".join(self._transcript) + "\n")
