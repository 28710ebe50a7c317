r"""Identity designation.

Collision Detection elects a single applicant as the sender (Alice). For
every party ``t`` the parties then run ``|F(d_t)|`` Parity rounds in which
Alice inputs the AMD encoding of ``d_t``, party ``t`` a random pad and
everybody else zeros, so only ``t`` can read its designation. A final Veto
over the decoding failures aborts the run for everybody.

ACKA payload of a receiver: ``[1, sender index on ceil(log2 n) bits,
co-receiver mask over the other n - 2 parties]``; of a non-participant:
``[0, random bits]``. fully-ACKA sends the role bit only.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from acka.core import (
    NonParticipant,
    Receiver,
    ReceiverInformed,
    Sender,
    random_bits,
)
from acka.protocols import Hook, PartyView, Simulation, abort_all
from acka.subroutines.amd import AMDCode
from acka.subroutines.parity import collision_detection, parity_round, veto
from acka.utils import bits_to_int, ceil_log2, int_to_bits

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class IdResult:
    aborted: bool
    phi: bool
    cause: str = ""
    collision: int = 1


def _others(n: int, alice: int, t: int) -> list[int]:
    return [j for j in range(n) if j not in (alice, t)]


def acka_payload(
    n: int, alice: int, t: int, receivers: frozenset[int], rng
) -> np.ndarray:
    width = ceil_log2(n)
    if t not in receivers:
        return np.concatenate(
            [[0], random_bits(rng, width + n - 2)]
        ).astype(np.uint8)

    mask = [int(j in receivers) for j in _others(n, alice, t)]
    return np.concatenate(
        [[1], int_to_bits(alice, width), mask]
    ).astype(np.uint8)


def read_acka_payload(n: int, t: int, payload: np.ndarray):
    if payload[0] == 0:
        return NonParticipant()

    width = ceil_log2(n)
    alice = bits_to_int(payload[1 : 1 + width])
    mask = payload[1 + width :]
    co = frozenset(
        j for j, bit in zip(_others(n, alice, t), mask) if bit
    )
    return ReceiverInformed(alice, co)


def fully_payload(t: int, receivers: frozenset[int], rng) -> np.ndarray:
    return np.array([int(t in receivers)], dtype=np.uint8)


def read_fully_payload(n: int, t: int, payload: np.ndarray):
    return Receiver() if payload[0] else NonParticipant()


def _collision_inputs(sim: Simulation, alice: int) -> np.ndarray:
    trits = np.zeros(sim.n, dtype=np.uint8)
    trits[alice] = 1
    for party in sim.adversary.applicants():
        trits[party] = 1
    return trits


def _designate(
    sim: Simulation,
    views: Sequence[PartyView],
    alice: int,
    receivers: frozenset[int],
    payload_len: int,
    make_payload,
    read_payload,
    expected_role,
) -> IdResult:
    params = sim.params.params
    fabric, rngs, n = sim.fabric, sim.rngs, sim.n
    script = sim.adversary

    outcome = collision_detection(
        fabric,
        _collision_inputs(sim, alice),
        rngs,
        params.r_v,
        refusers=script.refusers(Hook.APPLY),
    )
    if outcome.result != 1:
        cause = "no sender" if outcome.result == 0 else "collision"
        logger.info("identity designation aborted: %s", cause)
        abort_all(views)
        return IdResult(True, False, cause, outcome.result)

    code = AMDCode(payload_len, params.eps_enc)
    views[alice].role = Sender(receivers)
    phi = True
    for t in range(n):
        pad = random_bits(rngs[t], code.codeword_len)
        x = np.zeros((n, code.codeword_len), dtype=np.uint8)
        if t == alice:
            zero = np.zeros(payload_len, dtype=np.uint8)
            x[alice] = code.encode(zero, rngs[alice]) ^ pad
        else:
            payload = make_payload(t, receivers, rngs[alice])
            x[alice] = code.encode(payload, rngs[alice])
            x[t] = pad

        x, flips = script.perturb(Hook.ID_PAYLOAD, x, rngs, target=t)
        o = parity_round(fabric, x, rngs, broadcast_flips=flips).outputs[t]
        decoded = code.decode(o ^ pad)

        view = views[t]
        if decoded is None:
            view.verification = 1
            view.note("identity codeword rejected")
            phi = False
            continue

        if t != alice:
            view.role = read_payload(n, t, decoded)
            phi &= view.role == expected_role(t)

    flags = np.array([v.verification for v in views], dtype=np.uint8)
    flags, _ = script.perturb(Hook.ID_VETO, flags[:, None], rngs)
    vetoed = veto(
        fabric,
        flags[:, 0],
        rngs,
        params.r_v,
        refusers=script.refusers(Hook.ID_VETO),
    )
    if vetoed:
        logger.info("identity designation aborted: veto")
        abort_all(views)
        return IdResult(True, False, "identity veto")

    logger.debug("identity designation complete, phi=%s", phi)
    return IdResult(False, phi)


def run_acka_id(
    sim: Simulation,
    views: Sequence[PartyView],
    alice: int,
    receivers: frozenset[int],
) -> IdResult:
    """ACKA identity designation; receivers learn the sender and each
    other, non-participants only their own role."""
    n = sim.n

    def expected(t):
        if t in receivers:
            return ReceiverInformed(alice, receivers - {t})
        return NonParticipant()

    return _designate(
        sim,
        views,
        alice,
        receivers,
        sim.params.id_payload_len,
        lambda t, rec, rng: acka_payload(n, alice, t, rec, rng),
        read_acka_payload,
        expected,
    )


def run_fully_acka_id(
    sim: Simulation,
    views: Sequence[PartyView],
    alice: int,
    receivers: frozenset[int],
) -> IdResult:
    """fully-ACKA identity designation; a receiver learns its role only."""

    def expected(t):
        return Receiver() if t in receivers else NonParticipant()

    return _designate(
        sim,
        views,
        alice,
        receivers,
        1,
        fully_payload,
        read_fully_payload,
        expected,
    )
