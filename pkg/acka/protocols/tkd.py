r"""Testing key distribution.

Repeated ``n - 1`` times, once per party other than the sender in an order
Alice draws at random: a notification sweep flags the recipient ``s``, then
``|k|`` Parity rounds carry Alice's payload. A notified receiver pads the
rounds with its own random string and reads the payload; for a
non-participant Alice pads the payload herself and checks that the AMD tail
survived. A receiver that was never notified sets its verification bit.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from acka.core import random_bits
from acka.protocols import Hook, PartyView, Simulation
from acka.subroutines.amd import AMDCode
from acka.subroutines.parity import notify, parity_round

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class Delivery:
    """What the receivers read out of a distribution.

    ``prefixes[b]`` holds the unprotected leading bits and ``messages[b]``
    the decoded AMD tail of every receiver ``b`` whose tail decoded.
    """

    prefixes: dict[int, np.ndarray] = field(default_factory=dict)
    messages: dict[int, np.ndarray] = field(default_factory=dict)
    alice_flag: int = 0


def deliver(
    sim: Simulation,
    views: Sequence[PartyView],
    alice: int,
    receivers: frozenset[int],
    payload_for: Callable[[int], np.ndarray],
    code: AMDCode,
    hook: Hook,
) -> Delivery:
    """Notify each party in turn and send it ``payload_for(s)``.

    The last ``code.codeword_len`` bits of every payload are an AMD
    codeword; receivers decode that tail.
    """
    fabric, rngs, n = sim.fabric, sim.rngs, sim.n
    params = sim.params.params
    tail = code.codeword_len
    out = Delivery()

    order = rngs[alice].permutation([t for t in range(n) if t != alice])
    for s in (int(t) for t in order):
        flags = notify(fabric, alice, s, rngs, params.r_n)
        for t in np.flatnonzero(flags):
            views[t].notified = True

        payload = payload_for(s)
        x = np.zeros((n, payload.size), dtype=np.uint8)
        padder = rngs[s] if s in receivers else rngs[alice]
        pad = random_bits(padder, payload.size)
        if s in receivers:
            x[alice] = payload
            if flags[s]:
                x[s] = pad
        else:
            x[alice] = payload ^ pad

        x, flips = sim.adversary.perturb(hook, x, rngs, target=s)
        o = parity_round(fabric, x, rngs, broadcast_flips=flips).public
        plain = o ^ pad

        if s in receivers:
            if not flags[s]:
                continue
            decoded = code.decode(plain[-tail:])
            if decoded is None:
                views[s].verification = 1
                views[s].note("distributed codeword rejected")
                continue
            out.prefixes[s] = plain[:-tail]
            out.messages[s] = decoded
        elif code.decode(plain[-tail:]) is None:
            out.alice_flag = 1
            views[alice].note(f"codeword to party {s} rejected")

    for b in receivers:
        if not views[b].notified:
            views[b].verification = 1
            views[b].note("never notified")
            logger.info("a receiver was never notified")

    return out


@dataclass(slots=True)
class TkdResult:
    """Per receiver: testing key, error correction bit and verdict pad."""

    testing_keys: dict[int, np.ndarray]
    ec_bits: dict[int, int]
    verdict_pads: dict[int, np.ndarray]
    alice_flag: int = 0


def run_tkd(
    sim: Simulation,
    views: Sequence[PartyView],
    alice: int,
    receivers: frozenset[int],
    testing_key: np.ndarray,
    ec_bits: dict[int, int],
    verdict_pad: np.ndarray,
) -> TkdResult:
    r"""Give every receiver :math:`k_l = (k_T, F(b_l, r_\emptyset))`.

    :param ec_bits: ``b_l`` for every party other than Alice
    :param verdict_pad: :math:`r_\emptyset`, shared by all receivers
    """
    params = sim.params
    code = AMDCode(1 + params.verdict_len, params.params.eps_enc)
    rng = sim.rngs[alice]

    tails = {}
    for s, b in ec_bits.items():
        message = np.concatenate([[b], verdict_pad]).astype(np.uint8)
        tails[s] = code.encode(message, rng)

    def payload_for(s: int) -> np.ndarray:
        return np.concatenate([testing_key, tails[s]]).astype(np.uint8)

    out = deliver(
        sim, views, alice, receivers, payload_for, code, Hook.TKD_PAYLOAD
    )
    views[alice].verification |= out.alice_flag

    result = TkdResult({}, {}, {}, out.alice_flag)
    for b, message in out.messages.items():
        result.testing_keys[b] = out.prefixes[b]
        result.ec_bits[b] = int(message[0])
        result.verdict_pads[b] = message[1:]
        views[b].testing_key = out.prefixes[b]

    logger.debug(
        "testing key delivered to %d of %d receivers",
        len(result.testing_keys),
        len(receivers),
    )
    return result
