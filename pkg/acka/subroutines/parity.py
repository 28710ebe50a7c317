r"""Parity, Veto, Collision Detection and Notification.

Every function here runs a *batch* of independent instances that share one
schedule: inputs have shape ``(n, k)`` and each party sends ``n - 1`` share
vectors of ``k`` bits, so the ledger grows by ``n (n - 1) k`` private bits
exactly as ``k`` sequential single-bit Parity runs would. A one-dimensional
input of length ``n`` is a batch of one.

A party that refuses to broadcast is recorded as a refusal in the log; the
refused bits count as zero for the parity, and Veto forces its output to 1.
"""

import logging
from typing import Collection, Mapping, Optional, Sequence

import numpy as np

from acka.core import xor_all
from acka.netsim import ChannelFabric
from acka.subroutines import CollisionOutcome, ParityOutcome

logger = logging.getLogger(__name__)


def _as_batch(inputs) -> tuple[np.ndarray, bool]:
    x = np.asarray(inputs, dtype=np.uint8)
    if x.ndim == 1:
        return x[:, None], True
    return x, False


def broadcast_order(
    n: int, last: Optional[int] = None, silent: Optional[int] = None
) -> list[int]:
    """Ascending order, ``last`` moved to the end, ``silent`` left out."""
    order = [t for t in range(n) if t not in (last, silent)]
    if last is not None and last != silent:
        order.append(last)
    return order


def parity_round(
    fabric: ChannelFabric,
    inputs,
    rngs: Sequence,
    *,
    last_broadcaster: Optional[int] = None,
    silent_party: Optional[int] = None,
    refusers: Collection[int] = (),
    share_tape: Optional[Sequence] = None,
    broadcast_flips: Optional[Mapping[int, np.ndarray]] = None,
) -> ParityOutcome:
    r"""Compute :math:`x_1 \oplus \dots \oplus x_n` without revealing the
    individual bits.

    Party ``j`` picks ``n - 1`` random shares, sends the ``i``-th to party
    ``i`` and keeps :math:`x_j` XOR the sent shares. Each party broadcasts
    the XOR of its own share and the ones it received; the parity is the XOR
    of all broadcasts. With ``silent_party`` set that party does not
    broadcast and is the only one able to compute the parity.

    :param inputs: bits of shape ``(n,)`` or ``(n, k)``
    :param rngs: one generator per party, used for the shares
    :param last_broadcaster: party forced to broadcast last
    :param silent_party: party that keeps its broadcast to itself
    :param refusers: parties that refuse to broadcast
    :param share_tape: explicit shares, ``share_tape[j]`` holding the
        ``n - 1`` vectors party ``j`` sends in ascending recipient order
    :param broadcast_flips: masks XORed into a party's broadcast
    """
    x, _ = _as_batch(inputs)
    n, k = x.shape
    order = broadcast_order(n, last_broadcaster, silent_party)
    round_ = fabric.open_subround(order)

    own = np.empty_like(x)
    for j in range(n):
        if share_tape is None:
            sent = rngs[j].integers(0, 2, size=(n - 1, k), dtype=np.uint8)
        else:
            sent = np.asarray(share_tape[j], dtype=np.uint8).reshape(n - 1, k)

        own[j] = x[j] ^ xor_all(sent)
        recipients = (i for i in range(n) if i != j)
        for i, share in zip(recipients, sent):
            fabric.send_private(j, i, share)

    z = own.copy()
    for i in range(n):
        inbox = fabric.inbox(i)
        for j in range(n):
            if j != i:
                z[i] ^= inbox.receive(j)

    for t, mask in (broadcast_flips or {}).items():
        z[t] ^= np.asarray(mask, dtype=np.uint8).reshape(k)

    for position, t in enumerate(order):
        if t in refusers:
            fabric.refuse(t, position)
        else:
            fabric.broadcast(t, z[t], position)

    total = np.zeros(k, dtype=np.uint8)
    refused = False
    for record in fabric.broadcasts(round_):
        if record.refused:
            refused = True
        else:
            total ^= record.bits

    outputs: list[Optional[np.ndarray]]
    if silent_party is None:
        outputs = [total.copy() for _ in range(n)]
    else:
        outputs = [None] * n
        outputs[silent_party] = total ^ z[silent_party]

    logger.debug(
        "parity round %d: batch %d, last=%s, silent=%s, refused=%s",
        round_,
        k,
        last_broadcaster,
        silent_party,
        refused,
    )
    return ParityOutcome(outputs, refused, round_)


def _veto_blocks(fabric, x, rngs, r_v, refusers, coins):
    """Run the ``n`` Veto blocks; yields ``(q, outputs, refused)`` per
    block with ``q`` of shape ``(n, r_v, trials)``."""
    n, trials = x.shape
    coins = rngs if coins is None else coins
    for t in range(n):
        q = np.stack(
            [
                x[j]
                * coins[j].integers(
                    0, 2, size=(r_v, trials), dtype=np.uint8
                )
                for j in range(n)
            ]
        ).astype(np.uint8)
        outcome = parity_round(
            fabric,
            q.reshape(n, r_v * trials),
            rngs,
            last_broadcaster=t,
            refusers=refusers,
        )
        yield q, outcome.public.reshape(r_v, trials), outcome.refused


def veto(
    fabric: ChannelFabric,
    inputs,
    rngs: Sequence,
    r_v: int,
    *,
    refusers: Collection[int] = (),
    coins: Optional[Sequence] = None,
):
    r"""Anonymous logical OR of one bit per party.

    For every party ``t`` the parties run ``r_v`` Parity rounds with ``t``
    broadcasting last; party ``j`` inputs 0 if :math:`x_j = 0` and a fresh
    random bit otherwise. The output is 1 if any parity is 1 or anyone
    refuses to broadcast.

    :param inputs: bits of shape ``(n,)`` or ``(n, trials)``
    :param coins: sources of the randomised inputs (defaults to ``rngs``);
        a :class:`~acka.subroutines.tape.BitTape` makes the run enumerable
    :returns: ``int`` for one instance, boolean array for a batch
    """
    x, single = _as_batch(inputs)
    result = np.zeros(x.shape[1], dtype=bool)
    for _, outputs, refused in _veto_blocks(
        fabric, x, rngs, r_v, refusers, coins
    ):
        if refused:
            result[:] = True
        else:
            result |= outputs.any(axis=0)

    return int(result[0]) if single else result


def collision_detection(
    fabric: ChannelFabric,
    inputs: Sequence[int],
    rngs: Sequence,
    r_v: int,
    *,
    refusers: Collection[int] = (),
    coins: Optional[Sequence] = None,
) -> CollisionOutcome:
    """Tell zero, one or several sender applicants apart.

    ``inputs[j]`` is 0 (no application), 1 (application) or 2 (forced
    collision). Result 0: nobody applied; 1: one applicant; 2: collision.
    """
    trits = np.asarray(inputs, dtype=np.uint8)
    n = trits.size
    applied = np.minimum(trits, 1)[:, None]

    seen = np.zeros(n, dtype=bool)
    veto_a = False
    for q, outputs, refused in _veto_blocks(
        fabric, applied, rngs, r_v, refusers, coins
    ):
        veto_a |= refused or bool(outputs.any())
        # an applicant alone sees its own input come back in every round
        seen |= (q[:, :, 0] != outputs[None, :, 0]).any(axis=1) & (
            applied[:, 0] == 1
        )

    if not veto_a:
        return CollisionOutcome(0, seen.tolist())

    b = ((trits == 1) & seen) | (trits == 2)
    veto_b = veto(
        fabric,
        b.astype(np.uint8),
        rngs,
        r_v,
        refusers=refusers,
        coins=coins,
    )
    result = 2 if veto_b else 1
    logger.debug("collision detection: %d", result)
    return CollisionOutcome(result, seen.tolist())


def notify(
    fabric: ChannelFabric,
    alice: int,
    target: Optional[int],
    rngs: Sequence,
    r_n: int,
    *,
    trials: Optional[int] = None,
    coins: Optional[Sequence] = None,
) -> np.ndarray:
    """One notification sweep: Alice privately flags ``target``.

    For every party ``t`` the parties run ``r_n`` silent Parity rounds in
    which ``t`` does not broadcast; Alice inputs random bits when ``t`` is
    the target and zeros otherwise, every other party inputs zeros. Party
    ``t`` sets its flag if any of its parities is 1. ``target=None``
    notifies nobody.

    :returns: flags of shape ``(n,)``, or ``(n, trials)`` for a batch;
        ``flags[t]`` is known to party ``t`` only
    """
    n = fabric.n
    batch = 1 if trials is None else trials
    coins = rngs if coins is None else coins

    flags = np.zeros((n, batch), dtype=bool)
    for t in range(n):
        x = np.zeros((n, r_n * batch), dtype=np.uint8)
        if t == target:
            x[alice] = coins[alice].integers(
                0, 2, size=r_n * batch, dtype=np.uint8
            )
        outcome = parity_round(fabric, x, rngs, silent_party=t)
        flags[t] = outcome.outputs[t].reshape(r_n, batch).any(axis=0)

    return flags[:, 0] if trials is None else flags
