"""bACKA and bifully-ACKA: the same tasks over bipartite private channels
only, used as the Bell pair benchmark."""

import logging
from typing import Optional

import numpy as np

from acka import Protocol
from acka.core import ValidatedParams, random_bits
from acka.protocols import AdversaryScript, Hook, RunOutcome, abort_all
from acka.protocols.ghz import settle, start_run
from acka.protocols.identity import run_acka_id, run_fully_acka_id
from acka.protocols.tkd import deliver
from acka.quantum import NoiseModel
from acka.subroutines.amd import AMDCode
from acka.subroutines.parity import veto

logger = logging.getLogger(__name__)


def run_backa(
    params: ValidatedParams,
    sender: int,
    receivers: frozenset[int],
    *,
    noise: Optional[NoiseModel] = None,
    adversary: Optional[AdversaryScript] = None,
    reconciler: str = "ideal",
    record_transcript: bool = False,
) -> RunOutcome:
    """ACKA identity designation, then every party sends ``L_b`` bits to
    every other party; Alice's strings to the receivers are the key."""
    sim, views, out = start_run(
        Protocol.BACKA,
        params,
        sender,
        receivers,
        noise,
        adversary,
        reconciler,
        record_transcript,
    )
    alice, n, L_b = sender, params.n, params.params.L_b
    fabric, rngs = sim.fabric, sim.rngs

    ident = run_acka_id(sim, views, alice, receivers)
    if ident.aborted:
        out.gamma, out.cause = True, ident.cause
        out.id_aborted = True
        return settle(sim, out)
    out.phi = ident.phi

    k_a = random_bits(rngs[alice], L_b)
    fabric.tick()
    for j in range(n):
        for i in range(n):
            if i == j:
                continue
            if j == alice and i in receivers:
                fabric.send_private(j, i, k_a)
            else:
                fabric.send_private(j, i, random_bits(rngs[j], L_b))

    for i in range(n):
        inbox = fabric.inbox(i)
        heard = {j: inbox.receive(j) for j in range(n) if j != i}
        if i in receivers:
            views[i].conference_key = heard[alice]

    views[alice].conference_key = k_a
    out.ell = out.ell_net = L_b
    return settle(sim, out)


def run_bifully_acka(
    params: ValidatedParams,
    sender: int,
    receivers: frozenset[int],
    *,
    noise: Optional[NoiseModel] = None,
    adversary: Optional[AdversaryScript] = None,
    reconciler: str = "ideal",
    record_transcript: bool = False,
) -> RunOutcome:
    """fully-ACKA identity designation, the AMD encoded key sent to every
    party in turn after a notification, and a final Veto."""
    sim, views, out = start_run(
        Protocol.BIFULLY_ACKA,
        params,
        sender,
        receivers,
        noise,
        adversary,
        reconciler,
        record_transcript,
    )
    alice, n, raw = sender, params.n, params.params
    rngs = sim.rngs

    ident = run_fully_acka_id(sim, views, alice, receivers)
    if ident.aborted:
        out.gamma, out.cause = True, ident.cause
        out.id_aborted = True
        return settle(sim, out)
    out.phi = ident.phi
    for view in views:
        view.verification = 0

    k_a = random_bits(rngs[alice], raw.L_b)
    code = AMDCode(raw.L_b, raw.eps_enc)
    codeword = code.encode(k_a, rngs[alice])
    delivery = deliver(
        sim,
        views,
        alice,
        receivers,
        lambda s: codeword,
        code,
        Hook.KEY_PAYLOAD,
    )
    views[alice].verification |= delivery.alice_flag

    votes = np.zeros(n, dtype=np.uint8)
    for view in views:
        if view.id == alice or view.id in receivers:
            votes[view.id] = view.verification
        else:
            votes[view.id] = int(not view.notified)
    votes, _ = sim.adversary.perturb(Hook.VERIFY_VETO, votes[:, None], rngs)
    vetoed = veto(
        sim.fabric,
        votes[:, 0],
        rngs,
        raw.r_v,
        refusers=sim.adversary.refusers(Hook.VERIFY_VETO),
    )
    if vetoed:
        logger.info("bifully-ACKA aborted by the verification veto")
        abort_all(views)
        out.gamma, out.cause = True, "verification veto"
        return settle(sim, out)

    views[alice].conference_key = k_a
    for b in receivers:
        views[b].conference_key = delivery.messages.get(b)

    out.ell = out.ell_net = raw.L_b
    return settle(sim, out)
