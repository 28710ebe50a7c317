r"""ACKA and fully-ACKA: conference keys from GHZ states.

Both runs share the quantum phase and its aftermath:

1. ``L`` detected GHZ rounds; participants measure Z on key rounds and X on
   test rounds of their copy of the testing key, everybody else measures X.
2. The testing key is revealed by Parity with Alice as the only non-zero
   input.
3. On every test round the parties compute the parity of their X outcomes,
   Alice contributing a random bit instead of hers, and Alice estimates
   :math:`Q_X^{obs}`.
4. Error correction, then privacy amplification by a Toeplitz hash picked by
   the beacon.

ACKA moves the testing key and the error correction messages under
previously established conference keys; fully-ACKA uses the TKD
sub-protocol and Parity instead and decides the verification by Veto.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from acka import Protocol
from acka.core import (
    NonParticipant,
    ProtocolParams,
    ValidatedParams,
    is_participant,
    random_bits,
)
from acka.exceptions import (
    DomainError,
    HashLengthError,
    NoExtractableKeyError,
)
from acka.protocols import (
    AdversaryScript,
    Hook,
    PartyView,
    RunOutcome,
    Simulation,
    abort_all,
)
from acka.protocols.identity import run_acka_id, run_fully_acka_id
from acka.protocols.testing_key import expand_schedule, sample_schedule
from acka.protocols.tkd import run_tkd
from acka.quantum import (
    Basis,
    NoiseModel,
    bell_secret_bit_supply,
    detection_attempts,
    sample_detected_rounds,
)
from acka.rates import finite_key_length, gamma_for
from acka.subroutines import HashFamilyIndex
from acka.subroutines.amd import AMDCode
from acka.subroutines.hashing import two_universal_hash
from acka.subroutines.parity import parity_round, veto

logger = logging.getLogger(__name__)


# -- shared steps -------------------------------------------------------------


def new_views(n: int) -> list[PartyView]:
    return [PartyView(t, NonParticipant()) for t in range(n)]


def _schedule_or_none(key: np.ndarray, vp: ValidatedParams):
    if key.size != vp.testing_key_len:
        return None
    try:
        return expand_schedule(key, vp.L, vp.test_rounds)
    except DomainError:
        return None


def broadcast_all(sim: Simulation, messages: dict[int, np.ndarray]):
    """One broadcast sub-round in ascending party order."""
    fabric = sim.fabric
    round_ = fabric.open_subround(range(sim.n))
    for t in range(sim.n):
        fabric.broadcast(t, messages[t], t)
    return {rec.sender: rec.bits for rec in fabric.broadcasts(round_)}


def measure(
    sim: Simulation, views: Sequence[PartyView], alice: int
) -> tuple[np.ndarray, np.ndarray]:
    """Distribute and measure ``L`` detected GHZ rounds.

    :returns: ``(bases, outcomes)``, both ``(n, L)``
    """
    vp = sim.params
    bases = np.full((sim.n, vp.L), Basis.X, dtype=np.uint8)
    for view in views:
        if not is_participant(view.role):
            continue
        schedule = _schedule_or_none(view.testing_key, vp)
        if schedule is not None:
            # test rounds in X, key rounds in Z
            bases[view.id] = np.where(schedule == 1, Basis.X, Basis.Z)

    attempts = detection_attempts(vp.L, sim.n, vp.params.eta, sim.source_rng)
    sim.fabric.charge_ghz(attempts)
    outcomes = sample_detected_rounds(
        sim.noise, bases, sim.source_rng, reference=alice
    )
    logger.debug("%d GHZ rounds detected in %d attempts", vp.L, attempts)
    return bases, outcomes


def reveal_testing_key(
    sim: Simulation, alice: int, testing_key: np.ndarray
) -> np.ndarray:
    x = np.zeros((sim.n, testing_key.size), dtype=np.uint8)
    x[alice] = testing_key
    return parity_round(sim.fabric, x, sim.rngs).public


def estimate_qx_obs(x_alice, t_alice, o_test) -> float:
    r""":math:`Q_X^{obs} = \omega_r(X_A \oplus T_A \oplus o_T)`, zero on an
    empty test set."""
    diff = np.asarray(x_alice) ^ np.asarray(t_alice) ^ np.asarray(o_test)
    return float(diff.mean()) if diff.size else 0.0


def phase_error_parity(
    sim: Simulation,
    alice: int,
    schedule: np.ndarray,
    bases: np.ndarray,
    outcomes: np.ndarray,
) -> tuple[float, bool]:
    """Parity of the X outcomes on the public test rounds.

    :returns: ``(qx_obs, degenerate)``
    """
    idx = np.flatnonzero(schedule)
    if idx.size == 0:
        logger.warning("no test rounds; Q_X^obs set to 0")
        return 0.0, True

    rngs = sim.rngs
    measured_x = bases[:, idx] == Basis.X
    fresh = np.stack([random_bits(rng, idx.size) for rng in rngs])
    x = np.where(measured_x, outcomes[:, idx], fresh).astype(np.uint8)

    x_alice = x[alice].copy()
    t_alice = fresh[alice]
    x[alice] = t_alice
    x, flips = sim.adversary.perturb(Hook.TEST_PARITY, x, rngs)
    o = parity_round(sim.fabric, x, rngs, broadcast_flips=flips).public
    return estimate_qx_obs(x_alice, t_alice, o), False


def secrecy_violated(
    params: ProtocolParams, qx_obs: float, degenerate: bool
) -> bool:
    r""":math:`Q_X^{obs} + \gamma(Q_X^{obs}) > Q_X + \gamma(Q_X)`."""
    if degenerate:
        return False
    if qx_obs >= 0.5:
        return True

    threshold = params.q_x + gamma_for(params).gamma
    observed = qx_obs + gamma_for(params.replace(q_x=qx_obs)).gamma
    return observed > threshold


def _pad(key: np.ndarray, size: int) -> np.ndarray:
    if key.size >= size:
        return key
    return np.concatenate([key, np.zeros(size - key.size, dtype=np.uint8)])


def _hash_index(sim: Simulation, in_len: int, out_len: int):
    return HashFamilyIndex.from_beacon(
        sim.fabric.beacon_sample(in_len, out_len)
    )


def privacy_amplify(
    raw: np.ndarray, beacon_idx: HashFamilyIndex, ell: int
) -> np.ndarray:
    """Hash an error corrected key down to ``ell`` bits."""
    if ell <= 0:
        msg = f"no extractable key (ell={ell})"
        raise NoExtractableKeyError(msg)
    if beacon_idx.out_len != ell:
        msg = f"hash outputs {beacon_idx.out_len} bits, need {ell}"
        raise HashLengthError(msg)

    return two_universal_hash(beacon_idx, raw)


def _amplify_all(
    sim: Simulation,
    keys: dict[int, np.ndarray],
    views: Sequence[PartyView],
    ell: int,
) -> None:
    in_len = next(iter(keys.values())).size
    idx = _hash_index(sim, in_len, ell)
    for t, key in keys.items():
        if views[t].conference_key is not None:
            views[t].conference_key = privacy_amplify(key, idx, ell)


def settle(sim: Simulation, out: RunOutcome) -> RunOutcome:
    """Convert the private bits into Bell network uses and close the run."""
    raw = sim.params.params
    supply = bell_secret_bit_supply(raw.n, raw.eta, raw.q_xb, raw.q_zb)
    ledger = sim.fabric.ledger_report()
    if supply > 0:
        sim.fabric.charge_bell(ledger.private_bits_consumed / supply)

    out.ledger = sim.fabric.ledger_report()
    out.preshared_bits = sim.pool.consumed
    out.transcript = sim.fabric.transcript_lines()
    if not out.gamma:
        parts = out.participants
        out.gamma_p = any(v.conference_key is None for v in parts)
        out.omega_p = out.keys_equal
        if out.gamma_p and not out.cause:
            out.cause = "participant abort"

    logger.info("%s finished: %s", out.protocol, out.outcome)
    return out


def start_run(
    protocol: Protocol,
    params: ValidatedParams,
    sender: int,
    receivers: frozenset[int],
    noise: Optional[NoiseModel],
    adversary: Optional[AdversaryScript],
    reconciler: str,
    record_transcript: bool,
):
    sim = Simulation(params, noise, adversary, reconciler, record_transcript)
    views = new_views(params.n)
    out = RunOutcome(protocol, views, sender, receivers)
    logger.info("%s started with n=%d, L=%d", protocol, params.n, params.L)
    return sim, views, out


def _key_phase(
    sim: Simulation,
    views: Sequence[PartyView],
    out: RunOutcome,
    alice: int,
    testing_key: np.ndarray,
):
    """Measurement, testing key reveal and phase error estimation.

    :returns: raw keys of the participants, by party
    """
    vp = sim.params
    bases, outcomes = measure(sim, views, alice)

    revealed = reveal_testing_key(sim, alice, testing_key)
    schedule = _schedule_or_none(revealed, vp)
    if schedule is None:
        schedule = np.zeros(vp.L, dtype=np.uint8)

    out.qx_obs, out.degenerate = phase_error_parity(
        sim, alice, schedule, bases, outcomes
    )
    key_rounds = schedule == 0
    return {
        v.id: outcomes[v.id, key_rounds]
        for v in views
        if is_participant(v.role)
    }


def _extract(
    sim: Simulation,
    protocol: Protocol,
    views: Sequence[PartyView],
    out: RunOutcome,
    corrected: dict[int, np.ndarray],
) -> None:
    length = finite_key_length(protocol, sim.params.params)
    out.ell, out.ell_net = length.ell, length.ell_net
    if length.ell <= 0:
        logger.warning("no extractable key (ell=%.6g)", length.ell_raw)
        out.cause = "no extractable key"
        for t in corrected:
            views[t].abort()
        return

    _amplify_all(sim, corrected, views, length.ell)


# -- ACKA ---------------------------------------------------------------------


def acka_error_correction(
    sim: Simulation,
    views: Sequence[PartyView],
    alice: int,
    receivers: frozenset[int],
    raw: dict[int, np.ndarray],
) -> dict[int, np.ndarray]:
    """Syndrome and hash broadcast under pre-shared key bits, then the
    encrypted exchange of verification bits among the participants.

    :returns: error corrected keys of the participants still holding one
    """
    n, vp, rngs = sim.n, sim.params, sim.rngs
    rec = sim.reconciler
    raw_a = raw[alice]

    syndrome = rec.syndrome(raw_a)
    k2 = sim.pool.draw(syndrome.size)
    sent = {t: random_bits(rngs[t], syndrome.size) for t in range(n)}
    sent[alice] = syndrome ^ k2
    heard = broadcast_all(sim, sent)

    corrected = {alice: raw_a}
    for b in receivers:
        fixed = rec.correct(raw[b], heard[alice] ^ k2)
        if fixed is None:
            views[b].verification = 1
            fixed = raw[b]
        corrected[b] = fixed

    size = max(vp.raw_key_len, vp.hash_len)
    idx = _hash_index(sim, size, vp.hash_len)
    h_a = two_universal_hash(idx, _pad(raw_a, size))
    k3 = sim.pool.draw(vp.hash_len)
    sent = {t: random_bits(rngs[t], vp.hash_len) for t in range(n)}
    sent[alice] = h_a ^ k3
    heard = broadcast_all(sim, sent)
    for b in receivers:
        h_b = two_universal_hash(idx, _pad(corrected[b], size))
        if not np.array_equal(heard[alice] ^ k3, h_b):
            views[b].verification = 1
            views[b].note("error correction hash mismatch")

    participants = [alice, *sorted(receivers)]
    pads = sim.pool.draw(n)
    sent = {t: random_bits(rngs[t], 1) for t in range(n)}
    for t in participants:
        sent[t] = np.array([views[t].verification ^ pads[t]], np.uint8)
    heard = broadcast_all(sim, sent)

    flags = [int(heard[t][0] ^ pads[t]) for t in participants]
    if any(flags):
        logger.info("participants abort after error correction")
        for t in participants:
            views[t].abort()
            views[t].note("participants aborted")
    else:
        for t in participants:
            views[t].conference_key = np.zeros(0, dtype=np.uint8)

    return corrected


def run_acka(
    params: ValidatedParams,
    sender: int,
    receivers: frozenset[int],
    *,
    noise: Optional[NoiseModel] = None,
    adversary: Optional[AdversaryScript] = None,
    reconciler: str = "ideal",
    record_transcript: bool = False,
) -> RunOutcome:
    """Anonymous conference key agreement on top of pre-shared keys."""
    sim, views, out = start_run(
        Protocol.ACKA,
        params,
        sender,
        receivers,
        noise,
        adversary,
        reconciler,
        record_transcript,
    )
    alice, n = sender, params.n

    ident = run_acka_id(sim, views, alice, receivers)
    if ident.aborted:
        out.gamma, out.cause = True, ident.cause
        out.id_aborted = True
        return settle(sim, out)
    out.phi = ident.phi
    for view in views:
        view.verification = 0

    _, k_t = sample_schedule(
        params.L, params.test_rounds, params.testing_key_len, sim.rngs[alice]
    )
    views[alice].testing_key = k_t
    k1 = sim.pool.draw(k_t.size)
    sent = {t: random_bits(sim.rngs[t], k_t.size) for t in range(n)}
    sent[alice] = k_t ^ k1
    heard = broadcast_all(sim, sent)
    for b in receivers:
        views[b].testing_key = heard[alice] ^ k1

    raw = _key_phase(sim, views, out, alice, k_t)
    for t, key in raw.items():
        views[t].raw_key = key
    if secrecy_violated(params.params, out.qx_obs, out.degenerate):
        views[alice].verification = 1
        views[alice].note("phase error above threshold")
        out.cause = "secrecy verification"

    corrected = acka_error_correction(sim, views, alice, receivers, raw)
    if all(views[t].conference_key is not None for t in corrected):
        _extract(sim, Protocol.ACKA, views, out, corrected)
    else:
        length = finite_key_length(Protocol.ACKA, params.params)
        out.ell, out.ell_net = length.ell, length.ell_net

    return settle(sim, out)


# -- fully-ACKA ---------------------------------------------------------------


def fully_error_correction(
    sim: Simulation,
    views: Sequence[PartyView],
    alice: int,
    receivers: frozenset[int],
    raw: dict[int, np.ndarray],
    ec_bits: dict[int, int],
    verdict_pad: np.ndarray,
    received_bits: dict[int, int],
    received_pads: dict[int, np.ndarray],
) -> dict[int, np.ndarray]:
    """Syndrome and hash by Parity, verification bits under the TKD bits
    ``b_l`` and the AMD protected verdict.

    :returns: error corrected keys of the participants
    """
    n, vp, rngs = sim.n, sim.params, sim.rngs
    rec = sim.reconciler
    raw_a = raw[alice]

    syndrome = rec.syndrome(raw_a)
    x = np.zeros((n, syndrome.size), dtype=np.uint8)
    x[alice] = syndrome
    o_1 = parity_round(sim.fabric, x, rngs).public

    corrected = {alice: raw_a}
    for b in receivers:
        fixed = rec.correct(raw[b], o_1)
        if fixed is None:
            views[b].verification = 1
            fixed = raw[b]
        corrected[b] = fixed

    size = max(vp.raw_key_len, vp.hash_len)
    idx = _hash_index(sim, size, vp.hash_len)
    h_a = two_universal_hash(idx, _pad(raw_a, size))
    x = np.zeros((n, vp.hash_len), dtype=np.uint8)
    x[alice] = h_a
    x, flips = sim.adversary.perturb(Hook.EC_HASH, x, rngs)
    o_2 = parity_round(sim.fabric, x, rngs, broadcast_flips=flips).public

    for b in receivers:
        h_b = two_universal_hash(idx, _pad(corrected[b], size))
        if not np.array_equal(o_2, h_b):
            views[b].verification = 1
            views[b].note("error correction hash mismatch")

    sent = {t: random_bits(rngs[t], 1) for t in range(n)}
    for b in receivers:
        flag = views[b].verification ^ received_bits.get(b, 0)
        sent[b] = np.array([flag], dtype=np.uint8)
    heard = broadcast_all(sim, sent)
    bob_flags = [int(heard[b][0]) ^ ec_bits[b] for b in receivers]

    verdict = int(any(bob_flags) or not np.array_equal(o_2, h_a))
    code = AMDCode(1, vp.params.eps_enc)
    alice_input = verdict_pad ^ code.encode(
        np.array([verdict], np.uint8), rngs[alice]
    )
    x = np.zeros((n, code.codeword_len), dtype=np.uint8)
    x[alice] = alice_input
    o_3 = parity_round(sim.fabric, x, rngs).public

    if verdict or not np.array_equal(o_3, alice_input):
        views[alice].abort()
        views[alice].note("error correction verdict: abort")
    else:
        views[alice].conference_key = np.zeros(0, dtype=np.uint8)

    for b in receivers:
        pad = received_pads.get(b, np.zeros_like(o_3))
        decoded = code.decode(pad ^ o_3)
        if decoded is None or decoded[0] == 1:
            views[b].abort()
            views[b].note("error correction verdict: abort")
        else:
            views[b].conference_key = np.zeros(0, dtype=np.uint8)

    return corrected


def run_fully_acka(
    params: ValidatedParams,
    sender: int,
    receivers: frozenset[int],
    *,
    noise: Optional[NoiseModel] = None,
    adversary: Optional[AdversaryScript] = None,
    reconciler: str = "ideal",
    record_transcript: bool = False,
) -> RunOutcome:
    """Fully anonymous conference key agreement: no pre-shared keys, and
    receivers never learn who else participates."""
    sim, views, out = start_run(
        Protocol.FULLY_ACKA,
        params,
        sender,
        receivers,
        noise,
        adversary,
        reconciler,
        record_transcript,
    )
    alice, n, rngs = sender, params.n, sim.rngs

    ident = run_fully_acka_id(sim, views, alice, receivers)
    if ident.aborted:
        out.gamma, out.cause = True, ident.cause
        out.id_aborted = True
        return settle(sim, out)
    out.phi = ident.phi
    for view in views:
        view.verification = 0

    _, k_t = sample_schedule(
        params.L, params.test_rounds, params.testing_key_len, rngs[alice]
    )
    views[alice].testing_key = k_t
    ec_bits = {
        s: int(rngs[alice].integers(0, 2)) for s in range(n) if s != alice
    }
    verdict_pad = random_bits(rngs[alice], params.verdict_len)
    tkd = run_tkd(sim, views, alice, receivers, k_t, ec_bits, verdict_pad)

    raw = _key_phase(sim, views, out, alice, k_t)
    for t, key in raw.items():
        views[t].raw_key = key
    v_s = int(secrecy_violated(params.params, out.qx_obs, out.degenerate))

    votes = np.zeros(n, dtype=np.uint8)
    for view in views:
        if view.id == alice:
            votes[alice] = v_s | view.verification
        elif view.id in receivers:
            votes[view.id] = view.verification
        else:
            votes[view.id] = int(not view.notified)
    votes, _ = sim.adversary.perturb(Hook.VERIFY_VETO, votes[:, None], rngs)
    vetoed = veto(
        sim.fabric,
        votes[:, 0],
        rngs,
        params.params.r_v,
        refusers=sim.adversary.refusers(Hook.VERIFY_VETO),
    )
    if vetoed:
        logger.info("fully-ACKA aborted by the verification veto")
        abort_all(views)
        out.gamma = True
        out.cause = "secrecy verification" if v_s else "verification veto"
        return settle(sim, out)

    corrected = fully_error_correction(
        sim,
        views,
        alice,
        receivers,
        raw,
        ec_bits,
        verdict_pad,
        tkd.ec_bits,
        tkd.verdict_pads,
    )
    if all(views[t].conference_key is not None for t in corrected):
        _extract(sim, Protocol.FULLY_ACKA, views, out, corrected)
    else:
        length = finite_key_length(Protocol.FULLY_ACKA, params.params)
        out.ell, out.ell_net = length.ell, length.ell_net

    return settle(sim, out)
