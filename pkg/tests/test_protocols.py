import numpy as np
import pytest

from acka import Protocol
from acka.core import (
    Aborted,
    NonParticipant,
    Receiver,
    ReceiverInformed,
    Sender,
    validate_params,
)
from acka.exceptions import ParamsValueError
from acka.protocols import AdversaryScript, Simulation
from acka.protocols.identity import (
    acka_payload,
    read_acka_payload,
    read_fully_payload,
)
from acka.protocols.runner import default_receivers, run_protocol
from acka.quantum import DirectRates, PauliPerQubit
from acka.rates import private_bit_budget

RECEIVERS = frozenset({1, 2})

abort_test_data = [
    (
        {"hook": "apply", "action": "apply-as-second-sender", "party": 3},
        "collision",
    ),
    (
        {"hook": "id-veto", "action": "refuse-broadcast", "party": 3},
        "identity veto",
    ),
    (
        {
            "hook": "id-payload",
            "action": "tamper-amd-offset",
            "party": 4,
            "target": 2,
        },
        "identity veto",
    ),
]

bifully_abort_test_data = [
    {
        "hook": "key-payload",
        "action": "tamper-amd-offset",
        "party": 4,
        "target": 1,
    },
    {"hook": "verify-veto", "action": "flip-parity-input", "party": 3},
    {"hook": "verify-veto", "action": "refuse-broadcast", "party": 4},
]


def _run(protocol, params, **options):
    return run_protocol(protocol, params, 0, RECEIVERS, **options)


@pytest.mark.parametrize("protocol", list(Protocol))
def test_honest_run(protocol, small_params, quiet_noise):
    out = _run(protocol, small_params, noise=quiet_noise)
    assert out.outcome == "ok"
    assert out.cause == ""
    assert out.phi and out.omega_p and out.keys_equal
    assert not (out.gamma or out.gamma_p)
    assert out.views[0].role == Sender(RECEIVERS)
    assert out.views[0].conference_key.size == out.ell > 0
    for t in (3, 4):
        assert out.views[t].role == NonParticipant()
        assert out.views[t].conference_key is None


@pytest.mark.parametrize("protocol", list(Protocol))
def test_ledger_matches_the_closed_form(protocol, small_params, quiet_noise):
    out = _run(protocol, small_params, noise=quiet_noise)
    budget = private_bit_budget(protocol, small_params)
    assert out.ledger.private_bits_consumed == sum(budget.values())
    if protocol.uses_ghz:
        assert out.ledger.ghz_network_uses == small_params.L
    else:
        assert out.ledger.ghz_network_uses == 0


def test_acka_receivers_learn_each_other(small_params, quiet_noise):
    out = _run(Protocol.ACKA, small_params, noise=quiet_noise)
    assert out.views[1].role == ReceiverInformed(0, frozenset({2}))
    assert out.views[2].role == ReceiverInformed(0, frozenset({1}))
    assert out.ell_net < out.ell
    assert out.preshared_bits == (
        small_params.testing_key_len
        + small_params.syndrome_len
        + small_params.hash_len
        + small_params.n
    )


@pytest.mark.parametrize(
    "protocol", [Protocol.FULLY_ACKA, Protocol.BIFULLY_ACKA]
)
def test_fully_anonymous_receivers_learn_their_role_only(
    protocol, small_params, quiet_noise
):
    out = _run(protocol, small_params, noise=quiet_noise)
    assert out.views[1].role == out.views[2].role == Receiver()
    assert out.preshared_bits == 0


def test_testing_key_reaches_the_receivers(small_params, quiet_noise):
    out = _run(Protocol.FULLY_ACKA, small_params, noise=quiet_noise)
    k_t = out.views[0].testing_key
    assert k_t.size == small_params.testing_key_len
    for b in RECEIVERS:
        assert np.array_equal(out.views[b].testing_key, k_t)
    assert out.qx_obs < 0.02
    assert not out.degenerate


def test_runs_are_reproducible(small_params, quiet_noise):
    first = _run(Protocol.FULLY_ACKA, small_params, noise=quiet_noise)
    again = _run(Protocol.FULLY_ACKA, small_params, noise=quiet_noise)
    other = _run(
        Protocol.FULLY_ACKA,
        validate_params(small_params.params.replace(seed=12)),
        noise=quiet_noise,
    )
    assert first.as_dict() == again.as_dict()
    assert not np.array_equal(
        first.views[0].conference_key, other.views[0].conference_key
    )


@pytest.mark.parametrize("protocol", list(Protocol))
@pytest.mark.parametrize("record,cause", abort_test_data)
def test_identity_designation_aborts(protocol, small_params, record, cause):
    script = AdversaryScript.from_records([record])
    out = _run(protocol, small_params, adversary=script)
    assert out.outcome == "aborted-ID"
    assert out.id_aborted
    assert out.gamma and not out.phi
    assert out.cause == cause
    assert all(v.role == Aborted() for v in out.views)
    assert all(v.conference_key is None for v in out.views)


def test_fully_acka_aborts_on_phase_errors(small_params):
    out = _run(
        Protocol.FULLY_ACKA, small_params, noise=DirectRates(0.2, 0.01)
    )
    assert out.gamma
    assert out.outcome == "aborted"
    assert not out.id_aborted
    assert out.cause == "secrecy verification"
    assert out.qx_obs > 0.1


def test_acka_participants_abort_on_phase_errors(small_params):
    out = _run(Protocol.ACKA, small_params, noise=DirectRates(0.2, 0.01))
    assert out.outcome == "participant-abort"
    assert out.cause == "secrecy verification"
    assert all(v.conference_key is None for v in out.participants)


def test_tampered_hash_makes_the_participants_abort(
    small_params, quiet_noise
):
    script = AdversaryScript.from_records(
        [{"hook": "ec-hash", "action": "tamper-amd-offset", "party": 4}]
    )
    out = _run(
        Protocol.FULLY_ACKA, small_params, noise=quiet_noise, adversary=script
    )
    assert out.outcome == "participant-abort"
    assert out.gamma_p and not out.gamma and not out.omega_p
    assert all(v.conference_key is None for v in out.participants)


@pytest.mark.parametrize("record", bifully_abort_test_data)
def test_bifully_acka_verification_aborts(small_params, record):
    script = AdversaryScript.from_records([record])
    out = _run(Protocol.BIFULLY_ACKA, small_params, adversary=script)
    assert out.gamma
    assert out.cause == "verification veto"
    assert out.phi


def test_pauli_noise_run(small_params):
    noise = PauliPerQubit(0.001, 0.005)
    out = _run(Protocol.FULLY_ACKA, small_params, noise=noise)
    assert out.outcome == "ok"
    assert out.keys_equal


def test_block_reconciler_run(small_params):
    out = _run(
        Protocol.FULLY_ACKA,
        small_params,
        noise=DirectRates(0.005, 0.0),
        reconciler="block",
    )
    assert out.outcome == "ok"
    assert out.keys_equal


def test_transcript_is_recorded(small_params, quiet_noise):
    out = _run(
        Protocol.FULLY_ACKA,
        small_params,
        noise=quiet_noise,
        record_transcript=True,
    )
    assert any(", beacon, " in line for line in out.transcript)
    assert any(", private, " in line for line in out.transcript)


def test_outcome_as_dict(small_params, quiet_noise):
    record = _run(Protocol.BACKA, small_params, noise=quiet_noise).as_dict()
    assert record["protocol"] == "backa"
    assert record["outcome"] == "ok"
    assert record["receivers"] == [1, 2]
    assert record["parties"][3] == {
        "id": 3,
        "role": "non-participant",
        "key": None,
    }
    assert record["ledger"]["l_tot"] > 0


def test_default_receivers():
    assert default_receivers(5, 2, 4) == frozenset({0, 1})


@pytest.mark.parametrize(
    "sender,receivers", [(1, {1, 2}), (0, {1}), (0, {1, 7}), (5, {1, 2})]
)
def test_invalid_sender_or_receivers(small_params, sender, receivers):
    with pytest.raises(ParamsValueError):
        run_protocol(Protocol.ACKA, small_params, sender, receivers)


def test_acting_party_must_be_corrupt():
    with pytest.raises(ParamsValueError):
        AdversaryScript(
            frozenset(),
            AdversaryScript.from_records(
                [{"hook": "ec-hash", "action": "refuse-broadcast", "party": 1}]
            ).actions,
        )


def test_acka_payload_round_trip():
    rng = np.random.default_rng(0)
    receivers = frozenset({1, 3})
    payload = acka_payload(5, 0, 1, receivers, rng)
    assert payload.size == 4 + 3
    assert read_acka_payload(5, 1, payload) == ReceiverInformed(
        0, frozenset({3})
    )

    payload = acka_payload(5, 0, 2, receivers, rng)
    assert payload.size == 7
    assert read_acka_payload(5, 2, payload) == NonParticipant()


def test_fully_payload():
    assert read_fully_payload(5, 1, np.array([1])) == Receiver()
    assert read_fully_payload(5, 1, np.array([0])) == NonParticipant()


def test_default_source_runs_below_the_thresholds(small_params):
    noise = Simulation(small_params).noise
    assert noise.q_x == pytest.approx(small_params.params.q_x / 2)
    assert noise.q_z == pytest.approx(small_params.params.q_z / 2)
