import math

import pytest

from acka import Protocol
from acka.core import (
    Aborted,
    NonParticipant,
    ProtocolParams,
    Receiver,
    ReceiverInformed,
    Sender,
    amd_codeword_length,
    is_participant,
    validate_params,
)
from acka.exceptions import ParamsValueError

invalid_params_test_data = [
    ({"n": 2, "m": 1}, "n must be at least 3"),
    ({"m": 0}, "m must satisfy"),
    ({"m": 5}, "m must satisfy"),
    ({"L": 0}, "L and L_b must be positive"),
    ({"q_x": 0.6}, r"Q_X must be in \[0,1/2\)"),
    ({"q_z": 0.5}, "Q_Z must be in"),
    ({"p": 1.5}, "p must be in"),
    ({"eta": 0.0}, "eta must be in"),
    ({"r_v": 0}, "r_V and r_N"),
    ({"eps_enc": 1.0}, "eps_enc must be in"),
    ({"seed": -1}, "seed must be"),
]

amd_length_test_data = [
    (1, 2.0**-10, 23),
    (5, 2.0**-10, 31),
    (32, 2.0**-8, 58),
    (128, 2.0**-32, 206),
]

role_names = [
    (Sender(frozenset({2, 1})), "sender(receivers=[1, 2])"),
    (Receiver(), "receiver"),
    (
        ReceiverInformed(0, frozenset({3})),
        "receiver(sender=0, co_receivers=[3])",
    ),
    (NonParticipant(), "non-participant"),
    (Aborted(), "aborted"),
]


@pytest.mark.parametrize("changes,message", invalid_params_test_data)
def test_invalid_params(changes, message):
    with pytest.raises(ParamsValueError, match=message):
        validate_params(ProtocolParams(**changes))


@pytest.mark.parametrize("message_len,eps_enc,length", amd_length_test_data)
def test_amd_codeword_length(message_len, eps_enc, length):
    assert amd_codeword_length(message_len, eps_enc) == length


def test_amd_codeword_length_empty_message():
    with pytest.raises(ParamsValueError):
        amd_codeword_length(0, 2.0**-10)


def test_derived_lengths():
    vp = validate_params(
        ProtocolParams(n=5, m=2, L=10_000, p=0.05, q_z=0.02, eps_ec=1e-10)
    )
    assert vp.raw_key_len == 9500
    assert vp.test_rounds == 500
    assert vp.syndrome_len == 1344
    assert vp.hash_len == 36
    assert vp.id_payload_len == 4 + 3
    assert vp.fully_id_codeword_len == vp.verdict_len
    assert vp.tkd_key_len == vp.testing_key_len + amd_codeword_length(
        1 + vp.verdict_len, vp.params.eps_enc
    )
    assert not vp.degenerate


def test_identity_codeword_length():
    vp = validate_params(ProtocolParams(n=4, m=1, eps_enc=2.0**-10))
    assert vp.id_payload_len == 5
    assert vp.id_codeword_len == 31


def test_identity_codeword_rounds_each_logarithm_up():
    # ceil(5 + 2 (log2 5 + 10)) would be 30, which needs a 12.5-bit field
    real_valued = 5 + 2 * (math.log2(5) + 10)
    assert math.ceil(real_valued) == 30
    assert amd_codeword_length(5, 2.0**-10) == 5 + 2 * (3 + 10) == 31
    assert (amd_codeword_length(5, 2.0**-10) - 5) % 2 == 0


def test_validate_is_idempotent():
    vp = validate_params(ProtocolParams())
    assert validate_params(vp) == vp


def test_degenerate_schedule():
    vp = validate_params(ProtocolParams(L=100, p=0.0))
    assert vp.degenerate
    assert vp.testing_key_len == 0


@pytest.mark.parametrize("role,name", role_names)
def test_role_names(role, name):
    assert str(role) == name


def test_participants():
    assert is_participant(Sender(frozenset({1})))
    assert is_participant(ReceiverInformed(0, frozenset()))
    assert not is_participant(NonParticipant())
    assert not is_participant(Aborted())


@pytest.mark.parametrize("protocol", list(Protocol))
def test_protocol_names(protocol):
    assert Protocol.from_name(str(protocol)) is protocol


def test_protocol_properties():
    assert str(Protocol.BIFULLY_ACKA) == "bifully-acka"
    assert Protocol.ACKA.uses_ghz and not Protocol.BACKA.uses_ghz
    assert Protocol.FULLY_ACKA.fully_anonymous
    with pytest.raises(ValueError, match="unknown protocol"):
        Protocol.from_name("cka")
