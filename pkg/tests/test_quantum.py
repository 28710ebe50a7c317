import numpy as np
import pytest

from acka import ERROR_TOLERANCE
from acka.exceptions import OracleSizeError, ParamsValueError
from acka.quantum import (
    Basis,
    DirectRates,
    PauliPerQubit,
    bell_secret_bit_supply,
    detection_attempts,
    joint_distribution_oracle,
    sample_detected_rounds,
    sample_ghz_round,
)
from acka.utils import transmittance

supply_test_data = [
    ((4, 1.0, 0.0, 0.0), 2.0),
    ((5, 1.0, 0.0, 0.0), 2.0),
    ((8, transmittance(8.0), 0.02, 0.02), 1.53339),
    ((4, 1.0, 0.12, 0.12), 0.0),
]

effective_q_x_test_data = [(0.0101, 2, 0.02), (0.0, 8, 0.0), (0.01, 3, 0.0294)]

oracle_test_data = [
    (3, DirectRates(0.1, 0.05), (1, 1, 1)),
    (3, PauliPerQubit(0.05, 0.1), (1, 1, 1)),
    (3, DirectRates(0.1, 0.15), (0, 1, 0)),
    (4, DirectRates(0.2, 0.1, (0.0, 0.05, 0.2, 0.1)), (0, 0, 1, 0)),
    (4, PauliPerQubit(0.03, 0.1), (1, 0, 0, 1)),
    (4, DirectRates(0.05, 0.1), (0, 0, 0, 0)),
]


@pytest.mark.parametrize("args,supply", supply_test_data)
def test_bell_secret_bit_supply(args, supply):
    assert bell_secret_bit_supply(*args) == pytest.approx(supply, abs=1e-4)


def test_bell_supply_just_below_the_bb84_threshold():
    # h(0.11) is a hair below 1/2, so the supply is tiny but positive
    assert 0 < bell_secret_bit_supply(4, 1.0, 0.11, 0.11) < 1e-3


@pytest.mark.parametrize("q_phase,n,q_x", effective_q_x_test_data)
def test_pauli_effective_q_x(q_phase, n, q_x):
    noise = PauliPerQubit(q_phase, 0.0)
    assert noise.effective_q_x(n) == pytest.approx(q_x, abs=1e-4)


def test_pauli_effective_q_z():
    assert PauliPerQubit(0.0, 0.1).effective_q_z() == pytest.approx(0.18)


@pytest.mark.parametrize(
    "rates", [(0.6, 0.0), (0.0, -0.1), (0.1, 0.1, (0.5,))]
)
def test_direct_rates_range(rates):
    with pytest.raises(ParamsValueError):
        DirectRates(*rates)


def test_oracle_all_x():
    table = joint_distribution_oracle(3, DirectRates(0.1, 0.0), [Basis.X] * 3)
    for bits, prob in table.items():
        expected = 0.1 / 4 if sum(bits) % 2 else 0.9 / 4
        assert prob == pytest.approx(expected)


@pytest.mark.parametrize(
    "noise",
    [DirectRates(0.1, 0.05), PauliPerQubit(0.03, 0.02)],
)
@pytest.mark.parametrize(
    "bases", [(1, 1, 1, 1), (0, 0, 0, 0), (0, 1, 1, 0), (1, 0, 1, 1)]
)
def test_oracle_is_normalised(noise, bases):
    table = joint_distribution_oracle(4, noise, bases)
    assert len(table) == 16
    assert sum(table.values()) == pytest.approx(1.0)


def test_oracle_all_z_without_errors():
    table = joint_distribution_oracle(3, DirectRates(0.1, 0.0), [Basis.Z] * 3)
    assert table[(0, 0, 0)] == table[(1, 1, 1)] == pytest.approx(0.5)
    assert table[(0, 1, 0)] == 0


def test_oracle_size():
    with pytest.raises(OracleSizeError):
        joint_distribution_oracle(5, DirectRates(0.0, 0.0), [Basis.X] * 5)


def test_sampled_x_parity_matches_q_x():
    rng = np.random.default_rng(0)
    bases = np.full((3, 20_000), Basis.X)
    out = sample_detected_rounds(DirectRates(0.1, 0.0), bases, rng)
    odd = np.bitwise_xor.reduce(out, axis=0).mean()
    assert odd == pytest.approx(0.1, abs=0.01)


def test_sampled_pauli_parity_matches_effective_q_x():
    rng = np.random.default_rng(1)
    bases = np.full((2, 50_000), Basis.X)
    out = sample_detected_rounds(PauliPerQubit(0.0101, 0.0), bases, rng)
    odd = np.bitwise_xor.reduce(out, axis=0).mean()
    assert odd == pytest.approx(0.02, abs=0.003)


def test_sampled_z_bits_follow_the_reference():
    rng = np.random.default_rng(2)
    bases = np.full((4, 20_000), Basis.Z)
    bases[3] = Basis.X
    out = sample_detected_rounds(DirectRates(0.0, 0.05), bases, rng, 1)
    for t in (0, 2):
        disagree = (out[t] != out[1]).mean()
        assert disagree == pytest.approx(0.05, abs=0.01)
    assert out[3].mean() == pytest.approx(0.5, abs=0.02)


def test_per_party_z_rates():
    rng = np.random.default_rng(3)
    noise = DirectRates(0.0, 0.0, q_z_per_party=(0.0, 0.0, 0.2))
    bases = np.full((3, 20_000), Basis.Z)
    out = sample_detected_rounds(noise, bases, rng, 0)
    assert np.array_equal(out[0], out[1])
    assert (out[2] != out[0]).mean() == pytest.approx(0.2, abs=0.02)


def test_sample_ghz_round():
    rng = np.random.default_rng(4)
    sample = sample_ghz_round(3, 1.0, DirectRates(0.0, 0.0), [0, 0, 0], rng)
    assert sample.detected
    assert len(set(sample.outcomes.tolist())) == 1


def test_detection_attempts():
    rng = np.random.default_rng(5)
    assert detection_attempts(0, 5, 0.5, rng) == 0
    assert detection_attempts(100, 5, 1.0, rng) == 100
    attempts = detection_attempts(10_000, 2, 0.5, rng)
    assert attempts / 10_000 == pytest.approx(4.0, ERROR_TOLERANCE * 5)


def _frequencies(out):
    """Empirical outcome distribution in the oracle's enumeration order."""
    n = out.shape[0]
    index = 2 ** np.arange(n - 1, -1, -1) @ out.astype(np.int64)
    return np.bincount(index, minlength=2**n) / out.shape[1]


def _oracle(n, noise, bases):
    return np.array(list(joint_distribution_oracle(n, noise, bases).values()))


@pytest.mark.parametrize("n,noise,bases", oracle_test_data)
def test_sampled_rounds_match_the_oracle(n, noise, bases):
    rng = np.random.default_rng(sum(bases) + 10 * n)
    columns = np.repeat(np.array(bases)[:, None], 40_000, axis=1)
    out = sample_detected_rounds(noise, columns, rng, reference=0)
    distance = np.abs(_frequencies(out) - _oracle(n, noise, bases)).sum() / 2
    assert distance < 0.02


def test_sampled_ghz_rounds_match_the_oracle():
    rng = np.random.default_rng(6)
    noise, bases = DirectRates(0.1, 0.15), (0, 1, 0)
    samples = [
        sample_ghz_round(3, 0.9, noise, bases, rng, reference=0)
        for _ in range(20_000)
    ]
    out = np.array([s.outcomes for s in samples if s.detected]).T
    assert out.shape[1] / 20_000 == pytest.approx(0.9**3, abs=0.02)
    distance = np.abs(_frequencies(out) - _oracle(3, noise, bases)).sum() / 2
    assert distance < 0.03
