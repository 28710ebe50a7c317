import math

import numpy as np
import pytest

from acka import ERROR_TOLERANCE
from acka.exceptions import DomainError
from acka.utils import (
    binary_entropy,
    bits_to_hex,
    bits_to_int,
    ceil_,
    ceil_log2,
    int_to_bits,
    log_binomial,
    sig,
    transmittance,
)

entropy_test_data = [(0.0, 0.0), (0.5, 1.0), (1.0, 0.0), (0.11, 0.49992)]

transmittance_test_data = [(0, 1.0), (2, 0.92469), (8, 0.73114), (10, 0.67608)]

ceil_log2_test_data = [(1, 0), (2, 1), (8, 3), (9, 4), (4e10, 36)]


def test_binary_entropy_at_two_percent():
    assert binary_entropy(0.02) == pytest.approx(0.141441, abs=1e-6)


@pytest.mark.parametrize("x,h", entropy_test_data)
def test_binary_entropy(x, h):
    assert binary_entropy(x) == pytest.approx(h, abs=1e-5)


def test_binary_entropy_array():
    h = binary_entropy(np.array([0.02, 0.98]))
    assert h.shape == (2,)
    assert h[0] == pytest.approx(h[1])


@pytest.mark.parametrize("x", [-0.1, 1.5, float("nan")])
def test_binary_entropy_domain(x):
    with pytest.raises(DomainError):
        binary_entropy(x)


@pytest.mark.parametrize("d,eta", transmittance_test_data)
def test_transmittance(d, eta):
    assert transmittance(d) == pytest.approx(eta, abs=1e-5)


def test_transmittance_domain():
    with pytest.raises(DomainError):
        transmittance(-1)


@pytest.mark.parametrize("x,expected", ceil_log2_test_data)
def test_ceil_log2(x, expected):
    assert ceil_log2(x) == expected


def test_ceil_log2_exact_power_of_two():
    assert ceil_log2(1 / 2.0**-32) == 32
    with pytest.raises(DomainError):
        ceil_log2(0.5)


def test_ceil_ignores_rounding_noise():
    assert ceil_(0.1 * 3 * 10) == 3
    assert ceil_(3.2) == 4


def test_log_binomial():
    assert log_binomial(10, 3) == pytest.approx(math.log(120), ERROR_TOLERANCE)
    assert np.isfinite(log_binomial(1e12, 1e10))


def test_bits_round_trip():
    bits = int_to_bits(5, 4)
    assert bits.tolist() == [0, 1, 0, 1]
    assert bits_to_int(bits) == 5
    with pytest.raises(DomainError):
        int_to_bits(16, 4)


def test_bits_to_hex():
    bits = np.array([1, 0, 1, 0, 0, 0, 0, 0, 1], dtype=np.uint8)
    assert bits_to_hex(bits) == "a080"
    assert bits_to_hex(np.zeros(0, dtype=np.uint8)) == "-"


def test_sig():
    assert sig(1 / 3) == "0.333333333"
    assert sig(1e-12, 3) == "1e-12"
