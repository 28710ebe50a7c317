import math

import pytest

from acka import ERROR_TOLERANCE, Protocol
from acka.core import ProtocolParams, validate_params
from acka.exceptions import InfeasibleSupplyError, ParamsValueError
from acka.netsim import CostReport
from acka.rates import (
    EpsilonComponents,
    FixedModel,
    allocate_epsilon,
    asymptotic_rates,
    conference_key_rate,
    epsilon_breakdown,
    epsilon_total,
    finite_key_length,
    gamma_fluctuation,
    network_uses,
    optimize_rate,
    private_bit_budget,
    scaling_ratios,
)
from acka.utils import transmittance

asymptotic_test_data = [
    (
        (4, 1.0, 0.0, 0.0, 0.0, 0.0),
        {"r": 1.0, "r_b": 1 / 6, "r_f": 1.0, "r_bf": 1 / 18},
    ),
    (
        (8, transmittance(8.0), 0.02, 0.02, 0.02, 0.02),
        {"r": 0.05856, "r_b": 0.027382, "r_f": 0.041186, "r_bf": 0.0039117},
    ),
]

scaling_test_data = [
    ((4, 1.0), (2.0, 6.0, 18.0)),
    ((2, 0.5), (2.0, 2.0, 2.0)),
    ((3, 0.5), (1.0, 2.0, 4.0)),
]

gamma_test_data = [
    (0.02, 10**5, 0.05, 1e-10),
    (0.02, 10**6, 0.01, 1e-10),
    (0.05, 10**7, 0.001, 1e-6),
    (0.0, 10**5, 0.1, 1e-10),
]


@pytest.mark.parametrize("args,expected", asymptotic_test_data)
def test_asymptotic_rates(args, expected):
    rates = asymptotic_rates(*args).as_dict()
    for name, value in expected.items():
        assert rates[name] == pytest.approx(value, abs=1e-5)


def test_cka_rates_without_errors():
    rates = asymptotic_rates(4, 1.0, 0.0, 0.0, 0.0, 0.0)
    assert rates.r_cka == pytest.approx(1.0)
    assert rates.r_bcka == pytest.approx(0.5)


def test_asymptotic_ratio_point():
    rates = asymptotic_rates(8, transmittance(8.0), 0.02, 0.02, 0.02, 0.02)
    assert rates.r_f / rates.r_bf == pytest.approx(10.53, abs=0.05)
    assert rates.r / rates.r_b == pytest.approx(2.139, abs=0.01)


def test_rates_without_bell_supply():
    rates = asymptotic_rates(5, 1.0, 0.02, 0.02, 0.2, 0.2)
    assert rates.r_b == rates.r_bf == rates.r_f == 0.0
    assert rates.r > 0


@pytest.mark.parametrize("args,ratios", scaling_test_data)
def test_scaling_ratios(args, ratios):
    assert scaling_ratios(*args) == pytest.approx(ratios)


def test_scaling_ratios_need_two_parties():
    with pytest.raises(ParamsValueError):
        scaling_ratios(1, 1.0)


@pytest.mark.parametrize("q_x,L,p,eps_x", gamma_test_data)
def test_gamma_solves_the_fluctuation_equation(q_x, L, p, eps_x):
    solve = gamma_fluctuation(q_x, L, p, eps_x)
    assert not solve.infeasible
    assert 0 < solve.gamma < 0.5 - q_x
    assert abs(solve.residual) < 1e-9


def test_gamma_shrinks_with_more_rounds():
    gammas = [
        gamma_fluctuation(0.02, L, 0.05, 1e-10).gamma
        for L in (10**4, 10**5, 10**6, 10**7)
    ]
    assert gammas == sorted(gammas, reverse=True)
    assert gammas[-1] < gammas[0] / 10


def test_gamma_infeasible_is_capped():
    solve = gamma_fluctuation(0.3, 200, 0.05, 1e-10)
    assert solve.infeasible
    assert solve.gamma == pytest.approx(0.2)


@pytest.mark.parametrize("p,L", [(0.0, 10**5), (1.0, 10**5), (0.01, 50)])
def test_gamma_domain(p, L):
    with pytest.raises(ParamsValueError):
        gamma_fluctuation(0.02, L, p, 1e-10)


def test_finite_key_length_fully():
    params = ProtocolParams(n=5, L=10**6, p=0.05)
    key = finite_key_length(Protocol.FULLY_ACKA, params)
    assert key.ell == key.ell_net == math.floor(key.ell_raw)
    assert 0 < key.ell < 10**6 * 0.95 * (1 - 2 * 0.1414)


def test_finite_key_length_acka_reports_net_length():
    params = ProtocolParams(n=5, L=10**6, p=0.05)
    acka = finite_key_length(Protocol.ACKA, params)
    fully = finite_key_length(Protocol.FULLY_ACKA, params)
    assert acka.ell > fully.ell > acka.ell_net > 0
    assert fully.ell_raw - acka.ell_net_raw == pytest.approx(
        10**6 * 0.286397 + 5, ERROR_TOLERANCE
    )


def test_finite_key_length_short_keys():
    key = finite_key_length(Protocol.FULLY_ACKA, ProtocolParams(L=500))
    assert key.ell == 0
    assert key.ell_raw < 0


def test_finite_key_length_only_for_ghz():
    with pytest.raises(ValueError):
        finite_key_length(Protocol.BACKA, ProtocolParams())


def test_epsilon_total_backa():
    c = EpsilonComponents(5, veto=2.0**-40, eps_enc=2.0**-40)
    assert epsilon_total(Protocol.BACKA, c) == pytest.approx(5 * 2.0**-40)


def test_epsilon_total_bifully():
    c = EpsilonComponents(5, veto=2.0**-40, notify=2.0**-40, eps_enc=2.0**-40)
    expected = 3 * 2.0**-40 + 4 * (2.0**-39 + 3 * 2.0**-40)
    assert epsilon_total(Protocol.BIFULLY_ACKA, c) == pytest.approx(expected)


def test_epsilon_breakdown_terms():
    c = EpsilonComponents.from_params(ProtocolParams())
    assert set(epsilon_breakdown(Protocol.ACKA, c)) == {
        "veto",
        "enc",
        "x",
        "ec",
        "pa",
    }
    assert "notify" in epsilon_breakdown(Protocol.FULLY_ACKA, c)


@pytest.mark.parametrize("protocol", list(Protocol))
@pytest.mark.parametrize("eps_target", [1e-8, 1e-12])
def test_allocation_meets_the_target(protocol, eps_target):
    alloc = allocate_epsilon(protocol, 6, eps_target)
    params = alloc.apply(ProtocolParams(n=6))
    total = epsilon_total(protocol, EpsilonComponents.from_params(params))
    assert total <= eps_target * (1 + 1e-9)
    assert total > eps_target / 10
    validate_params(params)


def test_private_bit_budget_identity():
    vp = validate_params(
        ProtocolParams(n=4, m=1, r_v=40, eps_enc=2.0**-10)
    )
    budget = private_bit_budget(Protocol.ACKA, vp)
    assert budget["id"] == 48 * (120 + 31) == 7248


def test_private_bit_budget_bell_benchmarks():
    vp = validate_params(ProtocolParams(n=5, L_b=100))
    assert private_bit_budget(Protocol.BACKA, vp)["key"] == 20 * 100
    bifully = private_bit_budget(Protocol.BIFULLY_ACKA, vp)
    assert bifully["key"] == 4 * 20 * vp.bifully_codeword_len
    assert bifully["notification"] == 4 * 5 * 20 * 40


def test_network_uses_analytic():
    params = ProtocolParams(n=4, eta=0.5, L=1000, q_xb=0.0, q_zb=0.0)
    uses = network_uses(Protocol.ACKA, params)
    assert uses.ghz_uses == pytest.approx(16_000)
    assert uses.bell_uses == pytest.approx(uses.private_bits / 0.5)
    assert uses.l_tot == uses.ghz_uses + uses.bell_uses


def test_network_uses_from_a_ledger():
    params = ProtocolParams(n=4, q_xb=0.0, q_zb=0.0)
    ledger = CostReport(ghz_network_uses=300, private_bits_consumed=100)
    uses = network_uses(Protocol.FULLY_ACKA, params, ledger=ledger)
    assert uses.l_tot == pytest.approx(300 + 50)


def test_network_uses_ell_request():
    params = ProtocolParams(n=4, q_xb=0.0, q_zb=0.0)
    uses = network_uses(Protocol.BACKA, params, ell_request=1000)
    assert uses.breakdown["key"] == 12 * 1000


def test_network_uses_infeasible_supply():
    with pytest.raises(InfeasibleSupplyError):
        network_uses(Protocol.BACKA, ProtocolParams(q_xb=0.2, q_zb=0.2))


def test_conference_key_rate_backa():
    params = ProtocolParams(n=4, L_b=1000, q_xb=0.0, q_zb=0.0)
    report = conference_key_rate(Protocol.BACKA, params)
    assert report.ell == 1000
    assert report.rate == pytest.approx(1000 / report.l_tot)
    assert report.p_opt == 0.0


def test_finite_rate_approaches_the_asymptotic_one():
    eta = transmittance(8.0)
    params = ProtocolParams(
        n=8, m=1, eta=eta, q_x=0.02, q_z=0.02, q_xb=0.02, q_zb=0.02
    )
    expected = asymptotic_rates(8, eta, 0.02, 0.02, 0.02, 0.02)
    fully = conference_key_rate(
        Protocol.FULLY_ACKA, params.replace(L=10**14, p=1e-6)
    )
    backa = conference_key_rate(Protocol.BACKA, params.replace(L_b=10**12))
    assert fully.rate == pytest.approx(expected.r_f, rel=0.005)
    assert backa.rate == pytest.approx(expected.r_b, rel=0.005)


def test_optimize_bell_benchmark():
    model = FixedModel(5, transmittance(2.0), 0.07, 0.04, 0.011, 0.011)
    report = optimize_rate(Protocol.BACKA, 1e6, model)
    assert report.rate > 0
    assert report.l_tot <= 1e6
    assert report.eps_tot <= 1e-8 * (1 + 1e-9)


def test_optimize_with_infeasible_supply():
    model = FixedModel(5, 1.0, 0.02, 0.02, 0.2, 0.2)
    report = optimize_rate(Protocol.FULLY_ACKA, 1e8, model)
    assert report.rate == 0.0
    assert report.infeasible


@pytest.mark.slow
def test_optimize_ghz_protocol():
    model = FixedModel(5, transmittance(2.0), 0.07, 0.04, 0.011, 0.011)
    small = optimize_rate(Protocol.ACKA, 1e6, model)
    large = optimize_rate(Protocol.ACKA, 1e10, model)
    assert large.rate > small.rate
    assert 0 < large.p_opt <= 0.2
    assert large.l_tot <= 1e10
