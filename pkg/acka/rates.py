r"""Key lengths, security parameters and conference key rates.

The conference key rate is the number of secret bits per *network use*: one
emission of either a GHZ state to all ``n`` parties or ``floor(n/2)``
parallel Bell pairs. Private channel bits are paid for with Bell pairs at
the asymptotic BB84 rate :func:`acka.quantum.bell_secret_bit_supply`;
broadcast bits are free.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from acka import Protocol
from acka.core import ProtocolParams, ValidatedParams, validate_params
from acka.exceptions import InfeasibleSupplyError, ParamsValueError
from acka.netsim import CostReport
from acka.quantum import bell_secret_bit_supply
from acka.utils import binary_entropy, ceil_log2, log_binomial

logger = logging.getLogger(__name__)

P_MAX = 0.2
P_MIN = 1e-7
P_GRID = 24
SHARE_GRID = np.geomspace(0.05, 0.9, 8)


# -- statistical fluctuation -------------------------------------------------


@dataclass(frozen=True, slots=True)
class GammaSolve:
    """Root of the fluctuation equation.

    ``residual`` is the equation residual divided by
    ``max(1, |ln C(L, Lp)|)``: the log-binomials are differences of
    log-gamma values of order ``L ln L``, so only a relative residual is
    meaningful in double precision.
    """

    q_x: float
    L: float
    p: float
    eps_x: float
    gamma: float
    residual: float
    infeasible: bool = False


def _fluctuation_equation(gamma, q_x, L, p, eps_x) -> float:
    k_test = L * p
    first = log_binomial(L * (1 - p) * gamma + L * q_x, k_test * q_x)
    second = log_binomial(
        L * (1 - q_x) - L * (1 - p) * gamma, k_test * (1 - q_x)
    )
    return float(
        first + second - log_binomial(L, k_test) - 2 * math.log(eps_x)
    )


def gamma_fluctuation(
    q_x: float, L: float, p: float, eps_x: float
) -> GammaSolve:
    r"""Positive root :math:`\gamma` of

    .. math::

        \ln\binom{L(1-p)\gamma + LQ_X}{LpQ_X}
        + \ln\binom{L(1-Q_X) - L(1-p)\gamma}{Lp(1-Q_X)}
        = \ln\binom{L}{Lp} + 2\ln\varepsilon_x

    searched on :math:`[0, 1/2 - Q_X]`. Without a sign change in the
    bracket the result is capped at :math:`1/2 - Q_X` and flagged
    infeasible.
    """
    if not 0 < p < 1:
        msg = f"p must be in (0,1), got {p}"
        raise ParamsValueError(msg)
    if not 0 <= q_x < 0.5:
        msg = f"Q_X must be in [0,1/2), got {q_x}"
        raise ParamsValueError(msg)
    if L * p < 1:
        msg = f"need L >= 1/p, got L={L}, p={p}"
        raise ParamsValueError(msg)

    scale = max(1.0, abs(float(log_binomial(L, L * p))))
    hi = 0.5 - q_x

    def f(g):
        return _fluctuation_equation(g, q_x, L, p, eps_x)

    f0 = f(0.0)
    if f0 <= 0:
        return GammaSolve(q_x, L, p, eps_x, 0.0, f0 / scale)

    f_hi = f(hi)
    if f_hi > 0:
        logger.warning(
            "no fluctuation root below 1/2 - Q_X (L=%g, p=%g, Q_X=%g)",
            L,
            p,
            q_x,
        )
        return GammaSolve(q_x, L, p, eps_x, hi, f_hi / scale, True)

    gamma = optimize.brentq(
        f, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500
    )
    return GammaSolve(q_x, L, p, eps_x, gamma, f(gamma) / scale)


# -- key lengths --------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class KeyLength:
    """Final key lengths; ``*_raw`` are the unfloored real values."""

    ell: int
    ell_net: int
    ell_raw: float
    ell_net_raw: float
    gamma: float
    infeasible: bool = False


def _phase_bracket(q_x: float, gamma: float, q_z: float) -> float:
    return 1 - binary_entropy(min(q_x + gamma, 0.5)) - binary_entropy(q_z)


def gamma_for(params: ProtocolParams) -> GammaSolve:
    """Fluctuation at the threshold ``params.q_x``; capped and flagged
    infeasible when fewer than one test round is expected."""
    L, p = params.L, params.p
    if not 0 < p < 1 or L * p < 1:
        cap = 0.5 - params.q_x
        return GammaSolve(params.q_x, L, p, params.eps_x, cap, 0.0, True)
    return gamma_fluctuation(params.q_x, L, p, params.eps_x)


def finite_key_length(
    protocol: Protocol,
    params: ProtocolParams,
    gamma: Optional[GammaSolve] = None,
) -> KeyLength:
    r"""Key lengths of the GHZ protocols.

    fully-ACKA:

    .. math::

        \ell = L(1-p)\left[1 - h(Q_X + \gamma) - h(Q_Z)\right]
               - \log_2\frac{2(n-1)}{\varepsilon_{EC}}
               - 2\log_2\frac{1}{2\varepsilon_{PA}}

    ACKA reports the length handed to privacy amplification,
    :math:`L(1-p)[1 - h(Q_X+\gamma)] - 2\log_2(1/2\varepsilon_{PA})`, as
    ``ell``, and the net length (the fully-ACKA expression minus
    :math:`L h(p) + n` consumed pre-shared bits) as ``ell_net``. Both are
    floored and clipped at zero.
    """
    if not protocol.uses_ghz:
        msg = f"{protocol} does not distribute GHZ states"
        raise ValueError(msg)

    g = gamma if gamma is not None else gamma_for(params)
    n, L, p = params.n, params.L, params.p
    key_rounds = L * (1 - p)
    ec_term = math.log2(2 * (n - 1) / params.eps_ec)
    pa_term = 2 * math.log2(1 / (2 * params.eps_pa))
    net = key_rounds * _phase_bracket(params.q_x, g.gamma, params.q_z)
    net -= ec_term + pa_term

    if protocol is Protocol.ACKA:
        gross = key_rounds * _phase_bracket(params.q_x, g.gamma, 0.0)
        gross -= pa_term
        net -= L * binary_entropy(p) + n
    else:
        gross = net

    return KeyLength(
        max(0, math.floor(gross)),
        max(0, math.floor(net)),
        gross,
        net,
        g.gamma,
        g.infeasible,
    )


# -- security parameter -------------------------------------------------------


@dataclass(frozen=True, slots=True)
class EpsilonComponents:
    """Failure probabilities entering the total security parameter.

    ``veto`` and ``notify`` are :math:`2^{-r_V}` and :math:`2^{-r_N}`.
    """

    n: int
    veto: float = 0.0
    notify: float = 0.0
    eps_enc: float = 0.0
    eps_ec: float = 0.0
    eps_pa: float = 0.0
    eps_x: float = 0.0

    @classmethod
    def from_params(cls, params: ProtocolParams) -> "EpsilonComponents":
        return cls(
            params.n,
            2.0**-params.r_v,
            2.0**-params.r_n,
            params.eps_enc,
            params.eps_ec,
            params.eps_pa,
            params.eps_x,
        )


def epsilon_breakdown(
    protocol: Protocol, c: EpsilonComponents
) -> dict[str, float]:
    """Additive terms of the total security parameter."""
    k = c.n - 1
    if protocol is Protocol.ACKA:
        return {
            "veto": c.veto,
            "enc": k * c.eps_enc,
            "x": 2 * c.eps_x,
            "ec": c.eps_ec,
            "pa": c.eps_pa,
        }
    elif protocol is Protocol.FULLY_ACKA:
        return {
            "veto": 4 * c.veto,
            "enc": 6 * k * c.eps_enc,
            "notify": 2 * k * c.notify,
            "ec": c.eps_ec,
            "x": 6 * c.eps_x,
            "pa": 3 * c.eps_pa,
        }
    elif protocol is Protocol.BACKA:
        return {"veto": c.veto, "enc": k * c.eps_enc}
    elif protocol is Protocol.BIFULLY_ACKA:
        return {
            "veto": 3 * c.veto,
            "notify": 2 * k * c.notify,
            "enc": 3 * k * c.eps_enc,
        }
    else:
        msg = f"unknown protocol {protocol}"
        raise ValueError(msg)


def epsilon_total(protocol: Protocol, components: EpsilonComponents) -> float:
    return sum(epsilon_breakdown(protocol, components).values())


@dataclass(frozen=True, slots=True)
class EpsilonAllocation:
    r_v: int
    r_n: int
    eps_enc: float
    eps_ec: float
    eps_pa: float
    eps_x: float

    def apply(self, params: ProtocolParams) -> ProtocolParams:
        return params.replace(
            r_v=self.r_v,
            r_n=self.r_n,
            eps_enc=self.eps_enc,
            eps_ec=self.eps_ec,
            eps_pa=self.eps_pa,
            eps_x=self.eps_x,
        )


# (veto coefficient, enc coefficient, notify coefficient, #terms)
_CLASSICAL_TERMS = {
    Protocol.ACKA: (1, 1, 0, 5),
    Protocol.FULLY_ACKA: (4, 6, 2, 6),
    Protocol.BACKA: (1, 1, 0, 2),
    Protocol.BIFULLY_ACKA: (3, 3, 2, 3),
}


def allocate_epsilon(
    protocol: Protocol, n: int, eps_target: float, share: float = 1 / 3
) -> EpsilonAllocation:
    """Split ``eps_target`` over the terms of the security parameter.

    ``r_V``, ``r_N`` and ``eps_enc`` are the smallest choices (powers of
    two for ``eps_enc``) keeping each of their terms below
    ``eps_target / #terms``. For the GHZ protocols the remainder goes to the
    ``eps_x`` term (fraction ``share``) and evenly to the error correction
    and privacy amplification terms.
    """
    veto_c, enc_c, notify_c, terms = _CLASSICAL_TERMS[protocol]
    per_term = eps_target / terms
    r_v = ceil_log2(veto_c / per_term)
    eps_enc = 2.0 ** -ceil_log2(enc_c * (n - 1) / per_term)
    r_n = ceil_log2(notify_c * (n - 1) / per_term) if notify_c else 1

    used = veto_c * 2.0**-r_v + enc_c * (n - 1) * eps_enc
    if notify_c:
        used += notify_c * (n - 1) * 2.0**-r_n
    rest = eps_target - used

    if protocol is Protocol.ACKA:
        x_c, ec_c, pa_c = 2, 1, 1
    else:
        x_c, ec_c, pa_c = 6, 1, 3

    if protocol.uses_ghz:
        eps_x = share * rest / x_c
        eps_ec = (1 - share) * rest / 2 / ec_c
        eps_pa = (1 - share) * rest / 2 / pa_c
    else:
        eps_x = eps_ec = eps_pa = 0.5

    return EpsilonAllocation(r_v, r_n, eps_enc, eps_ec, eps_pa, eps_x)


# -- asymptotic rates ---------------------------------------------------------


@dataclass(frozen=True, slots=True)
class AsymptoticRates:
    r: float
    r_b: float
    r_f: float
    r_bf: float
    r_cka: float
    r_bcka: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.__slots__}


def asymptotic_rates(
    n: int, eta: float, q_x: float, q_z: float, q_xb: float, q_zb: float
) -> AsymptoticRates:
    r"""Asymptotic conference key rates.

    With :math:`B = [1 - h(Q_X) - h(Q_Z)]^+` and
    :math:`B_b = [1 - h(Q_{Xb}) - h(Q_{Zb})]^+`:

    .. math::

        r^\infty = r^\infty_{cka} = \eta^n B, \qquad
        r^\infty_b = \frac{\lfloor n/2 \rfloor \eta^2 B_b}{n(n-1)}, \qquad
        r^\infty_{bf} = \frac{\lfloor n/2 \rfloor \eta^2 B_b}{n(n-1)^2},

        r^\infty_f = \frac{\eta^n B}{1 + \frac{n(n-1)\eta^{n-2} h(Q_Z)}
                     {\lfloor n/2 \rfloor B_b}}, \qquad
        r^\infty_{bcka} = \tfrac12 \eta^2 B_b .
    """
    ghz = max(0.0, 1 - binary_entropy(q_x) - binary_entropy(q_z))
    bell = max(0.0, 1 - binary_entropy(q_xb) - binary_entropy(q_zb))
    pairs = n // 2

    r = eta**n * ghz
    r_b = pairs * eta**2 * bell / (n * (n - 1))
    r_bf = pairs * eta**2 * bell / (n * (n - 1) ** 2)

    h_z = binary_entropy(q_z)
    if bell > 0:
        overhead = n * (n - 1) * eta ** (n - 2) * h_z / (pairs * bell)
        r_f = r / (1 + overhead)
    else:
        r_f = r if h_z == 0 else 0.0

    return AsymptoticRates(r, r_b, r_f, r_bf, r, 0.5 * eta**2 * bell)


def scaling_ratios(n: int, eta: float) -> tuple[float, float, float]:
    """Ratios of the GHZ to the Bell pair rates without errors:
    CKA/bCKA, ACKA/bACKA and fully-ACKA/bifully-ACKA."""
    if n < 2:
        msg = f"n must be at least 2, got {n}"
        raise ParamsValueError(msg)

    base = 2 * eta ** (n - 2)
    return base, (n - 1) * base, (n - 1) ** 2 * base


# -- network uses -------------------------------------------------------------


def private_bit_budget(
    protocol: Protocol, params: ValidatedParams
) -> dict[str, int]:
    """Closed-form private channel bits charged by each sub-protocol."""
    raw = params.params
    n = raw.n
    parity = n * (n - 1)

    if protocol in (Protocol.ACKA, Protocol.BACKA):
        budget = {"id": n * parity * (3 * raw.r_v + params.id_codeword_len)}
    else:
        budget = {
            "id": n * parity * (3 * raw.r_v + params.fully_id_codeword_len)
        }

    if protocol is Protocol.ACKA:
        budget["testing_key"] = parity * params.testing_key_len
        budget["test_rounds"] = parity * params.test_rounds

    elif protocol is Protocol.FULLY_ACKA:
        budget["tkd"] = (
            n * parity * (n - 1) * raw.r_n
            + parity * (n - 1) * params.tkd_key_len
        )
        budget["testing_key"] = parity * params.testing_key_len
        budget["test_rounds"] = parity * params.test_rounds
        budget["verification"] = n * parity * raw.r_v
        budget["ec"] = parity * (
            params.syndrome_len + params.hash_len + params.verdict_len
        )

    elif protocol is Protocol.BACKA:
        budget["key"] = parity * raw.L_b

    elif protocol is Protocol.BIFULLY_ACKA:
        budget["notification"] = (n - 1) * n * parity * raw.r_n
        budget["key"] = (n - 1) * parity * params.bifully_codeword_len
        budget["verification"] = n * parity * raw.r_v

    return budget


@dataclass(frozen=True, slots=True)
class NetworkUses:
    ghz_uses: float
    bell_uses: float
    private_bits: int
    breakdown: dict[str, int] = field(default_factory=dict)

    @property
    def l_tot(self) -> float:
        return self.ghz_uses + self.bell_uses


def network_uses(
    protocol: Protocol,
    params: ProtocolParams,
    ell_request: Optional[int] = None,
    ledger: Optional[CostReport] = None,
) -> NetworkUses:
    """Network uses of one protocol run.

    Analytic mode (no ``ledger``): ``L / eta**n`` GHZ emissions and the
    closed-form private bits of :func:`private_bit_budget`. Simulation
    mode: the GHZ attempts and private bits metered by the fabric. Private
    bits are converted to Bell pair network uses at the supply rate.

    :param ell_request: key length ``L_b`` of the Bell pair benchmarks,
        overriding ``params.L_b``
    """
    if ell_request is not None:
        params = params.replace(L_b=ell_request)

    supply = bell_secret_bit_supply(
        params.n, params.eta, params.q_xb, params.q_zb
    )

    if ledger is not None:
        ghz = float(ledger.ghz_network_uses)
        private = ledger.private_bits_consumed
        breakdown = {"measured": private}
    else:
        vp = validate_params(params)
        ghz = params.L / params.eta**params.n if protocol.uses_ghz else 0.0
        breakdown = private_bit_budget(protocol, vp)
        private = sum(breakdown.values())

    if supply <= 0:
        msg = (
            f"Bell pairs with Q_Xb={params.q_xb}, Q_Zb={params.q_zb} cannot "
            "refill the private channels"
        )
        raise InfeasibleSupplyError(msg)

    return NetworkUses(ghz, private / supply, private, breakdown)


# -- rate reports -------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class RateReport:
    protocol: Protocol
    ell: int
    ell_net: int
    l_tot: float
    rate: float
    eps_breakdown: dict[str, float]
    params_used: ProtocolParams
    gamma: float = 0.0
    infeasible: bool = False

    @property
    def eps_tot(self) -> float:
        return sum(self.eps_breakdown.values())

    @property
    def p_opt(self) -> float:
        return self.params_used.p if self.protocol.uses_ghz else 0.0


def conference_key_rate(
    protocol: Protocol, params: ProtocolParams
) -> RateReport:
    """Analytic rate of ``protocol`` at one fixed parameter point."""
    eps = epsilon_breakdown(protocol, EpsilonComponents.from_params(params))
    uses = network_uses(protocol, params)

    if protocol.uses_ghz:
        key = finite_key_length(protocol, params)
        ell, ell_net, gamma, infeasible = (
            key.ell,
            key.ell_net,
            key.gamma,
            key.infeasible,
        )
        extracted = ell_net if protocol is Protocol.ACKA else ell
    else:
        ell = ell_net = extracted = params.L_b
        gamma, infeasible = 0.0, False

    rate = extracted / uses.l_tot if uses.l_tot > 0 else 0.0
    return RateReport(
        protocol,
        ell,
        ell_net,
        uses.l_tot,
        rate,
        eps,
        params,
        gamma,
        infeasible,
    )


# -- optimizer ----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class FixedModel:
    """Noise and loss model held fixed while optimizing."""

    n: int
    eta: float
    q_x: float
    q_z: float
    q_xb: float
    q_zb: float

    def base_params(self) -> ProtocolParams:
        return ProtocolParams(
            n=self.n,
            m=1,
            eta=self.eta,
            q_x=self.q_x,
            q_z=self.q_z,
            q_xb=self.q_xb,
            q_zb=self.q_zb,
        )


def _largest_feasible(cost, lo: int, budget: float) -> int:
    """Largest integer ``x >= lo`` with ``cost(x) <= budget``, 0 if none.

    ``cost`` must be non-decreasing.
    """
    if cost(lo) > budget:
        return 0

    hi = max(2 * lo, 2)
    while cost(hi) <= budget:
        lo, hi = hi, 2 * hi

    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cost(mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


def _zero_report(protocol: Protocol, params: ProtocolParams) -> RateReport:
    eps = epsilon_breakdown(protocol, EpsilonComponents.from_params(params))
    return RateReport(protocol, 0, 0, 0.0, 0.0, eps, params, 0.0, True)


def _ghz_point(
    protocol: Protocol, base: ProtocolParams, budget: float, p: float
) -> Optional[RateReport]:
    def cost(L: int) -> float:
        return network_uses(protocol, base.replace(L=L, p=p)).l_tot

    L = _largest_feasible(cost, math.ceil(1 / p), budget)
    if L == 0:
        return None
    return conference_key_rate(protocol, base.replace(L=L, p=p))


def _optimize_ghz(
    protocol: Protocol, model: FixedModel, budget: float, eps_target: float
) -> RateReport:
    best: Optional[RateReport] = None
    base0 = model.base_params()

    for share in SHARE_GRID:
        alloc = allocate_epsilon(protocol, model.n, eps_target, share)
        base = alloc.apply(base0)

        def rate_at(log_p: float) -> float:
            point = _ghz_point(protocol, base, budget, 10**log_p)
            return point.rate if point is not None else 0.0

        grid = np.linspace(math.log10(P_MIN), math.log10(P_MAX), P_GRID)
        rates = [rate_at(x) for x in grid]
        i = int(np.argmax(rates))
        candidates = [grid[i]]
        if rates[i] > 0:
            lo = grid[max(i - 1, 0)]
            hi = grid[min(i + 1, P_GRID - 1)]
            refined = optimize.minimize_scalar(
                lambda x: -rate_at(x),
                bounds=(lo, hi),
                method="bounded",
                options={"xatol": 1e-4},
            )
            candidates.append(float(refined.x))

        for log_p in candidates:
            point = _ghz_point(protocol, base, budget, 10**log_p)
            if point is not None and (best is None or point.rate > best.rate):
                best = point

    if best is None or best.rate <= 0:
        alloc = allocate_epsilon(protocol, model.n, eps_target)
        return _zero_report(protocol, alloc.apply(base0))
    return best


def _optimize_bell(
    protocol: Protocol, model: FixedModel, budget: float, eps_target: float
) -> RateReport:
    alloc = allocate_epsilon(protocol, model.n, eps_target)
    base = alloc.apply(model.base_params())

    def cost(L_b: int) -> float:
        return network_uses(protocol, base.replace(L_b=L_b)).l_tot

    L_b = _largest_feasible(cost, 1, budget)
    if L_b == 0:
        return _zero_report(protocol, base)
    return conference_key_rate(protocol, base.replace(L_b=L_b))


def optimize_rate(
    protocol: Protocol,
    l_tot_budget: float,
    model: FixedModel,
    eps_target: float = 1e-8,
) -> RateReport:
    """Largest conference key rate reachable with ``l_tot_budget`` network
    uses at total security parameter ``eps_target``.

    GHZ protocols: for each point of a geometric grid over the split of
    ``eps_target``, a log-grid scan over ``p`` in ``(0, 0.2]`` refined by a
    bounded golden-section search; ``L`` is the largest number of rounds
    whose network uses fit the budget. Bell pair benchmarks: the largest
    ``L_b`` that fits.
    """
    if bell_secret_bit_supply(model.n, model.eta, model.q_xb, model.q_zb) <= 0:
        logger.warning("infeasible Bell supply, zero rate for %s", protocol)
        alloc = allocate_epsilon(protocol, model.n, eps_target)
        return _zero_report(protocol, alloc.apply(model.base_params()))

    if protocol.uses_ghz:
        report = _optimize_ghz(protocol, model, l_tot_budget, eps_target)
    else:
        report = _optimize_bell(protocol, model, l_tot_budget, eps_target)

    logger.info(
        "%s at L_tot=%g: rate %.6g (p=%.3g)",
        protocol,
        l_tot_budget,
        report.rate,
        report.p_opt,
    )
    return report
