from typing import Iterable, Optional

from acka import Protocol
from acka.core import ValidatedParams
from acka.exceptions import ParamsValueError
from acka.protocols import RunOutcome
from acka.protocols.bipartite import run_backa, run_bifully_acka
from acka.protocols.ghz import run_acka, run_fully_acka


def default_receivers(n: int, m: int, sender: int) -> frozenset[int]:
    """The ``m`` parties following the sender, cyclically."""
    return frozenset((sender + i) % n for i in range(1, m + 1))


def run_protocol(
    protocol: Protocol,
    params: ValidatedParams,
    sender: int = 0,
    receivers: Optional[Iterable[int]] = None,
    **options,
) -> RunOutcome:
    """Dispatch to the runner of ``protocol``.

    :param options: forwarded to the runner (``noise``, ``adversary``,
        ``reconciler``, ``record_transcript``)
    """
    n, m = params.n, params.m
    chosen = (
        default_receivers(n, m, sender)
        if receivers is None
        else frozenset(receivers)
    )

    if not 0 <= sender < n or sender in chosen or len(chosen) != m:
        msg = f"need a sender in 0..{n - 1} and {m} other receivers"
        raise ParamsValueError(msg)

    if not all(0 <= r < n for r in chosen):
        msg = f"receivers must be in 0..{n - 1}, got {sorted(chosen)}"
        raise ParamsValueError(msg)

    if protocol is Protocol.ACKA:
        runner = run_acka
    elif protocol is Protocol.FULLY_ACKA:
        runner = run_fully_acka
    elif protocol is Protocol.BACKA:
        runner = run_backa
    elif protocol is Protocol.BIFULLY_ACKA:
        runner = run_bifully_acka
    else:
        msg = f"unknown protocol {protocol}"
        raise ValueError(msg)

    return runner(params, sender, chosen, **options)
