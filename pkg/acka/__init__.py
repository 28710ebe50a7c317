"""
acka
====

``acka`` is a deterministic simulator and rate analyzer for anonymous
conference key agreement over a star network with a central multipartite
entanglement source. It executes the ACKA, fully-ACKA, bACKA and
bifully-ACKA protocols party by party over a simulated classical fabric,
meters every channel use, and evaluates the finite-key and asymptotic
conference key rates of the four protocols.

Core
----

Parameters, roles and elementary numeric functions
(:mod:`acka.core`, :mod:`acka.utils`).

Simulation
----------

The communication fabric (:mod:`acka.netsim`), the classical building
blocks (:mod:`acka.subroutines`), the source model (:mod:`acka.quantum`)
and the protocol state machines (:mod:`acka.protocols`).

Rates
-----

Key lengths, security parameters, network-use accounting and the
finite-key optimizer (:mod:`acka.rates`).

Exceptions
----------

:mod:`acka.exceptions`
"""

import enum

__version__ = "0.1.0"
ERROR_TOLERANCE = 0.01
SIGNIFICANT_DIGITS = 9


class Protocol(enum.IntEnum):
    ACKA = enum.auto()
    FULLY_ACKA = enum.auto()
    BACKA = enum.auto()
    BIFULLY_ACKA = enum.auto()

    def __str__(self) -> str:
        return self.name.lower().replace("_", "-")

    @property
    def uses_ghz(self) -> bool:
        return self in (Protocol.ACKA, Protocol.FULLY_ACKA)

    @property
    def fully_anonymous(self) -> bool:
        return self in (Protocol.FULLY_ACKA, Protocol.BIFULLY_ACKA)

    @classmethod
    def from_name(cls, name: str) -> "Protocol":
        key = name.strip().upper().replace("-", "_")
        try:
            return cls[key]
        except KeyError:
            names = ", ".join(str(p) for p in cls)
            msg = f"unknown protocol {name!r}; available: {names}"
            raise ValueError(msg) from None


globals().update(Protocol.__members__)
