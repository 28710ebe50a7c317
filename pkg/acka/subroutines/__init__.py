"""Classical building blocks run over the :mod:`acka.netsim` fabric."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True, slots=True)
class HashFamilyIndex:
    """Seed of one member of the Toeplitz family ``in_len -> out_len``."""

    seed: np.ndarray
    in_len: int
    out_len: int

    @classmethod
    def from_beacon(cls, beacon) -> "HashFamilyIndex":
        return cls(beacon.hash_seed, beacon.in_len, beacon.out_len)


@dataclass(slots=True)
class ParityOutcome:
    """Per-party parity outputs of one batched Parity invocation.

    ``outputs[t]`` is ``None`` for a party that learns nothing (every party
    but the silent one in a notification round).
    """

    outputs: list[Optional[np.ndarray]]
    refused: bool = False
    round: int = 0

    @property
    def public(self) -> np.ndarray:
        """Output as seen by the first party holding one."""
        return next(o for o in self.outputs if o is not None)


@dataclass(slots=True)
class CollisionOutcome:
    result: int
    collision_seen: list[bool] = field(default_factory=list)
