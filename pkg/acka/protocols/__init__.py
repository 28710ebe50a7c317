"""Protocol state machines.

A run owns one :class:`Simulation`: the parameters, the channel fabric, one
random generator per party, the untrusted source and an optional adversary
script. Each party's private state lives in its :class:`PartyView`; the
runners only read another party's view where that party would have told
them over a channel.

Aborts are outcomes, not exceptions: a :class:`RunOutcome` records the
global abort event ``gamma``, the participant-only abort ``gamma_p`` and
each party's final role and key.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from acka import Protocol
from acka.core import (
    Aborted,
    Role,
    ValidatedParams,
    is_participant,
    random_bits,
)
from acka.exceptions import ParamsValueError
from acka.netsim import ChannelFabric, CostReport
from acka.quantum import NoiseModel, nominal_source
from acka.subroutines.reconciliation import Reconciler, make_reconciler
from acka.utils import bits_to_hex

logger = logging.getLogger(__name__)


class Hook(enum.Enum):
    """Points at which a corrupt party may deviate."""

    APPLY = "apply"
    ID_PAYLOAD = "id-payload"
    ID_VETO = "id-veto"
    TEST_PARITY = "test-parity"
    TKD_PAYLOAD = "tkd-payload"
    EC_HASH = "ec-hash"
    VERIFY_VETO = "verify-veto"
    KEY_PAYLOAD = "key-payload"

    def __str__(self) -> str:
        return self.value


class Action(enum.Enum):
    FLIP_PARITY_INPUT = "flip-parity-input"
    REFUSE_BROADCAST = "refuse-broadcast"
    APPLY_AS_SECOND_SENDER = "apply-as-second-sender"
    TAMPER_AMD_OFFSET = "tamper-amd-offset"
    REPORT_FAKE_X_OUTCOME = "report-fake-x-outcome"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, slots=True)
class AdversaryAction:
    """One scripted deviation.

    :param target: restricts payload hooks to the iteration addressed to
        this party
    :param bit: input bit flipped by ``flip-parity-input``
    """

    hook: Hook
    action: Action
    party: int
    target: Optional[int] = None
    bit: int = -1


@dataclass(frozen=True, slots=True)
class AdversaryScript:
    corrupt: frozenset[int] = frozenset()
    actions: tuple[AdversaryAction, ...] = ()

    def __post_init__(self):
        for act in self.actions:
            if act.party not in self.corrupt:
                msg = f"party {act.party} acts without being corrupt"
                raise ParamsValueError(msg)

    @classmethod
    def honest(cls) -> "AdversaryScript":
        return cls()

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "AdversaryScript":
        """Build a script from ``{hook, action, party, target, bit}``
        mappings; every acting party is corrupt."""
        actions = tuple(
            AdversaryAction(
                Hook(rec["hook"]),
                Action(rec["action"]),
                int(rec["party"]),
                rec.get("target"),
                int(rec.get("bit", -1)),
            )
            for rec in records
        )
        return cls(frozenset(a.party for a in actions), actions)

    def at(self, hook: Hook, target: Optional[int] = None):
        return [
            a
            for a in self.actions
            if a.hook is hook and (a.target is None or a.target == target)
        ]

    def applicants(self) -> list[int]:
        return [
            a.party
            for a in self.at(Hook.APPLY)
            if a.action is Action.APPLY_AS_SECOND_SENDER
        ]

    def refusers(self, hook: Hook, target: Optional[int] = None) -> set[int]:
        return {
            a.party
            for a in self.at(hook, target)
            if a.action is Action.REFUSE_BROADCAST
        }

    def perturb(
        self,
        hook: Hook,
        inputs: np.ndarray,
        rngs: Sequence[np.random.Generator],
        target: Optional[int] = None,
    ) -> tuple[np.ndarray, dict[int, np.ndarray]]:
        """Apply the input-level actions at ``hook`` to a ``(n, k)`` batch.

        :returns: the modified inputs and the broadcast masks of
            ``tamper-amd-offset``
        """
        acts = self.at(hook, target)
        if not acts:
            return inputs, {}

        x = np.array(inputs, dtype=np.uint8, copy=True)
        flips: dict[int, np.ndarray] = {}
        k = x.shape[1]
        for act in acts:
            if act.action is Action.FLIP_PARITY_INPUT:
                x[act.party, act.bit % k] ^= 1
            elif act.action is Action.REPORT_FAKE_X_OUTCOME:
                x[act.party] = random_bits(rngs[act.party], k)
            elif act.action is Action.TAMPER_AMD_OFFSET:
                mask = random_bits(rngs[act.party], k)
                mask[act.bit % k] = 1
                flips[act.party] = mask
            logger.debug("party %d: %s at %s", act.party, act.action, hook)
        return x, flips


@dataclass(slots=True)
class PartyView:
    """Private registers of one party.

    ``conference_key is None`` exactly when the party considers the run
    aborted or never expected a key.
    """

    id: int
    role: Role
    testing_key: np.ndarray = field(
        default_factory=lambda: np.zeros(0, dtype=np.uint8)
    )
    raw_key: np.ndarray = field(
        default_factory=lambda: np.zeros(0, dtype=np.uint8)
    )
    conference_key: Optional[np.ndarray] = None
    verification: int = 0
    notified: bool = False
    transcript: list[str] = field(default_factory=list)

    def note(self, line: str) -> None:
        self.transcript.append(line)

    def abort(self) -> None:
        self.conference_key = None


class ConferenceKeyPool:
    """Previously established conference keys shared by the participants.

    Every draw hands the same bits to all participants and is metered.
    """

    def __init__(self, rng: np.random.Generator) -> None:
        self._rng = rng
        self.consumed = 0

    def draw(self, bits: int) -> np.ndarray:
        self.consumed += bits
        return random_bits(self._rng, bits)


class Simulation:
    """Everything one seeded run owns.

    :param params: validated parameters
    :param noise: source model, defaults to
        :func:`acka.quantum.nominal_source`
    :param adversary: scripted deviations, honest by default
    :param reconciler: error correction backend name
    """

    def __init__(
        self,
        params: ValidatedParams,
        noise: Optional[NoiseModel] = None,
        adversary: Optional[AdversaryScript] = None,
        reconciler: str = "ideal",
        record_transcript: bool = False,
    ) -> None:
        raw = params.params
        self.params = params
        self.noise = noise or nominal_source(raw.q_x, raw.q_z)
        self.adversary = adversary or AdversaryScript.honest()
        self.fabric = ChannelFabric(raw.n, raw.seed, record_transcript)

        streams = np.random.SeedSequence(raw.seed).spawn(raw.n + 2)
        self.rngs = [np.random.default_rng(s) for s in streams[: raw.n]]
        self.source_rng = np.random.default_rng(streams[raw.n])
        self.pool = ConferenceKeyPool(np.random.default_rng(streams[-1]))
        self.reconciler: Reconciler = make_reconciler(
            reconciler, raw.q_z, raw.seed
        )

    @property
    def n(self) -> int:
        return self.params.n


@dataclass(slots=True)
class RunOutcome:
    """Result of one protocol run.

    :param gamma: the run aborted for every party
    :param phi: every party ended identity designation with the role the
        sender assigned to it
    :param omega_p: all participants hold the same non-empty key
    :param gamma_p: the participants aborted after identity designation
    :param id_aborted: every party aborted during identity designation
    """

    protocol: Protocol
    views: list[PartyView]
    sender: int
    receivers: frozenset[int]
    gamma: bool = False
    phi: bool = False
    omega_p: bool = False
    gamma_p: bool = False
    id_aborted: bool = False
    cause: str = ""
    ledger: CostReport = field(default_factory=CostReport)
    qx_obs: Optional[float] = None
    degenerate: bool = False
    ell: int = 0
    ell_net: int = 0
    preshared_bits: int = 0
    transcript: list[str] = field(default_factory=list)

    @property
    def outcome(self) -> str:
        if self.id_aborted:
            return "aborted-ID"
        if self.gamma:
            return "aborted"
        if self.gamma_p:
            return "participant-abort"
        return "ok"

    @property
    def participants(self) -> list[PartyView]:
        return [self.views[self.sender]] + [
            self.views[b] for b in sorted(self.receivers)
        ]

    @property
    def keys_equal(self) -> bool:
        keys = [v.conference_key for v in self.participants]
        if any(k is None for k in keys):
            return False
        return all(np.array_equal(keys[0], k) for k in keys[1:])

    def as_dict(self) -> dict:
        return {
            "protocol": str(self.protocol),
            "outcome": self.outcome,
            "cause": self.cause or None,
            "sender": self.sender,
            "receivers": sorted(self.receivers),
            "events": {
                "gamma": bool(self.gamma),
                "phi": bool(self.phi),
                "omega_p": bool(self.omega_p),
                "gamma_p": bool(self.gamma_p),
            },
            "qx_obs": (
                None if self.qx_obs is None else float(self.qx_obs)
            ),
            "degenerate": bool(self.degenerate),
            "ell": int(self.ell),
            "ell_net": int(self.ell_net),
            "preshared_bits": int(self.preshared_bits),
            "ledger": self.ledger.as_dict()
            | {"l_tot": float(self.ledger.l_tot)},
            "parties": [
                {
                    "id": v.id,
                    "role": str(v.role),
                    "key": None
                    if v.conference_key is None
                    else bits_to_hex(v.conference_key),
                }
                for v in self.views
            ],
        }


def abort_all(views: Sequence[PartyView]) -> None:
    for view in views:
        view.role = Aborted()
        view.abort()


def participant_views(views: Sequence[PartyView]) -> list[PartyView]:
    return [v for v in views if is_participant(v.role)]
