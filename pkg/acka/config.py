"""Scenario files.

A scenario is a flat YAML mapping. Protocol parameters use their lowercase
names (``l`` for ``L``, ``l_b`` for ``L_b``); everything else describes the
run or the sweep. The key ``include`` names one file or a list of files,
relative to the including file, that are merged first so that later keys
override earlier ones::

    include: base.yaml
    protocol: fully-acka
    n: 5
    q_x: 0.02
    eps_enc: 2.3283064365386963e-10
"""

import dataclasses
import logging
import os
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from acka.core import ProtocolParams
from acka.exceptions import ConfigError
from acka.quantum import (
    DirectRates,
    NoiseModel,
    PauliPerQubit,
    nominal_source,
)
from acka.utils import FIBRE_ATTENUATION, transmittance

logger = logging.getLogger(__name__)

WORKERS_ENV = "ACKA_WORKERS"

PARAM_KEYS = {
    f.name.lower(): f.name for f in dataclasses.fields(ProtocolParams)
}
_INT_PARAMS = frozenset(
    f.name.lower()
    for f in dataclasses.fields(ProtocolParams)
    if f.type in (int, "int")
)

SCENARIO_KEYS = frozenset(
    {
        "protocol",
        "sender",
        "receivers",
        "d_km",
        "atten",
        "noise",
        "source_q_x",
        "source_q_z",
        "q_phase",
        "q_bit",
        "reconciler",
        "adversary",
        "output",
        "repetitions",
        "l_tot",
        "n_values",
        "distances",
        "n_min",
        "n_max",
        "eps_target",
        "transcript",
    }
)

ALLOWED_KEYS = frozenset(PARAM_KEYS) | SCENARIO_KEYS

PathLike = Union[str, os.PathLike]


def _read(path: Path, stack: tuple[Path, ...]) -> dict[str, Any]:
    if path in stack:
        chain = " -> ".join(str(p) for p in (*stack, path))
        msg = f"include cycle: {chain}"
        raise ConfigError(msg)

    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        msg = f"cannot read scenario file {path}: {exc}"
        raise ConfigError(msg) from exc
    except yaml.YAMLError as exc:
        msg = f"scenario file {path} is not valid YAML: {exc}"
        raise ConfigError(msg) from exc

    if data is None:
        return {}
    if not isinstance(data, dict):
        msg = f"scenario file {path} must hold a mapping"
        raise ConfigError(msg)

    includes = data.pop("include", [])
    if isinstance(includes, str):
        includes = [includes]
    if not isinstance(includes, list):
        msg = f"include in {path} must be a file name or a list of them"
        raise ConfigError(msg)

    merged: dict[str, Any] = {}
    for name in includes:
        merged.update(_read(path.parent / name, (*stack, path)))

    merged.update(data)
    return merged


def check_keys(config: dict[str, Any]) -> None:
    unknown = sorted(set(config) - ALLOWED_KEYS)
    if unknown:
        msg = f"unknown configuration keys: {', '.join(map(str, unknown))}"
        raise ConfigError(msg)


def load_config(path: PathLike) -> dict[str, Any]:
    """Read a scenario file and its includes.

    :raises ConfigError: unreadable file, include cycle or unknown key
    """
    config = _read(Path(path).resolve(), ())
    check_keys(config)
    logger.debug("loaded %d keys from %s", len(config), path)
    return config


def merge(
    config: Optional[dict[str, Any]], overrides: dict[str, Any]
) -> dict[str, Any]:
    """Command-line values win over file values; ``None`` and empty
    tuples in ``overrides`` mean the flag was not given."""
    merged = dict(config or {})
    merged.update(
        {k: v for k, v in overrides.items() if v is not None and v != ()}
    )
    check_keys(merged)
    return merged


def as_int(key: str, value: Any) -> int:
    if isinstance(value, bool):
        msg = f"{key} must be an integer, got {value!r}"
        raise ConfigError(msg)
    try:
        number = float(value)
    except (TypeError, ValueError):
        msg = f"{key} must be an integer, got {value!r}"
        raise ConfigError(msg) from None
    if not number.is_integer():
        msg = f"{key} must be an integer, got {value!r}"
        raise ConfigError(msg)
    return int(number)


def as_float(key: str, value: Any) -> float:
    # PyYAML reads 1e-10 (no dot) as a string
    if isinstance(value, bool):
        msg = f"{key} must be a number, got {value!r}"
        raise ConfigError(msg)
    try:
        return float(value)
    except (TypeError, ValueError):
        msg = f"{key} must be a number, got {value!r}"
        raise ConfigError(msg) from None


def get_int(config: dict[str, Any], key: str, default: int) -> int:
    return as_int(key, config[key]) if key in config else default


def get_float(config: dict[str, Any], key: str, default: float) -> float:
    return as_float(key, config[key]) if key in config else default


def get_list(config: dict[str, Any], key: str, default, convert) -> list:
    """A scalar, a list or a comma separated string of values."""
    value = config.get(key, default)
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    elif not isinstance(value, (list, tuple)):
        value = [value]
    return [convert(key, v) for v in value]


def params_from_config(
    config: dict[str, Any], base: Optional[ProtocolParams] = None
) -> ProtocolParams:
    """:class:`ProtocolParams` with the values found in ``config``.

    ``d_km`` (with optional ``atten`` in dB/km) sets ``eta`` unless ``eta``
    is given explicitly.
    """
    base = base or ProtocolParams()
    changes: dict[str, Any] = {}
    for key, name in PARAM_KEYS.items():
        if key not in config:
            continue
        if key in _INT_PARAMS:
            changes[name] = as_int(key, config[key])
        else:
            changes[name] = as_float(key, config[key])

    if "d_km" in config and "eta" not in config:
        atten = get_float(config, "atten", FIBRE_ATTENUATION)
        d_km = as_float("d_km", config["d_km"])
        changes["eta"] = transmittance(d_km, atten)

    return base.replace(**changes)


def noise_from_config(
    config: dict[str, Any], params: ProtocolParams
) -> NoiseModel:
    """``noise: direct`` (default) draws with ``source_q_x`` and
    ``source_q_z``, which default to :func:`acka.quantum.nominal_source`;
    ``noise: pauli`` draws independent flips with ``q_phase`` and
    ``q_bit``."""
    kind = str(config.get("noise", "direct")).lower()
    if kind == "direct":
        nominal = nominal_source(params.q_x, params.q_z)
        return DirectRates(
            get_float(config, "source_q_x", nominal.q_x),
            get_float(config, "source_q_z", nominal.q_z),
        )
    elif kind == "pauli":
        return PauliPerQubit(
            get_float(config, "q_phase", 0.0),
            get_float(config, "q_bit", 0.0),
        )
    else:
        msg = f"noise must be 'direct' or 'pauli', got {kind!r}"
        raise ConfigError(msg)


def adversary_records(config: dict[str, Any]) -> list[dict]:
    """Adversary actions given inline as a list or as a YAML file name."""
    value = config.get("adversary")
    if value is None:
        return []
    if isinstance(value, (str, os.PathLike)):
        try:
            with open(value, encoding="utf-8") as fh:
                value = yaml.safe_load(fh) or []
        except (OSError, yaml.YAMLError) as exc:
            msg = f"cannot read adversary script {value}: {exc}"
            raise ConfigError(msg) from exc

    if not isinstance(value, list) or not all(
        isinstance(rec, dict) for rec in value
    ):
        msg = "adversary must be a list of action mappings"
        raise ConfigError(msg)
    return value


def worker_count() -> int:
    """Worker processes for sweeps, from ``ACKA_WORKERS`` (default 1)."""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        workers = int(raw)
    except ValueError:
        msg = f"{WORKERS_ENV} must be a positive integer, got {raw!r}"
        raise ConfigError(msg) from None
    if workers < 1:
        msg = f"{WORKERS_ENV} must be a positive integer, got {raw!r}"
        raise ConfigError(msg)
    return workers
