"""Command line interface.

``acka run`` executes seeded protocol runs, ``acka sweep-finite`` and
``acka sweep-asymptotic`` write rate tables as CSV, and ``acka verify``
runs the acceptance suite. Every command takes ``--config`` with a YAML
scenario (see :mod:`acka.config`); flags override file values.

Exit codes: 0 on success, 1 on a configuration error, 2 when an
acceptance check fails.
"""

import contextlib
import csv
import hashlib
import itertools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Optional

import click
import yaml

from acka import Protocol, __version__
from acka.config import (
    adversary_records,
    as_float,
    as_int,
    get_float,
    get_int,
    get_list,
    load_config,
    merge,
    noise_from_config,
    params_from_config,
    worker_count,
)
from acka.core import validate_params
from acka.exceptions import ConfigError
from acka.protocols import AdversaryScript, RunOutcome
from acka.protocols.runner import run_protocol
from acka.rates import (
    FixedModel,
    asymptotic_rates,
    optimize_rate,
    scaling_ratios,
)
from acka.utils import FIBRE_ATTENUATION, sig, transmittance
from acka.verify import CHECKS, MUTATIONS, run_suite

logger = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_ACCEPTANCE = 2

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

FINITE_HEADER = (
    "protocol",
    "n",
    "d_km",
    "f_or_Q_model",
    "L_tot",
    "rate",
    "ell",
    "p_opt",
    "eps_tot",
)
ASYMPTOTIC_HEADER = ("protocol_pair", "n", "d_km", "ratio")

DEFAULT_L_TOT = tuple(10.0**k for k in range(5, 13))
DEFAULT_FINITE_RATES = dict(q_x=0.07, q_z=0.04, q_xb=0.011, q_zb=0.011)

# (label, numerator, denominator) over AsymptoticRates fields
RATIO_PAIRS = (
    ("cka/bcka", "r_cka", "r_bcka"),
    ("acka/backa", "r", "r_b"),
    ("fully-acka/bifully-acka", "r_f", "r_bf"),
)


@contextlib.contextmanager
def _config_errors():
    try:
        yield
    except (ValueError, LookupError) as exc:
        click.echo(f"error: {exc}", err=True)
        raise SystemExit(EXIT_CONFIG)


def _scenario(config: Optional[str], overrides: dict[str, Any]) -> dict:
    base = load_config(config) if config else {}
    return merge(base, overrides)


def _write_csv(path: Optional[str], header, rows) -> None:
    with click.open_file(path or "-", "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _parallel_map(func, tasks: list) -> list:
    """``map`` over a process pool; results keep the order of ``tasks``."""
    workers = worker_count()
    if workers == 1 or len(tasks) < 2:
        return [func(task) for task in tasks]

    logger.info("%d tasks on %d workers", len(tasks), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


def _digest(key) -> str:
    return hashlib.sha256(key.tobytes()).hexdigest()[:16]


def _echo_run(out: RunOutcome, seed: int) -> None:
    head = f"{out.protocol} seed={seed} outcome={out.outcome}"
    if out.cause:
        head += f" cause={out.cause}"
    click.echo(head)
    receivers = ",".join(str(b) for b in sorted(out.receivers))
    click.echo(f"  sender: {out.sender}  receivers: {receivers}")
    for view in out.views:
        key = view.conference_key
        digest = "-" if key is None else _digest(key)
        click.echo(f"  party {view.id}: {view.role}  key {digest}")

    click.echo(f"  keys-equal: {str(out.keys_equal).lower()}")
    if out.qx_obs is not None:
        click.echo(f"  Q_X obs: {sig(out.qx_obs)}")
    click.echo(f"  ell: {out.ell}  ell_net: {out.ell_net}")

    ledger = out.ledger
    click.echo(
        f"  ledger: ghz={ledger.ghz_network_uses} "
        f"bell={sig(ledger.bell_network_uses)} "
        f"private={ledger.private_bits_consumed} "
        f"broadcast={ledger.broadcast_bits} "
        f"L_tot={sig(ledger.l_tot)}"
    )
    click.echo(
        f"  events: gamma={out.gamma} phi={out.phi} "
        f"omega_p={out.omega_p} gamma_p={out.gamma_p}"
    )


@click.group()
@click.version_option(__version__, prog_name="acka")
@click.option(
    "--log-level",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    default="WARNING",
    show_default=True,
)
def cli(log_level: str) -> None:
    """Anonymous conference key agreement simulator and rate analyzer."""
    logging.basicConfig(
        level=log_level.upper(),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.option("--config", type=click.Path(dir_okay=False))
@click.option("--protocol", help="acka, fully-acka, backa, bifully-acka")
@click.option("--n", "n", type=int)
@click.option("--m", "m", type=int)
@click.option("--L", "l", type=int, help="detected GHZ rounds")
@click.option("--p", "p", type=float, help="test round probability")
@click.option("--q-x", "q_x", type=float)
@click.option("--q-z", "q_z", type=float)
@click.option("--q-xb", "q_xb", type=float)
@click.option("--q-zb", "q_zb", type=float)
@click.option("--eta", type=float)
@click.option("--d-km", "d_km", type=float, help="sets eta")
@click.option("--r-v", "r_v", type=int)
@click.option("--r-n", "r_n", type=int)
@click.option("--L-b", "l_b", type=int, help="benchmark key length")
@click.option("--seed", type=int)
@click.option("--sender", type=int)
@click.option("--receivers", help="comma separated party ids")
@click.option("--noise", type=click.Choice(["direct", "pauli"]))
@click.option("--source-q-x", "source_q_x", type=float, help="source Q_X")
@click.option("--source-q-z", "source_q_z", type=float, help="source Q_Z")
@click.option("--q-phase", "q_phase", type=float)
@click.option("--q-bit", "q_bit", type=float)
@click.option("--reconciler", type=click.Choice(["ideal", "block"]))
@click.option("--adversary", type=click.Path(dir_okay=False))
@click.option("--repetitions", type=int)
@click.option("--transcript", type=click.Path(dir_okay=False))
@click.option("--output", type=click.Path(dir_okay=False))
def run(config: Optional[str], **options) -> None:
    """Execute seeded protocol runs and report their outcome."""
    with _config_errors():
        cfg = _scenario(config, options)
        protocol = Protocol.from_name(str(cfg.get("protocol", "fully-acka")))
        params = params_from_config(cfg)
        validate_params(params)
        noise = noise_from_config(cfg, params)
        script = AdversaryScript.from_records(adversary_records(cfg))
        sender = get_int(cfg, "sender", 0)
        receivers = get_list(cfg, "receivers", [], as_int) or None
        repetitions = get_int(cfg, "repetitions", 1)
        reconciler = str(cfg.get("reconciler", "ideal"))
        transcript = cfg.get("transcript")
        output = cfg.get("output")

        records, lines = [], []
        for i in range(repetitions):
            vp = validate_params(params.replace(seed=params.seed + i))
            out = run_protocol(
                protocol,
                vp,
                sender,
                receivers,
                noise=noise,
                adversary=script,
                reconciler=reconciler,
                record_transcript=transcript is not None,
            )
            _echo_run(out, vp.params.seed)
            records.append({"seed": vp.params.seed, **out.as_dict()})
            lines.append(f"# seed {vp.params.seed}")
            lines.extend(out.transcript)

    if output:
        with open(output, "w", encoding="utf-8") as fh:
            data = records[0] if len(records) == 1 else records
            yaml.safe_dump(data, fh, sort_keys=False)
    if transcript:
        with open(transcript, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def _model_label(rates: dict[str, float]) -> str:
    return "Q=" + "/".join(
        sig(rates[k]) for k in ("q_x", "q_z", "q_xb", "q_zb")
    )


def _finite_row(task) -> list[str]:
    protocol, n, d_km, atten, l_tot, rates, eps_target = task
    model = FixedModel(n, transmittance(d_km, atten), **rates)
    report = optimize_rate(protocol, l_tot, model, eps_target)
    ell = report.ell_net if protocol is Protocol.ACKA else report.ell
    return [
        str(protocol),
        str(n),
        sig(d_km),
        _model_label(rates),
        sig(l_tot),
        sig(report.rate),
        str(ell),
        sig(report.p_opt),
        sig(report.eps_tot),
    ]


@cli.command("sweep-finite")
@click.option("--config", type=click.Path(dir_okay=False))
@click.option("--protocol", "protocol", multiple=True)
@click.option("--L-tot", "l_tot", type=float, multiple=True)
@click.option("--n", "n_values", type=int, multiple=True)
@click.option("--d-km", "distances", type=float, multiple=True)
@click.option("--atten", type=float, help="dB/km")
@click.option("--q-x", "q_x", type=float)
@click.option("--q-z", "q_z", type=float)
@click.option("--q-xb", "q_xb", type=float)
@click.option("--q-zb", "q_zb", type=float)
@click.option("--eps-target", "eps_target", type=float)
@click.option("--output", type=click.Path(dir_okay=False))
def sweep_finite(config: Optional[str], **options) -> None:
    """Optimized finite-key rates against the network-use budget."""
    with _config_errors():
        cfg = _scenario(config, options)
        names = get_list(cfg, "protocol", [str(p) for p in Protocol], _name)
        protocols = sorted({Protocol.from_name(name) for name in names})
        budgets = sorted(get_list(cfg, "l_tot", DEFAULT_L_TOT, as_float))
        n_values = sorted(get_list(cfg, "n_values", [5, 8], as_int))
        distances = sorted(get_list(cfg, "distances", [2.0], as_float))
        atten = get_float(cfg, "atten", FIBRE_ATTENUATION)
        eps_target = get_float(cfg, "eps_target", 1e-8)
        rates = {
            k: get_float(cfg, k, v) for k, v in DEFAULT_FINITE_RATES.items()
        }

        tasks = [
            (protocol, n, d, atten, l_tot, rates, eps_target)
            for protocol, n, d, l_tot in itertools.product(
                protocols, n_values, distances, budgets
            )
        ]
        rows = _parallel_map(_finite_row, tasks)

    _write_csv(cfg.get("output"), FINITE_HEADER, rows)


def _name(key: str, value: Any) -> str:
    return str(value).strip()


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else float("inf")


@cli.command("sweep-asymptotic")
@click.option("--config", type=click.Path(dir_okay=False))
@click.option("--n-min", "n_min", type=int)
@click.option("--n-max", "n_max", type=int)
@click.option("--d-km", "distances", type=float, multiple=True)
@click.option("--atten", type=float, help="dB/km")
@click.option("--q-x", "q_x", type=float)
@click.option("--q-z", "q_z", type=float)
@click.option("--q-xb", "q_xb", type=float)
@click.option("--q-zb", "q_zb", type=float)
@click.option("--output", type=click.Path(dir_okay=False))
def sweep_asymptotic(config: Optional[str], **options) -> None:
    """Ratios of the GHZ to the Bell pair asymptotic rates, with the
    zero-error scaling ratios as ``scaling:`` rows."""
    with _config_errors():
        cfg = _scenario(config, options)
        n_min = get_int(cfg, "n_min", 3)
        n_max = get_int(cfg, "n_max", 20)
        if not 2 <= n_min <= n_max:
            msg = f"need 2 <= n_min <= n_max, got {n_min}, {n_max}"
            raise ConfigError(msg)
        distances = sorted(get_list(cfg, "distances", [8.0], as_float))
        atten = get_float(cfg, "atten", FIBRE_ATTENUATION)
        q = [get_float(cfg, k, 0.02) for k in ("q_x", "q_z", "q_xb", "q_zb")]

        rows = []
        for d_km, n in itertools.product(distances, range(n_min, n_max + 1)):
            eta = transmittance(d_km, atten)
            rates = asymptotic_rates(n, eta, *q)
            for label, num, den in RATIO_PAIRS:
                ratio = _ratio(getattr(rates, num), getattr(rates, den))
                rows.append([label, str(n), sig(d_km), sig(ratio)])
            for (label, _, _), ratio in zip(
                RATIO_PAIRS, scaling_ratios(n, eta)
            ):
                label = f"scaling:{label}"
                rows.append([label, str(n), sig(d_km), sig(ratio)])

    _write_csv(cfg.get("output"), ASYMPTOTIC_HEADER, rows)


@cli.command()
@click.option("--mutate", type=click.Choice(sorted(MUTATIONS)))
@click.option(
    "--scale",
    type=click.FloatRange(min=0, min_open=True),
    default=1.0,
    show_default=True,
    help="multiplier of the Monte Carlo sizes",
)
@click.option(
    "--check", "checks", type=click.Choice(list(CHECKS)), multiple=True
)
def verify(mutate: Optional[str], scale: float, checks) -> None:
    """Run the acceptance suite; exit code 2 if any check fails."""
    with _config_errors():
        results = run_suite(scale, mutate, checks or None)

    for result in results:
        status = "PASS" if result.passed else "FAIL"
        click.echo(
            f"{status} {result.name} ({result.seconds:.1f}s): {result.detail}"
        )

    failed = [r.name for r in results if not r.passed]
    if failed:
        click.echo(f"{len(failed)} of {len(results)} checks failed", err=True)
        raise SystemExit(EXIT_ACCEPTANCE)


def main() -> None:
    cli(prog_name="acka")


if __name__ == "__main__":
    main()
