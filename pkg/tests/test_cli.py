import csv
import io

import pytest
import yaml
from click.testing import CliRunner

from acka import __version__
from acka.cli import ASYMPTOTIC_HEADER, FINITE_HEADER, cli


@pytest.fixture
def runner():
    return CliRunner()


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_run_backa(runner):
    result = runner.invoke(
        cli,
        ["run", "--protocol", "backa", "--n", "4", "--m", "1", "--L-b", "16"],
    )
    assert result.exit_code == 0, result.output
    assert "backa seed=0 outcome=ok" in result.output
    assert "keys-equal: true" in result.output
    assert "party 3: non-participant  key -" in result.output


def test_run_honest_fully_acka(runner):
    result = runner.invoke(
        cli,
        [
            "run",
            "--protocol",
            "fully-acka",
            "--n",
            "5",
            "--m",
            "2",
            "--L",
            "20000",
            "--seed",
            "7",
        ],
    )
    assert result.exit_code == 0, result.output
    assert "fully-acka seed=7 outcome=ok" in result.output
    assert "keys-equal: true" in result.output


def test_run_collision_reports_aborted_id(runner, tmp_path):
    script = tmp_path / "adversary.yaml"
    script.write_text(
        "- {hook: apply, action: apply-as-second-sender, party: 3}\n"
    )
    result = runner.invoke(
        cli,
        ["run", "--protocol", "backa", "--n", "4", "--m", "1"]
        + ["--adversary", str(script)],
    )
    assert result.exit_code == 0, result.output
    assert "outcome=aborted-ID cause=collision" in result.output
    assert "keys-equal: false" in result.output


def test_run_repetitions_and_output(runner, tmp_path):
    output = tmp_path / "runs.yaml"
    transcript = tmp_path / "transcript.txt"
    result = runner.invoke(
        cli,
        [
            "run",
            "--protocol",
            "bifully-acka",
            "--n",
            "4",
            "--m",
            "2",
            "--L-b",
            "8",
            "--seed",
            "5",
            "--repetitions",
            "2",
            "--output",
            str(output),
            "--transcript",
            str(transcript),
        ],
    )
    assert result.exit_code == 0, result.output
    records = yaml.safe_load(output.read_text())
    assert [r["seed"] for r in records] == [5, 6]
    assert records[0]["protocol"] == "bifully-acka"
    lines = transcript.read_text().splitlines()
    assert lines[0] == "# seed 5"
    assert "# seed 6" in lines


def test_run_from_config(runner, tmp_path):
    scenario = tmp_path / "scenario.yaml"
    scenario.write_text(
        "protocol: fully-acka\nn: 4\nm: 1\nl: 3000\np: 0.1\n"
        "noise: direct\nq_x: 0.02\nreceivers: 2\n"
    )
    result = runner.invoke(
        cli, ["run", "--config", str(scenario), "--sender", "1"]
    )
    assert result.exit_code == 0, result.output
    assert "sender: 1  receivers: 2" in result.output


@pytest.mark.parametrize(
    "args",
    [
        ["run", "--n", "2"],
        ["run", "--protocol", "cka"],
        ["run", "--q-x", "0.6"],
        ["run", "--sender", "1", "--receivers", "1,2"],
        ["sweep-asymptotic", "--n-min", "1"],
    ],
)
def test_configuration_errors_exit_with_one(runner, args):
    result = runner.invoke(cli, args)
    assert result.exit_code == 1


def test_unknown_key_in_config(runner, tmp_path):
    scenario = tmp_path / "scenario.yaml"
    scenario.write_text("protocol: acka\nwobble: 1\n")
    result = runner.invoke(cli, ["run", "--config", str(scenario)])
    assert result.exit_code == 1
    assert "unknown configuration keys: wobble" in result.output


def test_sweep_asymptotic(runner):
    result = runner.invoke(
        cli, ["sweep-asymptotic", "--n-min", "4", "--n-max", "5"]
    )
    assert result.exit_code == 0, result.output
    rows = _rows(result.output)
    assert tuple(rows[0]) == ASYMPTOTIC_HEADER
    assert len(rows) == 1 + 2 * 6
    scaling = [
        r for r in rows if r[0] == "scaling:cka/bcka" and r[1] == "4"
    ]
    expected = 2 * 10 ** (-0.272)
    assert float(scaling[0][3]) == pytest.approx(expected, rel=1e-3)


def test_sweep_asymptotic_to_file(runner, tmp_path):
    output = tmp_path / "ratios.csv"
    result = runner.invoke(
        cli,
        [
            "sweep-asymptotic",
            "--n-min",
            "8",
            "--n-max",
            "8",
            "--output",
            str(output),
        ],
    )
    assert result.exit_code == 0
    rows = _rows(output.read_text())
    ratios = {r[0]: float(r[3]) for r in rows[1:]}
    assert ratios["fully-acka/bifully-acka"] == pytest.approx(10.53, abs=0.05)
    assert ratios["acka/backa"] == pytest.approx(2.139, abs=0.01)


def test_sweep_finite_bell_benchmark(runner):
    result = runner.invoke(
        cli,
        [
            "sweep-finite",
            "--protocol",
            "backa",
            "--protocol",
            "bifully-acka",
            "--L-tot",
            "1e6",
            "--n",
            "5",
            "--d-km",
            "2",
        ],
    )
    assert result.exit_code == 0, result.output
    rows = _rows(result.output)
    assert tuple(rows[0]) == FINITE_HEADER
    assert [r[0] for r in rows[1:]] == ["backa", "bifully-acka"]
    for row in rows[1:]:
        assert float(row[5]) > 0
        assert float(row[8]) <= 1e-8 * (1 + 1e-6)
        assert row[3] == "Q=0.07/0.04/0.011/0.011"


def test_verify_passes(runner):
    result = runner.invoke(
        cli,
        ["verify", "--check", "scaling-identity", "--check", "ratio-point"],
    )
    assert result.exit_code == 0, result.output
    assert result.output.count("PASS") == 2


def test_verify_with_mutation_fails(runner):
    result = runner.invoke(
        cli,
        [
            "verify",
            "--check",
            "amd-tamper",
            "--mutate",
            "amd",
            "--scale",
            "0.01",
        ],
    )
    assert result.exit_code == 2
    assert "FAIL amd-tamper" in result.output


def test_verify_rejects_a_zero_scale(runner):
    result = runner.invoke(cli, ["verify", "--scale", "0"])
    assert result.exit_code == 2
    assert "Invalid value" in result.output
