import json
from pathlib import Path

import pytest

from greenslice.cli import EXIT_BUDGET, EXIT_CONFIG, EXIT_OK, main
from greenslice.runner import ConfigError, RunConfig, export_cdf, metrics_rows, parse_config, read_csv
from greenslice.trafficlab import MetricsRecord

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


# -- config schema -------------------------------------------------------------------------

def test_shipped_configs_validate(capsys):
    for name in ("default", "high-demand", "urgent-flow"):
        assert main(["validate", "--config", str(CONFIGS / f"{name}.yaml")]) == EXIT_OK
    assert "ok" in capsys.readouterr().out


@pytest.mark.parametrize("text, line, words", [
    ("scenario:\n  name: default\n  total_slots: -5\n", 3, "total_slots"),
    ("scenario:\n  name: rush-hour\n", 2, "scenario.name"),
    ("schemes: [ospf, bgp]\n", 1, "bgp"),
    ("milp:\n  power_limit: 30\n  solver: cplex\n", 3, "milp.solver"),
    ("constellation:\n  shells:\n    - satellite_count: 10\n      altitude_km: 500\n"
     "      inclination_deg: 53\n      plane_count: 3\n", 3, "plane"),
    ("scenario:\n  burst_intervals: [[450, 520]]\n", 1, "scenario"),
    ("polcy:\n  utilization_threshold: 0.5\n", 1, "polcy"),
    ("scenario: [1, 2\n", 2, "YAML"),
])
def test_config_errors_carry_line_numbers(text, line, words):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "cfg.yaml")
    assert info.value.line == line
    assert str(info.value).startswith(f"cfg.yaml:{line}:")
    assert words in str(info.value)


def test_empty_config_means_defaults():
    assert parse_config("") == RunConfig()


def test_validate_exit_code_on_bad_file(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario:\n  name: default\n  total_slots: 0\n")
    assert main(["validate", "--config", str(bad)]) == EXIT_CONFIG
    assert f"{bad}:3:" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG


def test_unknown_scheme_flag(tmp_path):
    assert main(["run", "--schemes", "ospf,bogus", "--slots", "2", "--out", str(tmp_path / "r")]) == EXIT_CONFIG


# -- run / export ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "hd"
    rc = main(["run", "--config", str(CONFIGS / "high-demand.yaml"), "--slots", "4", "--schemes",
               "ospf,flexalgo", "--out", str(out)])
    return rc, out


def test_run_writes_the_output_layout(small_run):
    rc, out = small_run
    assert rc == EXIT_OK
    names = {p.name for p in out.iterdir()}
    assert {"metrics.csv", "decisions.csv", "config.resolved.yaml", "summary.json"} <= names
    for metric in ("cpu_avg", "pdr", "latency_ms"):
        for scheme in ("ospf", "flexalgo"):
            assert f"cdf_{metric}_{scheme}.csv" in names
    rows = read_csv(out / "metrics.csv")
    assert len(rows) == 2 * 4
    assert {r["scheme"] for r in rows} == {"ospf", "flexalgo"}
    dec = read_csv(out / "decisions.csv")
    assert {r["active_slice"] for r in dec if r["scheme"] == "flexalgo"} <= {"128", "129", "130"}


def test_resolved_config_round_trips(small_run):
    _, out = small_run
    again = parse_config((out / "config.resolved.yaml").read_text())
    assert again.scenario.total_slots == 4 and again.schemes == ("ospf", "flexalgo")
    assert main(["validate", "--config", str(out / "config.resolved.yaml")]) == EXIT_OK


def test_export_recomputes_summary(small_run, tmp_path):
    _, out = small_run
    before = json.loads((out / "summary.json").read_text())
    for f in out.glob("cdf_*.csv"):
        f.unlink()
    assert main(["export", "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "summary.json").read_text()) == before
    assert (out / "cdf_pdr_flexalgo.csv").read_text().splitlines()[0] == "value,cumulative_probability"
    assert main(["export", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_summary_matches_ledger(small_run):
    _, out = small_run
    summary = json.loads((out / "summary.json").read_text())
    rows = read_csv(out / "metrics.csv")
    for scheme in ("ospf", "flexalgo"):
        cpu = [float(r["cpu_avg"]) for r in rows if r["scheme"] == scheme]
        assert summary["schemes"][scheme]["cpu_avg"]["mean"] == pytest.approx(sum(cpu) / len(cpu))


def test_single_scheme_ledger(tmp_path):
    out = tmp_path / "one"
    assert main(["run", "--slots", "2", "--schemes", "flexalgo", "--out", str(out)]) == EXIT_OK
    assert {r["scheme"] for r in read_csv(out / "metrics.csv")} == {"flexalgo"}


def test_budget_breach_exit_code(tmp_path):
    cfg = tmp_path / "tight.yaml"
    cfg.write_text("scenario:\n  name: high-demand\n  total_slots: 6\n  burst_intervals: [[0, 6]]\n"
                   "  urgent_intervals: [[0, 6]]\n"
                   "milp:\n  solver: bnb\n  solver_budget_s: 0.000001\nschemes: [flexalgo]\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_BUDGET


def test_lpdump(tmp_path, capsys):
    out = tmp_path / "slot3.lp"
    assert main(["lpdump", "--config", str(CONFIGS / "default.yaml"), "--slot", "3", "--slice", "128",
                 "--out", str(out)]) == EXIT_OK
    text = out.read_text()
    assert text.splitlines()[0].startswith("\\")
    for section in ("Minimize", "Subject To", "Binaries", "End"):
        assert section in text
    assert main(["lpdump", "--slot", "9999"]) == EXIT_CONFIG


# -- CDF export -----------------------------------------------------------------------------

def _ledger(values):
    return metrics_rows(MetricsRecord(i, "flexalgo", v, 1.0, 50.0) for i, v in enumerate(values))


def test_constant_series_single_step():
    assert export_cdf(_ledger([7.0, 7.0, 7.0]), "cpu_avg", "flexalgo") == [(7.0, 1.0)]


def test_two_values_half_and_one():
    assert export_cdf(_ledger([3.0, 1.0]), "cpu_avg", "flexalgo") == [(1.0, 0.5), (3.0, 1.0)]


def test_empty_selection_gives_empty_table():
    assert export_cdf(_ledger([1.0]), "cpu_avg", "ospf") == []
