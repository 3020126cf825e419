import csv
import io

import pytest
import yaml

from qkdsync import cli
from qkdsync.config import ConfigError, apply_overrides, figure_experiment, loads, parse_config


@pytest.fixture
def default_file(tmp_path):
    path = tmp_path / "default.yaml"
    path.write_text("name: default\n")
    return path


@pytest.fixture
def fig2_file(tmp_path):
    path = tmp_path / "fig2.yaml"
    path.write_text(yaml.safe_dump({
        "name": "fig2",
        "mean_pe_override": 0.01,
        "sweep": {"dark_hz": [25, 50, 100, 200, 400], "N": [32, 64]},
        "trials": 500,
    }))
    return path


def _csv_rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_defaults_follow_the_derivation_chain():
    exp = parse_config({})
    cfg = exp.config
    assert cfg.grid.window_count == 524288
    assert cfg.grid.frame_period_ns == 1048576
    assert cfg.mean_pe == pytest.approx(0.005)
    assert cfg.spad.gate_width_ns == 2.0


def test_field_level_errors():
    with pytest.raises(ConfigError, match="quantum_efficiency"):
        loads("spad: {quantum_efficiency: 1.5}")
    with pytest.raises(ConfigError, match="dark_count_rate_hz"):
        loads("spad: {dark_count_rate_hz: -3}")
    with pytest.raises(ConfigError, match="window_count"):
        loads("grid: {window_count: 500000}")
    with pytest.raises(ConfigError, match="nonsense"):
        loads("nonsense: 1")
    with pytest.raises(ConfigError, match="sweep.N"):
        loads("sweep: {N: [1.5]}")


def test_overrides():
    exp = parse_config({"sweep": {"dark_hz": [25, 50], "N": [32]}})
    exp = apply_overrides(exp, ["dark_hz=400", "spad.dead_time_ns=40"])
    assert exp.sweep == {"N": [32]}
    assert exp.config.spad.dark_count_rate_hz == 400
    assert exp.config.spad.dead_time_ns == 40
    with pytest.raises(ConfigError):
        apply_overrides(exp, ["spad.bogus=1"])


def test_figure_experiments():
    assert figure_experiment(2, 10, 0).config.mean_pe == 0.01
    assert figure_experiment(5, 10, 0).config.mean_pe == 0.5
    with pytest.raises(ConfigError):
        figure_experiment(7, 10, 0)


def test_run_default(default_file, tmp_path, capsys):
    out = tmp_path / "out.csv"
    code = cli.main(["run", str(default_file), "--trials", "300", "--out", str(out)])
    assert code == cli.EXIT_OK
    rows = _csv_rows(out.read_text())
    assert [r["outcome"] for r in rows] == ["CorrectSingle", "CorrectAdjacent", "Erroneous",
                                            "Miss"]
    assert sum(int(r["count"]) for r in rows) == 300


def test_run_with_dark_override(fig2_file, tmp_path):
    out = tmp_path / "fig2.csv"
    code = cli.main(["run", str(fig2_file), "--set", "dark_hz=400", "--out", str(out),
                     "--no-timestamp"])
    assert code == 0
    rows = _csv_rows(out.read_text())
    assert {float(r["dark_hz"]) for r in rows} == {400.0}
    assert len(rows) == 2


def test_run_errors(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == cli.EXIT_MISSING
    bad = tmp_path / "bad.yaml"
    bad.write_text("spad: {quantum_efficiency: 1.5}\n")
    assert cli.main(["run", str(bad)]) == cli.EXIT_CONFIG
    assert "quantum_efficiency" in capsys.readouterr().err
    broken = tmp_path / "broken.yaml"
    broken.write_text("spad: [unclosed\n")
    assert cli.main(["run", str(broken)]) == cli.EXIT_CONFIG
    tight = tmp_path / "tight.yaml"
    tight.write_text("grid: {window_count: 1024}\n")
    assert cli.main(["run", str(tight), "--trials", "10"]) == cli.EXIT_SCHEDULE


def test_figure_rejects_zero_trials(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["figure", "2", "--trials", "0"])
    assert exc.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit):
        cli.main(["figure", "9"])


def test_figure_grid(tmp_path):
    out = tmp_path / "f5.csv"
    assert cli.main(["figure", "5", "--trials", "200", "--seed", "1", "--out", str(out)]) == 0
    rows = _csv_rows(out.read_text())
    assert len(rows) == 5 * 7
    assert {float(r["mean_pe"]) for r in rows} == {0.5}
    assert sorted({int(r["N"]) for r in rows}) == [32, 64, 128, 256, 512, 1024, 2048]
    assert out.read_text().startswith("# qkdsync figure 5 generated ")


def test_validate_report(default_file, capsys):
    assert cli.main(["validate", str(default_file)]) == 0
    report = capsys.readouterr().out
    assert "window_count: 524288" in report
    assert "frame_period_ns: 1048576" in report
    assert "mean_pe: 0.005" in report
    assert "spacing_violations: 0" in report


def test_validate_short_line(tmp_path, capsys):
    path = tmp_path / "short.yaml"
    path.write_text("channel: {length_km: 50}\n")
    assert cli.main(["validate", str(path)]) == 0
    assert "transmittance: 0.1\n" in capsys.readouterr().out


def test_validate_infeasible_spacing(tmp_path, capsys):
    path = tmp_path / "tight.yaml"
    path.write_text("grid: {window_count: 1024}\n")
    assert cli.main(["validate", str(path)]) == cli.EXIT_SCHEDULE
    out = capsys.readouterr().out
    assert "spacing_violations: 7 (first two frames" in out
    assert "needs >= 100000 ns" in out


def test_emit_config_round_trip(fig2_file, tmp_path, capsys):
    emitted = tmp_path / "emitted.yaml"
    assert cli.main(["validate", str(fig2_file), "--emit-config", str(emitted)]) == 0
    first = loads(fig2_file.read_text())
    again = loads(emitted.read_text())
    assert again == first
    assert again.raw == first.raw
    capsys.readouterr()
    assert cli.main(["validate", str(fig2_file), "--emit-config"]) == 0
    assert loads(capsys.readouterr().out) == first
