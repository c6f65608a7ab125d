import json

import pytest

from calabi_lab.main import build_parser, load_config, main
from calabi_lab.services.report_service import CSV_COLUMNS
from calabi_lab.utils.exceptions import ConfigurationError

FAST = ["--quad", "16", "--time-nodes", "4", "--steps", "20", "--grid-res", "5", "--probe-count", "4"]


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_chart_check(capsys, workdir):
    assert main(["chart-check", "--out", str(workdir / "out")]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["passed"] is True
    assert result["residual"] <= result["tolerance"]


def test_corrupted_chart_fails(capsys):
    assert main(["chart-check", "--corrupted-chart"]) == 1
    assert json.loads(capsys.readouterr().out)["passed"] is False


def test_verify_zero_suite(capsys, workdir):
    assert main(["verify", "--suite", "zero", "--out", str(workdir / "out"), *FAST]) == 0
    out = capsys.readouterr().out
    assert "PASS  chart_symplecticity" in out
    assert (workdir / "out" / "verify.json").is_file()


def test_verify_corrupted_chart(capsys, workdir):
    assert main(["verify", "--suite", "zero", "--corrupted-chart", "--out", str(workdir / "out"), *FAST]) == 1
    assert "FAIL  chart_symplecticity" in capsys.readouterr().out


def test_cal_prints_csv(capsys, workdir):
    assert main(["cal", "--hamiltonian", "zero", "--out", str(workdir / "out"), *FAST]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1].startswith("zero,1.0,0.0,")
    assert (workdir / "out" / "cal.csv").is_file()
    assert (workdir / "out" / "cal.json").is_file()


def test_unknown_hamiltonian_is_a_usage_error(workdir):
    assert main(["cal", "--hamiltonian", "nothing", "--out", str(workdir / "out"), *FAST]) == 2


def test_missing_config_file():
    assert main(["chart-check", "--config", "absent.conf"]) == 2


def test_invalid_flag_value():
    assert main(["chart-check", "--dim", "0"]) == 2


def test_unknown_config_key(workdir):
    (workdir / "bad.conf").write_text("dim = 2\nwarp_factor = 9\n")
    assert main(["chart-check", "--config", str(workdir / "bad.conf")]) == 2


def test_config_precedence(workdir, monkeypatch):
    (workdir / "lab.conf").write_text("# desk run\ndim = 2\nsteps = 40\n")
    monkeypatch.setenv("CALABI_LAB_STEPS", "90")
    monkeypatch.setenv("CALABI_LAB_SEED", "11")

    config = load_config(build_parser().parse_args(["chart-check", "--dim", "3"]))

    assert config.dim == 3
    assert config.steps == 40
    assert config.seed == 11
    assert config.delta == 0.5


def test_lambda_flag_and_booleans(workdir):
    config = load_config(build_parser().parse_args(["grid", "--lambda", "xdy", "--svg"]))
    assert config.kinds()[0].value == "xdy"
    assert config.svg is True


def test_load_config_raises_on_bad_schedule():
    with pytest.raises(ConfigurationError):
        load_config(build_parser().parse_args(["seq", "--eps", "0.2,oops"]))


def test_invalid_default_config_file_is_a_usage_error(workdir, capsys):
    (workdir / "lab.conf").write_text("steps = abc\n")
    assert main(["chart-check"]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unprefixed_environment_is_ignored(monkeypatch):
    monkeypatch.setenv("STEPS", "abc")
    monkeypatch.setenv("OUT", "/nowhere")
    config = load_config(build_parser().parse_args(["chart-check"]))
    assert config.steps == 200
    assert config.out == "results"


def test_log_level_is_validated():
    assert main(["chart-check", "--log-level", "chatty"]) == 2
    config = load_config(build_parser().parse_args(["chart-check", "--log-level", "debug"]))
    assert config.log_level == "DEBUG"
