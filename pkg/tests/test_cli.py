import json
import subprocess
import sys

import pytest

from gibbsnls.cli import (CONFIG_NAME, EXPERIMENTS, OUTPUT_ROOT_ENV, format_config, main,
                          parse_config_text, resolve)
from gibbsnls.errors import ConfigInvalid

QUICK = ["--k", "2", "--dt", "2e-3", "--t-final", "0.2"]


def files_under(root):
    return {p.relative_to(root): p.read_bytes() for p in root.rglob("*") if p.is_file()}


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name in EXPERIMENTS)
    assert main(["list", "--json"]) == 0
    items = json.loads(capsys.readouterr().out)
    assert [i["name"] for i in items] == list(EXPERIMENTS) and len(items) == 7


def test_pass_exit_code_and_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "conservation", *QUICK, "--output-dir", str(out)]) == 0
    assert "result      PASS" in capsys.readouterr().out
    names = {p.name for p in out.iterdir()}
    assert names == {CONFIG_NAME, "report.json", "report.txt", "trajectory.csv"}
    report = json.loads((out / "report.json").read_text())
    assert report["pass"] is True and report["params"]["k"] == 2


def test_failed_experiment_exit_code(tmp_path):
    # dt = 0.1 leaves a Hamiltonian drift above the 1e-6 tolerance
    args = ["run", "conservation", "--k", "2", "--dt", "0.1", "--t-final", "0.5"]
    assert main([*args, "--output-dir", str(tmp_path)]) == 1


def test_aborted_experiment_exit_code(tmp_path, capsys):
    args = ["run", "gibbs-invariance", "--set", "chi.c=1000", "--n-samples", "1000",
            "--t-final", "0.1", "--output-dir", str(tmp_path)]
    assert main(args) == 1
    assert "LowESS" in capsys.readouterr().err


@pytest.mark.parametrize("extra, field", [
    (["--set", "params.alpha=0.5"], "params.alpha"),
    (["--set", "flow.scheme=euler"], "flow.scheme"),
    (["--set", "nonsense.key=1"], "nonsense.key"),
    (["--set", "params.k=2.5"], "params.k"),
    (["--set", "test.level=2"], "test.level"),
])
def test_invalid_config_exit_code(tmp_path, capsys, extra, field):
    assert main(["run", "conservation", *extra, "--output-dir", str(tmp_path / "x")]) == 2
    assert field in capsys.readouterr().err
    assert not (tmp_path / "x").exists()


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "conservation", *QUICK, "--output-dir", str(blocker / "sub")]) == 2
    assert "error" in capsys.readouterr().err


def test_config_round_trip(tmp_path):
    cfg = resolve("cauchy-rate", sets=["cauchy.s=-0.7", "test.times=[1, 3]"],
                  overrides={"output_dir": str(tmp_path)})
    text = format_config(cfg)
    assert parse_config_text(text) == cfg
    path = tmp_path / "c.cfg"
    path.write_text("# saved\n\n" + text)
    assert resolve("cauchy-rate", config_file=path) == cfg
    with pytest.raises(ConfigInvalid):
        resolve("conservation", config_file=path)
    with pytest.raises(ConfigInvalid):
        parse_config_text("no equals sign")


def test_precedence(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("flow.dt = 0.01\nparams.k = 4\n")
    cfg = resolve("conservation", config_file=path, sets=["params.k=5"],
                  overrides={"params.k": 2})
    assert (cfg["flow.dt"], cfg["params.k"]) == (0.01, 2)


def test_reruns_are_byte_identical(tmp_path):
    out = tmp_path / "run"
    args = ["run", "cauchy-rate", "--set", "cauchy.m_max=5", "--output-dir", str(out)]
    assert main(args) == 0
    first = files_under(out)
    assert main(args) == 0
    assert files_under(out) == first


def test_env_root_and_no_stray_writes(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    before = set(tmp_path.iterdir())
    assert main(["run", "conservation", *QUICK, "--no-csv"]) == 0
    assert set(tmp_path.iterdir()) - before == {tmp_path / "root"}
    written = {str(p) for p in files_under(tmp_path / "root")}
    assert written == {f"conservation/{CONFIG_NAME}", "conservation/report.json",
                       "conservation/report.txt"}


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gibbsnls", "list", "--json"],
                          capture_output=True, text=True, check=True)
    assert len(json.loads(proc.stdout)) == 7
