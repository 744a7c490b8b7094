import io
import json
import subprocess
import sys

import pytest

from lmgboot import runner
from lmgboot.cli import main
from lmgboot.runner import ConfigError, run, validate_config


def test_valid_key_value_config():
    cfg = validate_config("L=2 gamma=1 hx=1 hz=1")
    assert (cfg.L, cfg.params, cfg.two_ls) == (2, (1.0, 1.0, 1.0), [0, 2])


def test_json_config_and_aliases():
    cfg = validate_config(json.dumps({"L": 5, "h_x": 0.5, "sectors": ["1/2", "5/2"], "tau_res": 1e-6}))
    assert cfg.hx == 0.5
    assert cfg.two_ls == [1, 5]
    assert cfg.tol().residual == 1e-6


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("L=0", "L must be >= 1"),
        ("L=2 sectors=[0.5]", "not admissible"),
        ("gamma=1", "L is required"),
        ("L=2 colour=red", "unknown key"),
        ("L=2 hx=abc", "hx must be"),
        ("L=2 mode=fit", "mode must be"),
        ("L=2 tau_null=-1", "tolerance"),
        ("L=2 measures=concurrence,spin", "unknown measure"),
    ],
)
def test_invalid_configs(text, fragment):
    with pytest.raises(ConfigError) as e:
        validate_config(text)
    assert any(fragment in p for p in e.value.problems)


def test_all_problems_reported():
    with pytest.raises(ConfigError) as e:
        validate_config("L=-3 gamma=x format=xml")
    assert len(e.value.problems) == 3


def test_bootstrap_l2_rows():
    res = run(validate_config("L=2 gamma=1 hx=1 hz=1"), out=io.StringIO())
    assert res.exit_code == 0
    assert len(res.rows) == 4
    (singlet,) = [r for r in res.rows if r.l == 0]
    assert singlet.E == pytest.approx(0.25)


def test_toy_mode():
    res = run(validate_config("L=4 mode=toy"), out=io.StringIO())
    assert [r.E for r in res.rows] == pytest.approx([-2, -1, 0, 1, 2], abs=1e-10)


def test_compare_mode():
    out = io.StringIO()
    res = run(validate_config("L=6 gamma=0.5 hx=0.5 hz=1 mode=compare"), out=out)
    assert res.exit_code == 0
    assert res.comparison.ok
    assert res.comparison.max_energy_error < 1e-8
    assert "max |E_bootstrap - E_oracle|" in out.getvalue()


def test_oracle_modes_agree_with_bootstrap():
    base = "L=4 gamma=1 hx=0.5 hz=1"
    boot = run(validate_config(base), out=None).rows
    am = run(validate_config(base + " mode=oracle-am"), out=None).rows
    ed = run(validate_config(base + " mode=oracle-ed"), out=None).rows
    assert len(boot) == len(am) == 1 + 3 + 5
    assert len(ed) == 2 + 3 * 3 + 5
    for b, a in zip(boot, am):
        assert b.E == pytest.approx(a.E, abs=1e-9)
        assert b.C == pytest.approx(a.C, abs=1e-6)
        assert b.F_max == pytest.approx(a.F_max, abs=1e-6)
    sym = [r for r in ed if r.l == 2]
    for e, a in zip(sym, [r for r in am if r.l == 2]):
        assert e.C == pytest.approx(a.C, abs=1e-9)
        assert e.tau == pytest.approx(a.tau, abs=1e-9)


def test_diagnostic_exit_keeps_output(tmp_path):
    out = tmp_path / "r.csv"
    res = run(validate_config(f"L=4 tau_res=1e-30 output={out}"), out=io.StringIO())
    assert res.exit_code == runner.EXIT_DIAGNOSTIC
    assert out.exists()
    assert any("accepted 0 states" in d for d in res.diagnostics)


def test_files_written(tmp_path):
    out = tmp_path / "sub" / "r.csv"
    res = run(validate_config(f"L=3 gamma=0.5 hz=1 output={out}"), out=None)
    names = sorted(p.name for p in res.files)
    assert names == sorted(
        ["r.csv"] + [f"r.{s}.csv" for s in ("concurrence", "tangle", "residual", "entropy", "qfi_max", "qfi_sum")]
    )
    header = (tmp_path / "sub" / "r.qfi_max.csv").read_text().splitlines()[0]
    assert header == "E,l,value"


def test_measure_subset(tmp_path):
    out = tmp_path / "r.csv"
    res = run(validate_config(f"L=3 hz=1 measures=tangle output={out}"), out=None)
    assert [p.name for p in res.files] == ["r.csv", "r.tangle.csv"]
    assert all(r.C is None and r.tau is not None for r in res.rows)


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_round_trip(tmp_path, fmt):
    out = tmp_path / f"r.{fmt}"
    res = run(validate_config(f"L=5 gamma=0.5 hx=1 hz=0.5 format={fmt} output={out}"), out=None)
    text = out.read_text()
    back = runner.rows_from_json(text) if fmt == "json" else runner.rows_from_csv(text)
    assert back == res.rows


def test_output_is_deterministic(tmp_path):
    texts = []
    for k in range(2):
        out = tmp_path / f"r{k}.csv"
        run(validate_config(f"L=6 gamma=1 hx=1 hz=1 output={out}"), out=None)
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


def test_threads_give_same_rows(monkeypatch):
    cfg = validate_config("L=6 gamma=0.5 hx=0.5 hz=1")
    serial = run(cfg).rows
    monkeypatch.setenv(runner.THREADS_ENV, "3")
    assert run(cfg).rows == serial


def test_trend_report_flags_edges():
    rows = [
        runner.ResultRow(E=e, l=1.0, cluster=0, cluster_size=1, degenerate=False,
                         residual_commutator=0, residual_eigen=0, residual_symmetry=0, C=c, F_sum=f)
        for e, c, f in [(0, 0.1, 5), (1, 0.2, 1), (2, 0.3, 1)]
    ]
    assert runner.trend_report(rows) == ["max F_sum at spectrum edge (E=0)"]


def test_cli_main(tmp_path, capsys):
    out = tmp_path / "r.json"
    code = main(["bootstrap", "--L", "2", "--gamma", "1", "--hx", "1", "--hz", "1", "--format", "json", "--out", str(out)])
    assert code == 0
    assert len(json.loads(out.read_text())) == 4
    assert "sector l=1: 3 states" in capsys.readouterr().out


def test_cli_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("L=3\ngamma=0.5  # comment\nhz=1\n")
    assert main(["oracle-am", "--config", str(cfg), "--L", "4"]) == 0
    assert "L=4" in capsys.readouterr().out


def test_cli_invalid(capsys):
    assert main(["bootstrap", "--L", "2", "--sectors", "1/2"]) == 2
    assert capsys.readouterr().err.startswith("error: ")
    assert main(["bootstrap", "--config", "/nonexistent/run.cfg"]) == 2


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "lmgboot", "toy", "--L", "2"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert "J_z basis: 3 states" in proc.stdout
