import csv
import math
import subprocess
import sys
import textwrap

import pytest

from matcascade import __version__
from matcascade.cli import fmt, main
from matcascade.config import ConfigError, load_config
from oracles import scalar_k


def run(tmp_path, command, text, *extra):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text(textwrap.dedent(text))
    out = tmp_path / f"{command}.csv"
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def body(path):
    lines = path.read_text().split("\n")
    return lines[0], list(csv.DictReader(lines[1:-1]))


TWO_POINT = """\
    seed: 11
    law:
      type: iid_entries
      d: 1
      entry: {type: two_point, a: 0.5, p: 0.5, b: 2.0}
    estimate_k:
      s: [0, 0.5, 1]
    """


def test_estimate_k_scalar(tmp_path):
    code, out = run(tmp_path, "estimate-k", TWO_POINT)
    assert code == 0
    header, rows = body(out)
    assert header == f"# matcascade {__version__} estimate-k"
    assert list(rows[0]) == ["s", "k_hat", "std_err", "n_min", "n_max", "replicas"]
    assert float(rows[0]["k_hat"]) == 1.0
    for r in rows[1:]:
        s = float(r["s"])
        assert abs(float(r["k_hat"]) - scalar_k(0.5, 0.5, 2.0, s)) <= 4 * float(r["std_err"])


def test_negative_replicas_exit_2(tmp_path, capsys):
    code, _ = run(tmp_path, "estimate-k", TWO_POINT + "  replicas: -4\n")
    assert code == 2
    err = capsys.readouterr().err
    assert "exp.yaml:8" in err and "estimate_k.replicas" in err


@pytest.mark.parametrize("text,fragment", [
    ("law: {type: point_mass, matrix: [[1]]}\n", "missing required key 'seed'"),
    ("seed: 1\nlaw: {type: point_mass, matrix: [[1]]}\nbogus: 2\n", "unknown key"),
    ("seed: 1\nlaw: {type: point_mass, matrix: [[1, 2]]}\n", "square"),
    ("seed: 1\nlaw: {type: iid_entries, d: 2, entry: {type: uniform, lo: 0.5, hi: 0.1}}\n", "hi must be"),
    ("seed: 1\nlaw: {type: finite_support, atoms: [[[1]], [[2]]], probs: [0.5, 0.6]}\n", "sum to 1"),
    ("seed: -3\nlaw: {type: point_mass, matrix: [[1]]}\n", "out of range"),
    ("seed: 1\nlaw: [1, 2\n", "invalid YAML"),
])
def test_config_errors(tmp_path, capsys, text, fragment):
    code, out = run(tmp_path, "estimate-k", text)
    assert code == 2
    assert fragment in capsys.readouterr().err
    assert not out.exists()


def test_config_error_line_anchor():
    text = "seed: 1\ntree: {type: constant, b: 2}\nlaw:\n  type: rates\n  d: 1\n  nu: {type: uniform, lo: 0, hi: 1}\n  mu: {type: fixed, value: 1}\n"
    with pytest.raises(ConfigError) as info:
        load_config(text, "cascade", source="x.yaml")
    assert info.value.line == 6 and info.value.path == "law.nu" and "strictly positive" in str(info.value)


def test_classify_examples(tmp_path, capsys):
    base = "seed: 2\ntree: {type: constant, b: 2}\n"
    code, out = run(tmp_path, "classify", base + "law: {type: point_mass, matrix: [[0.1]]}\n")
    assert code == 0
    rows = {r["quantity"]: r["value"] for r in body(out)[1]}
    assert rows["verdict"] == "RECURRENT" and float(rows["lambda_gr"]) == pytest.approx(0.2)
    assert "RECURRENT" in capsys.readouterr().out
    code, out = run(tmp_path, "classify", base + "law: {type: point_mass, matrix: [[1.0]]}\n"
                    "classify: {replicas: 64, n_list: [5, 10]}\n")
    rows = {r["quantity"]: r["value"] for r in body(out)[1]}
    assert rows["verdict"] == "TRANSIENT" and float(rows["lambda_br"]) == pytest.approx(2.0)
    code, out = run(tmp_path, "classify", base + "law: {type: iid_entries, d: 2, "
                    "entry: {type: uniform, lo: 0.1, hi: 0.4}}\n")
    rows = {r["quantity"]: r["value"] for r in body(out)[1]}
    assert rows["lambda_source"] == "shortcut"
    assert float(rows["lambda_hat"]) == pytest.approx(0.5)
    assert rows["verdict"] == "NEAR-CRITICAL"


def test_cascade_identity(tmp_path):
    code, out = run(tmp_path, "cascade", """\
        seed: 3
        tree: {type: constant, b: 2}
        law: {type: point_mass, matrix: [[1, 0], [0, 1]]}
        cascade: {n_max: 10}
        """)
    assert code == 0
    rows = body(out)[1]
    assert [int(r["kappa_n"]) for r in rows] == [2 ** n for n in range(11)]
    for n, r in enumerate(rows):
        assert float(r["log_Z"]) == pytest.approx(math.log(sum(2 * 2 ** k for k in range(n + 1))), abs=1e-12)


def test_cascade_capacity_exit_1(tmp_path, capsys):
    code, _ = run(tmp_path, "cascade", """\
        seed: 3
        tree: {type: constant, b: 2}
        law: {type: point_mass, matrix: [[1]]}
        cascade: {n_max: 10, width_cap: 100}
        """)
    assert code == 1
    assert "width cap" in capsys.readouterr().err


RATES = """\
    seed: 4
    tree: {type: constant, b: 2}
    law:
      type: rates
      d: 2
      nu: {type: uniform, lo: 0.1, hi: 0.3}
      mu: [{type: fixed, value: 1.0}, {type: uniform, lo: 0.5, hi: 1.5}]
    """


def test_bindweed_exact_uniform(tmp_path):
    code, out = run(tmp_path, "bindweed", RATES + "bindweed: {mode: exact, depth: 0}\n")
    assert code == 0
    rows = body(out)[1]
    assert [r["state"] for r in rows] == ["EMPTY", "root:1", "root:2"]
    assert all(float(r["pi"]) == pytest.approx(1 / 3, abs=1e-15) for r in rows)


def test_bindweed_simulate(tmp_path):
    code, out = run(tmp_path, "bindweed", RATES + "bindweed: {replicas: 3, t_max: 50}\n")
    assert code == 0
    rows = body(out)[1]
    assert list(rows[0]) == ["replica", "returns", "mean_return_time", "max_depth", "final_depth",
                             "censored_excursions"]
    assert [int(r["replica"]) for r in rows] == [0, 1, 2]


def test_bindweed_needs_rates(tmp_path):
    code, _ = run(tmp_path, "bindweed", "seed: 1\ntree: {type: constant, b: 2}\n"
                  "law: {type: point_mass, matrix: [[1]]}\nbindweed: {t_max: 5}\n")
    assert code == 2


def test_chaos_marginal(tmp_path, capsys):
    code, out = run(tmp_path, "chaos", """\
        seed: 5
        law: {type: point_mass, matrix: [[0.5, 0], [0, 0.5]]}
        chaos: {b: 2, iters: 8, population: 100}
        """)
    assert code == 0
    rows = body(out)[1]
    assert [r["slope_running"] for r in rows[1:]] == ["0"] * 8
    assert "MARGINAL" in capsys.readouterr().out


def test_csv_formatting(tmp_path):
    code, out = run(tmp_path, "estimate-k", TWO_POINT)
    raw = out.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    assert fmt(0.1) == "0.10000000000000001" and fmt(3) == "3" and fmt(math.nan) == "nan"


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 1\nlaw: {type: point_mass, matrix: [[0.5]]}\nestimate_k: {s: [1], n_list: [3, 6], replicas: 4}\n")
    out = tmp_path / "o.csv"
    res = subprocess.run([sys.executable, "-m", "matcascade", "estimate-k", "--config", str(cfg),
                          "--out", str(out)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert float(body(out)[1][0]["k_hat"]) == pytest.approx(0.5, rel=1e-14)


def test_bad_threads(tmp_path):
    code, _ = run(tmp_path, "estimate-k", TWO_POINT, "--threads", "0")
    assert code == 2
