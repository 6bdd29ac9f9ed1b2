import json
import math
import subprocess
import sys

import pytest

from sskoverlap.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_mgf_xi_zero(capsys):
    code, out, _ = run(capsys, "mgf", "--n", "6", "--beta", "0.8", "--bigH", "1", "--xi", "0",
                       "--seed", "7", "--method", "contour")
    assert code == 0 and json.loads(out)["value"] == 1.0


def test_formulas_replica_entry(capsys):
    code, out, _ = run(capsys, "formulas", "--t", "0.5", "--bigH", "0", "--xi", "1", "--n1", "1")
    d = json.loads(out)
    assert code == 0
    assert d["replica_mgf"] == pytest.approx(math.cosh(1.0), rel=1e-15)
    assert d["replica_mgf"] == pytest.approx(1.5431, abs=1e-4)


def test_formulas_h_abs_needs_n(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["formulas", "--t", "0.5", "--h-abs", "0.1", "--n1", "1"])
    assert exc.value.code == 2
    code, out, _ = run(capsys, "formulas", "--t", "0.5", "--h-abs", "0.1", "--n", "100", "--n1", "1")
    assert json.loads(out)["H"] == pytest.approx(1.0)


def test_bessel_selftest(capsys):
    code, out, _ = run(capsys, "bessel-selftest")
    d = json.loads(out)
    assert code == 0 and d["pass"] and len(d["rows"]) == 25
    assert d["max_rel_error"] <= 1e-8


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["mgf", "--n", "6", "--beta", "0.8", "--bigH", "1", "--h-abs", "0.3", "--seed", "1"],
    ["mgf", "--n", "6", "--beta", "0.8", "--t", "1.2", "--seed", "1"],
    ["oracle", "--n", "6", "--beta", "0.8", "--xi", "0.3"],
    ["mgf", "--n", "6", "--beta", "0.8", "--method", "mc"],
    ["sample", "--n", "0", "--seed", "1"],
    ["event-study", "--n-grid", "100"],
])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_computation_error_exit_1(capsys):
    code, out, err = run(capsys, "mgf", "--n", "6", "--beta", "0.8", "--xi", "0.5", "--seed", "1",
                         "--e-hat", "0.5")
    assert code == 1 and out == ""
    d = json.loads(err)
    assert d["error"] == "ValueError" and d["command"] == "mgf"


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    d = json.loads(capsys.readouterr().out)
    assert d["default_contour_spec"]["delta"] == 0.25
    assert d["default_contour_spec"]["quad_tol"] == 1e-10


def test_sample_file_round_trip(tmp_path, capsys):
    path = tmp_path / "s.json"
    run(capsys, "sample", "--n", "8", "--seed", "3", "--output", str(path))
    _, a, _ = run(capsys, "mgf", "--sample", str(path), "--beta", "0.8", "--bigH", "1", "--xi", "0.4")
    _, b, _ = run(capsys, "mgf", "--n", "8", "--seed", "3", "--beta", "0.8", "--bigH", "1", "--xi", "0.4")
    assert json.loads(a)["value"] == json.loads(b)["value"]


def test_mgf_methods_agree(capsys):
    common = ["--n", "6", "--seed", "2", "--beta", "0.8", "--bigH", "1", "--xi", "0.5"]
    _, c, _ = run(capsys, "mgf", *common)
    _, m, _ = run(capsys, "mgf", *common, "--method", "mc", "--n-samples", "400000")
    c, m = json.loads(c), json.loads(m)
    assert abs(c["value"] - m["value"]) <= 3 * m["abs_error_estimate"]
    _, t, _ = run(capsys, "mgf", "--t", "0.5", "--bigH", "1", "--xi", "1", "--n1", "1", "--method", "theorem")
    assert json.loads(t)["value"] == pytest.approx(6.77981, abs=1e-5)


def test_dump_contour(tmp_path, capsys):
    path = tmp_path / "path.csv"
    code, _, _ = run(capsys, "mgf", "--n", "20", "--seed", "1", "--beta", "2", "--bigH", "1",
                     "--xi", "1", "--dump-contour", str(path))
    lines = path.read_text().splitlines()
    assert code == 0
    assert lines[0] == "integral,piece,param,re_w,im_w,re_z,im_z,abs_integrand"
    assert {ln.split(",")[0] for ln in lines[1:]} == {"numerator", "denominator"}


def test_oracle_json(capsys):
    code, out, _ = run(capsys, "oracle", "--n", "4", "--seed", "5", "--beta", "0.5", "--bigH", "1",
                       "--xi", "0.3", "--n-samples", "20000")
    d = json.loads(out)
    assert code == 0 and {"value", "std_error", "ess", "n_samples", "seed"} <= set(d)
    code, out, _ = run(capsys, "oracle", "--n", "4", "--seed", "5", "--beta", "0.5", "--bigH", "1",
                       "--replica", "--xi-r", "0", "--n-samples", "20000")
    assert json.loads(out)["value"] == 1.0


def test_check_event_and_solve(capsys):
    _, out, _ = run(capsys, "check-event", "--n", "300", "--seed", "1", "--sampler", "fast", "--epsilon", "0.3")
    d = json.loads(out)
    assert d["member"] == all(v for k, v in d.items() if k.startswith("clause_"))
    _, out, _ = run(capsys, "solve", "--n", "300", "--seed", "1", "--beta", "2", "--bigH", "1", "--xi", "1")
    d = json.loads(out)
    assert d["residual_g"] <= 2e-12 and d["p_m"] > d["p"]


def test_sweep_files_and_threshold_exit(tmp_path, capsys):
    cfg = {"n_grid": [30, 60], "xi_grid": [0.5], "seeds": 4, "epsilon": 0.3, "master_seed": 1,
           "skip_off_event": False, "thresholds": {"max_median_rel_error": 10.0}}
    cpath = tmp_path / "cfg.json"
    cpath.write_text(json.dumps(cfg))
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", "--config", str(cpath), "--output", str(out1)]) == 0
    assert main(["sweep", "--config", str(cpath), "--output", str(out2)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    ja, jb = (json.loads((tmp_path / f).read_text()) for f in ("a.json", "b.json"))
    assert ja["config"].pop("output_path") != jb["config"].pop("output_path")
    assert ja == jb
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.csv", "a.json", "b.csv", "b.json", "cfg.json"]
    cfg["thresholds"] = {"max_median_rel_error": 1e-9}
    cpath.write_text(json.dumps(cfg))
    assert main(["sweep", "--config", str(cpath), "--output", str(out1)]) == 3


def test_studies(capsys):
    code, out, _ = run(capsys, "event-study", "--n-grid", "100,200", "--seeds", "50", "--epsilon", "0.5",
                       "--seed", "3")
    rows = json.loads(out)["rows"]
    assert [r["n"] for r in rows] == [100, 200]
    code, out, _ = run(capsys, "scaling-study", "--n-grid", "100,200,400", "--seeds", "30", "--seed", "3")
    d = json.loads(out)
    assert code == 0 and "slope_plain" in d and "spearman_xi" in d


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "sskoverlap", "formulas", "--t", "0.75", "--bigH", "0",
                          "--xi", "1", "--n1", "1"], capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["mgf_theorem"] == pytest.approx(1.64068, abs=1e-5)
