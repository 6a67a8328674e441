import hashlib
import json

import pytest

from scldpc.cli import EXIT_BRACKET, EXIT_OK, EXIT_PARTIAL, EXIT_SPEC, main


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def manifest(tmp_path):
    return json.loads((tmp_path / "manifest.json").read_text())


def test_rate_prints_six_decimals(tmp_path, capsys):
    assert run(tmp_path, "rate", "--l", "3", "--r", "6", "--L", "11", "--w", "3") == EXIT_OK
    assert capsys.readouterr().out.strip() == "rate 0.460398"
    m = manifest(tmp_path)
    assert m["command"] == "rate" and m["results"]["rate"] == pytest.approx(0.460398, abs=1e-6)
    assert m["ensemble"] == {"l": 3, "r": 6, "w": 3, "topology": "line", "L": 11}
    assert m["version"] and m["backend"] in ("numba", "numpy") and m["wall_time_s"] >= 0


def test_circular_kappa_is_padded(tmp_path, capsys):
    assert run(tmp_path, "rate", "--circular", "--K", "25", "--w", "3",
               "--kappa", "0.529,0.529") == EXIT_OK
    assert capsys.readouterr().out.strip() == "rate 0.477987"


def test_bad_spec_exit_code(tmp_path):
    assert run(tmp_path, "rate", "--l", "6", "--r", "3") == EXIT_SPEC
    assert run(tmp_path, "rate", "--circular", "--w", "3") == EXIT_SPEC
    assert run(tmp_path, "rate", "--L", "4", "--kappa", "0.5") == EXIT_SPEC
    assert manifest(tmp_path)["results"]["exit_code"] == EXIT_SPEC


def test_argparse_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, "rate", "--w", "three")
    assert exc.value.code == 2


def test_no_bracket_exit_code(tmp_path):
    assert run(tmp_path, "threshold", "--bec", "--lo", "0.45") == EXIT_BRACKET


def test_bec_threshold(tmp_path, capsys):
    assert run(tmp_path, "threshold", "--bec", "--coupled", "--L", "16", "--w", "3") == EXIT_OK
    out = capsys.readouterr().out.split()
    assert out[:3] == ["threshold", "BEC", "eps"]
    assert float(out[3]) == pytest.approx(0.48815, abs=5e-4)


def test_outputs_and_digests(tmp_path):
    assert run(tmp_path, "maxwell", "--bec", "--anchors", "100") == EXIT_OK
    m = manifest(tmp_path)
    assert set(m["outputs"]) == {"curve.csv", "curve.dat"}
    for name, digest in m["outputs"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest
    dat = (tmp_path / "curve.dat").read_text().splitlines()
    assert dat[0] == "# anchor param_value h_channel g_value residual"
    assert len(dat[1].split()) == 5
    assert m["results"]["maxwell"] == pytest.approx(0.48815, abs=1e-3)


def test_rerun_from_manifest_reproduces_outputs(tmp_path):
    first = tmp_path / "a"
    second = tmp_path / "b"
    assert main(["ebp", "--bec", "--anchors", "50", "--out", str(first)]) == EXIT_OK
    assert main(["ebp", "--config", str(first / "manifest.json"), "--out", str(second)]) == EXIT_OK
    assert manifest(first)["outputs"] == manifest(second)["outputs"]


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# one-sided chain\none-sided = true\nK = 25\nw = 3\nalpha = 0.2\n")
    assert main(["rate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "rate 0.485783"
    assert main(["rate", "--config", str(cfg), "--alpha", "0", "--out", str(tmp_path)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "rate 0.481783"


def test_config_errors(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["rate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_SPEC
    cfg.write_text("no equals sign here\n")
    assert main(["rate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_SPEC
    other = tmp_path / "m.json"
    other.write_text(json.dumps({"command": "sweep", "params": {"w": 3}}))
    assert main(["rate", "--config", str(other), "--out", str(tmp_path)]) == EXIT_SPEC


def test_partial_failure_exit_code(tmp_path):
    # anchors this small cannot be reached by any BAWGN channel
    code = run(tmp_path, "ebp", "--bawgn", "--bins", "256", "--anchor-list", "0.01,0.02,0.03,1.0",
               "--failure-fraction", "0.1")
    assert code == EXIT_PARTIAL
    assert len(manifest(tmp_path)["results"]["gaps"]) == 3


def test_fp_command(tmp_path, capsys):
    assert run(tmp_path, "fp", "--bec", "--L", "16", "--w", "3", "--entropy", "0.48815") == EXIT_OK
    out = capsys.readouterr().out
    assert "unimodal True" in out
    m = manifest(tmp_path)
    assert m["results"]["boundary_entropy"] < 0.1
    assert (tmp_path / "profile.csv").exists()
    assert run(tmp_path, "fp", "--bec", "--L", "4", "--w", "3") == EXIT_SPEC


def test_sweep_command(tmp_path, capsys):
    assert run(tmp_path, "sweep", "--w", "3", "--K", "30", "--deltas", "0.1,0.4", "--tol", "1e-3") == EXIT_OK
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert rows[0] == "delta,epsilon_bp,kappa,design_rate,w,K" and len(rows) == 3
