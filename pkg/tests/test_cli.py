import csv
import json

import pytest

from aggdiff.cli import main, read_config, resolve, UsageError


def rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_steady_outputs(tmp_path, capsys):
    out = tmp_path / "steady"
    code = main(["steady", "--d", "3", "--s", "1.25", "--lambda", "1", "--rmax", "60",
                 "--n", "512", "--out", str(out)])
    report = {r["check"]: r for r in rows(out / "identity_report.csv")}
    assert float(report["energy_ratio"]["value"]) == pytest.approx(5.0, rel=1e-2)
    for name in ("pohozaev", "energy_ratio", "hls_ratio", "stationarity"):
        assert report[name]["passed"] == "true", report[name]
    prof = rows(out / "steady_profile.csv")
    assert list(prof[0]) == ["r", "u", "c", "mu"] and len(prof) == 512
    man = json.loads((out / "manifest-steady.json").read_text())
    assert man["outputs"] == ["steady_profile.csv", "identity_report.csv"]
    assert man["config"]["n"] == 512 and man["config"]["epsilon"] == 0.0
    assert man["cache_key"]["n"] == 512
    assert man["exit_code"] == code
    # every check, including lambda invariance, decides the exit status
    assert code == (0 if all(r["passed"] == "true" for r in report.values()) else 1)


def test_steady_reference_exit_status(tmp_path):
    assert main(["steady", "--d", "3", "--s", "1.25", "--lambda", "1", "--rmax", "60",
                 "--n", "512", "--out", str(tmp_path)]) == 0


def test_seventeen_digits(tmp_path):
    main(["steady", "--d", "3", "--s", "1.25", "--n", "64", "--out", str(tmp_path)])
    first = rows(tmp_path / "steady_profile.csv")[0]
    assert len(first["r"].replace(".", "").lstrip("0")) <= 17
    assert len(first["u"].replace(".", "").lstrip("0")) == 17


def test_missing_s(tmp_path, capsys):
    assert main(["steady", "--d", "3", "--out", str(tmp_path)]) == 2
    assert "usage" in capsys.readouterr().err


def test_parameter_domain(tmp_path):
    assert main(["steady", "--d", "3", "--s", "1.6", "--out", str(tmp_path)]) == 2


def test_bad_flag_value(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["steady", "--d", "three", "--s", "1.25"])
    assert exc.value.code == 2


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# reference pair\nd = 3\ns = 1.25  # critical\nn = 128\n\nrmax = 30\n")
    merged = resolve("steady", {"config": str(cfg), "n": 64, "d": None, "s": None})
    assert merged["n"] == 64          # flag beats file
    assert merged["rmax"] == 30.0     # file beats default
    assert merged["lambda"] == 1.0    # default
    assert read_config(cfg) == {"d": "3", "s": "1.25", "n": "128", "rmax": "30"}


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("d = 3\ns = 1.25\nkappa = 0.8\n")
    with pytest.raises(UsageError):
        resolve("steady", {"config": str(cfg)})
    assert main(["steady", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_config_malformed(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("d 3\n")
    assert main(["steady", "--config", str(cfg)]) == 2


def test_simulate_subcritical(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--d", "3", "--s", "1.25", "--kappa", "0.8", "--tend", "2",
                 "--snapshot-every", "20", "--out", str(out)]) == 0
    ev = rows(out / "events.csv")[0]
    assert ev["event"] == "ReachedTEnd"
    assert float(ev["sup_lm_ratio"]) < 1.0
    traj = rows(out / "trajectory.csv")
    assert list(traj[0]) == ["t", "mass", "lm_norm", "linf", "free_energy", "second_moment",
                             "moment_rhs", "dissipation"]
    assert len(traj) == 41
    snaps = rows(out / "snapshots.csv")
    assert len(snaps) == 3 * 512
    man = json.loads((out / "manifest-simulate.json").read_text())
    assert sorted(man["outputs"]) == ["events.csv", "snapshots.csv", "trajectory.csv"]
    assert man["status"] == "complete"


def test_simulate_supercritical(tmp_path):
    assert main(["simulate", "--d", "3", "--s", "1.25", "--kappa", "1.2", "--out", str(tmp_path)]) == 0
    ev = rows(tmp_path / "events.csv")[0]
    assert ev["event"] == "BlowupDetected"
    assert float(ev["t_star"]) < 10.0


def test_simulate_zero(tmp_path):
    assert main(["simulate", "--d", "3", "--s", "1.25", "--kappa", "0", "--tend", "0.2",
                 "--n", "64", "--out", str(tmp_path)]) == 0
    assert rows(tmp_path / "events.csv")[0]["event"] == "ReachedTEnd"
    for r in rows(tmp_path / "trajectory.csv"):
        assert float(r["mass"]) == 0.0 and float(r["free_energy"]) == 0.0


def test_simulate_gaussian_regularized(tmp_path):
    assert main(["simulate", "--d", "3", "--s", "1.25", "--init", "gaussian", "--amplitude", "0.5",
                 "--epsilon", "0.1", "--tend", "0.2", "--n", "64", "--rmax", "20",
                 "--out", str(tmp_path)]) == 0


def test_simulate_bad_init(tmp_path):
    assert main(["simulate", "--d", "3", "--s", "1.25", "--init", "file", "--n", "64",
                 "--out", str(tmp_path)]) == 2


def test_dichotomy_scan(tmp_path):
    assert main(["dichotomy", "--d", "3", "--s", "1.25", "--kappas", "0.8,1.0,1.2",
                 "--out", str(tmp_path)]) == 0
    table = {float(r["kappa"]): r for r in rows(tmp_path / "dichotomy.csv")}
    assert table[0.8]["predicted"] == "Global" and table[0.8]["observed"] == "ReachedTEnd"
    assert table[1.2]["predicted"] == "Blowup" and table[1.2]["observed"] == "BlowupDetected"
    assert table[1.0]["predicted"] == "CriticalUnclassified"
    assert table[1.0]["scored"] == "false"


def test_dichotomy_empty_list(tmp_path):
    assert main(["dichotomy", "--d", "3", "--s", "1.25", "--kappas", "", "--out", str(tmp_path)]) == 2
    assert main(["dichotomy", "--d", "3", "--s", "1.25", "--kappas", " , ", "--out", str(tmp_path)]) == 2


def test_verify_coarse_grid_fails(tmp_path, capsys):
    assert main(["verify", "--d", "3", "--s", "1.25", "--n", "16", "--out", str(tmp_path)]) == 1
    table = {int(r["criterion"]): r for r in rows(tmp_path / "acceptance.csv")}
    assert table[7]["passed"] == "false"
    assert "failed:" in capsys.readouterr().out


def test_verify_second_parameter_pair(tmp_path):
    code = main(["verify", "--d", "4", "--s", "1.75", "--out", str(tmp_path)])
    failed = [r["criterion"] + " " + r["name"] for r in rows(tmp_path / "acceptance.csv")
              if r["passed"] != "true"]
    assert code == 0, failed
