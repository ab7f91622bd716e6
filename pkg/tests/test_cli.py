"""Command line surface, exercised in process through main(argv)."""

import csv

import pytest

from axsec.arith import ArchParams, gen_module
from axsec.cli import main
from axsec.designs import fir_spec
from axsec.netlist import structurally_equal
from axsec.textfmt import read_netlist, write_netlist


def _rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_gen_module_writes_the_library_build(tmp_path, capsys):
    out = tmp_path / "loa.nl"
    assert main(["gen-module", "--op", "add", "--arch", "loa",
                 "--width", "8", "--k", "2", "--out", str(out)]) in (0, None)
    assert "loa2" in capsys.readouterr().out
    ref = tmp_path / "ref.nl"
    write_netlist(gen_module(ArchParams("add", "loa", 8, 2)), ref)
    assert out.read_bytes() == ref.read_bytes()
    assert structurally_equal(read_netlist(out), read_netlist(ref))


def test_gen_design_list_slots(capsys):
    assert main(["gen-design", "--design", "fir", "--list-slots"]) in (0, None)
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["mul0 mul 8", "mul1 mul 8", "mul2 mul 8", "mul3 mul 8",
                     "add0 add 16", "add1 add 16", "add2 add 17"]


def test_gen_design_with_assignment(tmp_path):
    out = tmp_path / "v.nl"
    main(["gen-design", "--design", "fir",
          "--assign", "add0=loa:4;add2=loa:4", "--out", str(out)])
    ref = tmp_path / "ref.nl"
    write_netlist(fir_spec(8, (3, 5, 7, 9)).build(
        {"add0": ArchParams("add", "loa", 16, 4),
         "add2": ArchParams("add", "loa", 17, 4)}), ref)
    assert out.read_bytes() == ref.read_bytes()


def test_gen_design_requires_an_output(capsys):
    assert main(["gen-design", "--design", "fir"]) == 2
    assert "error:" in capsys.readouterr().err


def test_profile_artifacts(tmp_path):
    nl = tmp_path / "m.nl"
    main(["gen-module", "--op", "add", "--arch", "loa", "--width", "8",
          "--k", "3", "--out", str(nl)])
    out = tmp_path / "prof"
    main(["profile", "--netlist", str(nl), "--vectors", "500",
          "--theta", "0.05", "--ref", "auto", "--out-dir", str(out)])
    act = _rows(out / "activity.csv")
    n_nets = read_netlist(nl).n_nets
    assert len(act) == n_nets
    assert set(act[0]) == {"net", "name", "p1", "toggles"}
    assert all(0.0 <= float(r["p1"]) <= 1.0 for r in act)
    power = _rows(out / "power.csv")[0]
    assert float(power["proxy"]) > 0.0 and power["n_vectors"] == "500"
    for r in _rows(out / "rare.csv"):
        p = float(r["p1"])
        assert p < 0.05 or p > 0.95
    err = _rows(out / "error.csv")[0]
    assert float(err["er"]) > 0.0
    assert float(err["mred"]) > 0.0
    assert err["n_vectors"] == "500"


def test_scoap_gives_unit_costs_at_inputs(tmp_path):
    nl = tmp_path / "m.nl"
    main(["gen-module", "--op", "add", "--arch", "exact", "--width", "2",
          "--out", str(nl)])
    out = tmp_path / "scoap.csv"
    main(["scoap", "--netlist", str(nl), "--out", str(out)])
    rows = {r["name"]: r for r in _rows(out)}
    assert rows["a[0]"]["cc0"] == "1" and rows["a[0]"]["cc1"] == "1"
    assert rows["s"]["co"] == "0"


def test_sta_path_listing(tmp_path):
    nl = tmp_path / "m.nl"
    main(["gen-module", "--op", "mul", "--arch", "exact", "--width", "4",
          "--out", str(nl)])
    out = tmp_path / "paths.csv"
    main(["sta", "--netlist", str(nl), "--clock", "20", "--paths", "5",
          "--window", "20", "--out", str(out)])
    rows = _rows(out)
    assert 0 < len(rows) <= 5
    assert [r["rank"] for r in rows] == [str(i + 1) for i in range(len(rows))]
    slacks = [float(r["slack"]) for r in rows]
    assert slacks == sorted(slacks)
    for r in rows:
        assert float(r["delay"]) + float(r["slack"]) == pytest.approx(20.0)
        assert ">" in r["nets"]
        assert r["instances"] == "u"


def test_attack_and_report(tmp_path, capsys):
    nl = tmp_path / "v.nl"
    main(["gen-design", "--design", "fir",
          "--assign", "add0=loa:4;add2=loa:4", "--out", str(nl)])
    out = tmp_path / "bad.nl"
    rep = tmp_path / "attack.csv"
    code = main(["attack", "--netlist", str(nl), "--secret", "coef",
                 "--clock", "55", "--vectors", "20000", "--seed", "3",
                 "--stealth-vectors", "2000", "--ref", "none",
                 "--out", str(out), "--report", str(rep)])
    assert code in (0, None)
    assert "leak payload hosted at top." in capsys.readouterr().out
    bad = read_netlist(out)
    clean = read_netlist(nl)
    assert len(bad.gates) > len(clean.gates)
    assert dict(bad.output_words()).keys() == dict(clean.output_words()).keys()
    row = _rows(rep)[0]
    assert row["payload"] == "leak" and row["q"] == "4"
    assert row["host"].startswith("top.")
    assert len(row["taps"].split(";")) == 4
    assert "=" in row["witness"]
    assert row["error_delta"] == "n/a"          # no reference requested
    assert float(row["trigger_rate"]) <= 1e-3
    assert float(row["min_slack"]) > 0.0


def test_detect_clean_candidates(tmp_path, capsys):
    cdir = tmp_path / "cands"
    cdir.mkdir()
    for i in range(2):
        main(["gen-design", "--design", "fir",
              "--out", str(cdir / f"c{i}.nl")])
    out = tmp_path / "report.csv"
    dbg = tmp_path / "debug.csv"
    code = main(["detect", "--candidates", str(cdir), "--vectors", "300",
                 "--stress", "50", "--out", str(out), "--debug", str(dbg)])
    assert code in (0, None)
    printed = capsys.readouterr().out
    assert "c0: CLEAN" in printed and "c1: CLEAN" in printed
    rows = _rows(out)
    assert {r["netlist"] for r in rows} == {"c0", "c1"}
    assert all(r["verdict"] == "CLEAN" for r in rows)
    assert all(float(r["suspicion"]) == 0.0 for r in rows)
    assert {r["kind"] for r in _rows(dbg)} == {"approximate",
                                               "deterministic"}


def test_score_from_csv_files(tmp_path, capsys):
    rep = tmp_path / "report.csv"
    rep.write_text("netlist,verdict,instance,suspicion\n"
                   "n0,INFECTED,a,1.0\nn0,INFECTED,b,0.0\n"
                   "n1,INFECTED,a,1.0\nn1,INFECTED,b,0.0\n")
    truth = tmp_path / "truth.csv"
    truth.write_text("netlist,infected,host\nn0,1,a\nn1,0,\n")
    out = tmp_path / "metrics.csv"
    main(["score", "--report", str(rep), "--truth", str(truth),
          "--out", str(out)])
    assert "accuracy=0.7500 fpr=0.3333 fnr=0.0000" in capsys.readouterr().out
    m = _rows(out)[0]
    assert float(m["accuracy"]) == 0.75
    assert float(m["fpr"]) == pytest.approx(1 / 3)
    assert float(m["fnr"]) == 0.0


def test_config_file_supplies_required_flags(tmp_path):
    cfg = tmp_path / "job.cfg"
    out = tmp_path / "m.nl"
    cfg.write_text(f"op=add\narch=loa\nwidth=8\nk=2\nout={out}\n"
                   "frobnicate=9\n")   # unknown keys are ignored
    assert main(["gen-module", "--config", str(cfg)]) in (0, None)
    ref = tmp_path / "ref.nl"
    write_netlist(gen_module(ArchParams("add", "loa", 8, 2)), ref)
    assert out.read_bytes() == ref.read_bytes()


def test_command_line_beats_the_config_file(tmp_path):
    cfg = tmp_path / "job.cfg"
    out = tmp_path / "m.nl"
    cfg.write_text(f"op=add\narch=loa\nwidth=8\nk=2\nout={out}\n")
    main(["gen-module", "--config", str(cfg), "--k", "4"])
    ref = tmp_path / "ref.nl"
    write_netlist(gen_module(ArchParams("add", "loa", 8, 4)), ref)
    assert out.read_bytes() == ref.read_bytes()


def test_user_errors_exit_with_two(tmp_path, capsys):
    code = main(["gen-module", "--op", "add", "--arch", "loa",
                 "--width", "8", "--k", "99", "--out",
                 str(tmp_path / "x.nl")])
    assert code == 2
    assert "error:" in capsys.readouterr().err
    code = main(["scoap", "--netlist", str(tmp_path / "missing.nl"),
                 "--out", str(tmp_path / "y.csv")])
    assert code == 2


def test_experiment_verb_and_config_round_trip(tmp_path, capsys):
    e1 = tmp_path / "e1"
    code = main(["experiment", "--seed", "11", "--n-variants", "4",
                 "--infected-fraction", "0.5",
                 "--characterize-vectors", "400",
                 "--trace-vectors", "4000", "--stealth-vectors", "2000",
                 "--detect-vectors", "500", "--detect-stress", "100",
                 "--out", str(e1)])
    assert code in (0, None)
    assert "4 variants, 2 infected" in capsys.readouterr().out
    e2 = tmp_path / "e2"
    # the emitted config reproduces the run byte for byte
    main(["experiment", "--config", str(e1 / "config.txt"),
          "--out", str(e2)])
    for name in ("metrics.csv", "detect_report.csv", "variants.csv",
                 "ht_ground_truth.csv"):
        assert (e1 / name).read_bytes() == (e2 / name).read_bytes(), name
