import subprocess
import sys
import time

import pytest

from triopoly import __version__
from triopoly.cli import main
from triopoly.polyval import default_catalog_path


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


ANB = ("--model", "anb", "--c1", "1.63", "--c2", "2.1", "--l", "0.6")


class TestEq:
    def test_symmetric(self, capsys):
        code, out, _ = run(capsys, "eq", "--c1", "2", "--c2", "2", "--c3", "2", "--k", "1", "--l", "0.5")
        assert code == 0
        assert "E2         (0.111111111111111" in out
        assert "interior   true" in out
        assert out.count("|lambda|") == 3

    def test_not_interior(self, capsys):
        code, out, _ = run(capsys, "eq", "--c1", "1", "--c2", "1", "--c3", "2.5", "--k", "1", "--l", "0.5")
        assert code == 0 and "interior   false" in out and "not computed" in out


class TestStab:
    def test_below_lower_cost_bound(self, capsys):
        code, out, _ = run(capsys, "stab", *ANB, "--c3", "0.4", "--k", "0.3")
        assert code == 0
        line = next(l for l in out.splitlines() if "LS_ANB_1" in l)
        assert line.endswith("fails")
        assert "not all conditions hold" in out

    def test_above_upper_cost_bound(self, capsys):
        _, out, _ = run(capsys, "stab", *ANB, "--c3", "3.8", "--k", "0.3")
        line = next(l for l in out.splitlines() if "LS_ANB_2" in l)
        assert line.endswith("fails") and float(line.split()[1]) > 0

    def test_stable_point(self, capsys):
        _, out, _ = run(capsys, "stab", *ANB, "--c3", "2.2", "--k", "0.3")
        assert "verdict    stable" in out
        assert "  all conditions hold" in out
        assert "shown for reference" not in out

    def test_other_costs_are_flagged(self, capsys):
        _, out, _ = run(capsys, "stab", "--c1", "1", "--c2", "1", "--c3", "1", "--k", "0.3", "--l", "0.5")
        assert "shown for reference" in out


class TestExitCodes:
    def test_usage_errors(self, capsys):
        assert run(capsys, "eq", "--c1", "x", "--c2", "1", "--c3", "1", "--k", "1")[0] == 2
        assert run(capsys, "eq", "--c1", "-1", "--c2", "1", "--c3", "1", "--k", "1")[0] == 2
        assert run(capsys, "eq", "--c1", "1", "--c2", "1", "--c3", "1")[0] == 2
        assert run(capsys, "scan", *ANB, "--c3", "1")[0] == 2  # no --out
        assert run(capsys, "bogus")[0] == 2

    def test_catalog_corruption(self, capsys, tmp_path):
        text = default_catalog_path().read_text()
        i = text.index("LS_LNB_3 :=")
        j = i + text[i:].index("*") - 1
        bad = tmp_path / "bad.poly"
        bad.write_text(text[:j] + str((int(text[j]) + 3) % 10) + text[j + 1:])
        code, _, err = run(capsys, "stab", *ANB, "--c3", "2.2", "--k", "0.3", "--catalog", str(bad))
        assert code == 3
        assert "catalog integrity failure in LS_LNB_3" in err

    def test_orbit_escape(self, capsys, tmp_path):
        out = tmp_path / "o.csv"
        code, _, err = run(capsys, "orbit", *ANB, "--c3", "2.2", "--k", "3.0", "--steps", "500",
                           "--out", str(out))
        assert code == 4 and "left the domain" in err
        rows = out.read_text().splitlines()
        assert rows[0] == "t,x,y,z" and 1 < len(rows) < 502

    def test_version(self, capsys):
        assert main(["--version"]) == 0
        assert __version__ in capsys.readouterr().out


class TestConfigAndSidecar:
    def test_sidecar_reproduces_scan(self, capsys, tmp_path):
        a = tmp_path / "a.csv"
        code, _, _ = run(capsys, "scan", *ANB, "--axis1", "c3:0.3:4:30", "--axis2", "k:0.05:2:25",
                         "--threads", "3", "--out", str(a))
        assert code == 0
        cfg = (tmp_path / "a.csv.cfg").read_text()
        assert "command = scan" in cfg and "threads = 3" in cfg
        b = tmp_path / "b.csv"
        assert run(capsys, "scan", "--config", str(a) + ".cfg", "--out", str(b), "--threads", "1")[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_sidecar_reproduces_bif(self, capsys, tmp_path):
        a = tmp_path / "a.csv"
        run(capsys, "bif", *ANB, "--c3", "2.2", "--lo", "1.4", "--hi", "2.6", "--count", "13",
            "--n-transient", "300", "--n-keep", "32", "--out", str(a))
        b = tmp_path / "b.csv"
        assert run(capsys, "bif", "--config", str(a) + ".cfg", "--out", str(b))[0] == 0
        assert a.read_bytes() == b.read_bytes()
        assert "escaped" in a.read_text()

    def test_flags_override_config(self, capsys, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("command = eq\nmodel = anb\nc1 = 2\nc2 = 2\nc3 = 2\nk = 1\nl = 0.5\n")
        _, out, _ = run(capsys, "eq", "--config", str(cfg))
        assert "(0.111111111111111" in out
        _, out2, _ = run(capsys, "eq", "--config", str(cfg), "--c3", "1")
        assert out2 != out

    @pytest.mark.parametrize("body,fragment", [
        ("command = stab\n", "for command 'stab'"),
        ("c1 = 1\nc1 = 2\n", "duplicate"),
        ("c1 1\n", "c.cfg:1:"),
        ("axis1 = c3:0:1:10\n", "unknown key"),
    ])
    def test_bad_config(self, capsys, tmp_path, body, fragment):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(body)
        code, _, err = run(capsys, "eq", "--config", str(cfg))
        assert code == 2 and fragment in err

    def test_missing_config_file(self, capsys, tmp_path):
        assert run(capsys, "eq", "--config", str(tmp_path / "nope.cfg"))[0] == 2


class TestGridCommands:
    def test_curve_of_linear_factor(self, capsys, tmp_path):
        out = tmp_path / "c.csv"
        code, _, _ = run(capsys, "curve", *ANB, "--func", "LS_ANB_1", "--axis1", "c3:0.3:1:20",
                         "--axis2", "k:0.1:2:20", "--out", str(out))
        assert code == 0
        rows = out.read_text().splitlines()[1:]
        assert rows and all(abs(float(r.split(",")[2]) - 0.47) < 1e-9 for r in rows)

    def test_curve_of_margin(self, capsys, tmp_path):
        out = tmp_path / "c.csv"
        code, msg, _ = run(capsys, "curve", *ANB, "--func", "s2", "--axis1", "c3:0.5:3.7:30",
                           "--axis2", "k:0.05:4:30", "--out", str(out))
        assert code == 0 and "polyline" in msg

    def test_surface(self, capsys, tmp_path):
        out = tmp_path / "s.csv"
        code, _, _ = run(capsys, "surface", "--poly", "LS_LNB_1", "--axis1", "c3:0:1:3", "--axis2", "k:1:2:2",
                         "--out", str(out))
        assert code == 0
        rows = out.read_text().splitlines()
        assert rows[0] == "p1,p2,value" and rows[1] == "0,1,-1" and len(rows) == 7

    def test_surface_missing_variable(self, capsys, tmp_path):
        code, _, err = run(capsys, "surface", "--poly", "PD_ANB", "--axis1", "c3:0:1:3", "--axis2", "k:1:2:2",
                           "--out", str(tmp_path / "s.csv"))
        assert code == 2 and "--c1" in err

    def test_orbit_rows(self, capsys, tmp_path):
        out = tmp_path / "o.csv"
        assert run(capsys, "orbit", *ANB, "--c3", "2.2", "--k", "0.5", "--steps", "10", "--out", str(out))[0] == 0
        assert len(out.read_text().splitlines()) == 12


class TestVerify:
    def test_quick_is_fast_and_passes(self, capsys):
        t0 = time.perf_counter()
        code, out, _ = run(capsys, "verify", "--quick")
        assert time.perf_counter() - t0 < 10
        assert code == 0 and "FAIL" not in out

    def test_report_is_reproducible(self, capsys, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        run(capsys, "verify", "--quick", "--seed", "5", "--out", str(a))
        run(capsys, "verify", "--config", str(a) + ".cfg", "--out", str(b), "--threads", "4")
        assert a.read_bytes() == b.read_bytes()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "triopoly", "eq", "--c1", "2", "--c2", "2", "--c3", "2",
                          "--k", "1", "--l", "0.5"], capture_output=True, text=True)
    assert res.returncode == 0 and "E2" in res.stdout
