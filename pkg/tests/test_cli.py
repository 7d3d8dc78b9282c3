import json

import pytest

from helpers import LN2, LN3, half_half_segment_graph

from gdcover.cli import main
from gdcover.schema import bundled_text, dumps_system


@pytest.fixture(scope="module")
def corpus_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("systems")
    out = {}
    for name in ("cantor", "cantor_point", "two_ratio", "two_vertex"):
        p = root / f"{name}.json"
        p.write_text(bundled_text(name), encoding="utf-8")
        out[name] = str(p)
    return out


RENEWAL_DOC = {
    "M": [[[[LN2, 0.5], [LN3, 0.5]]]],
    "L": [[[0.0, 1.0], [LN2, 0.0]]],
    "horizon": 30.0,
}


class TestValidate:
    def test_ok_text(self, corpus_files, capsys):
        assert main(["validate", corpus_files["cantor"]]) == 0
        out = capsys.readouterr().out
        assert out.strip().endswith("ok")
        assert "PASS" in out

    def test_ok_json(self, corpus_files, capsys):
        assert main(["validate", "--json", corpus_files["cantor"]]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["ok"] is True
        assert all(c["passed"] for c in doc["checks"])

    def test_failing_system(self, tmp_path, capsys):
        doc = {
            "dimension": 1,
            "vertices": [{"id": "X", "box": {"min": [0.0], "max": [1.0]}}],
            "edges": [
                {"id": "a", "from": "X", "to": "X", "ratio": 1.2, "translation": [0.0]}
            ],
        }
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(doc), encoding="utf-8")
        assert main(["validate", str(p)]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_missing_file(self, tmp_path, capsys):
        assert main(["validate", str(tmp_path / "nope.json")]) == 1
        assert "cannot read" in capsys.readouterr().err

    def test_spot_check_flag(self, corpus_files, capsys):
        rc = main(
            ["validate", "--json", "--spot-check", corpus_files["cantor_point"]]
        )
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["spot_check"]["pairs_checked"] == 40
        assert doc["spot_check"]["min_normalized_distance"] > 0


class TestDim:
    def test_two_vertex_text(self, corpus_files, capsys):
        assert main(["dim", corpus_files["two_vertex"]]) == 0
        assert "s0 = 0.551463089746" in capsys.readouterr().out

    def test_cantor_json(self, corpus_files, capsys):
        assert main(["dim", "--json", corpus_files["cantor"]]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["s0"] == pytest.approx(LN2 / LN3, abs=1e-12)
        assert doc["vertex_order"] == ["X"]
        assert len(doc["u"]) == len(doc["v"]) == 1


class TestLattice:
    def test_cantor_is_lattice(self, corpus_files, capsys):
        assert main(["lattice", corpus_files["cantor"]]) == 0
        out = capsys.readouterr().out
        assert out.startswith("lattice, tau = 1.09861228867")
        assert "exact mode" in out

    def test_two_ratio_is_dense(self, corpus_files, capsys):
        assert main(["lattice", corpus_files["two_ratio"]]) == 0
        assert capsys.readouterr().out.startswith("dense")

    def test_json_fields(self, corpus_files, capsys):
        assert main(["lattice", "--json", corpus_files["cantor"]]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["kind"] == "lattice"
        assert doc["tau"] == pytest.approx(LN3, rel=1e-12)

    def test_forced_floating_mode(self, corpus_files, capsys):
        assert main(["lattice", "--mode", "floating", "--json", corpus_files["cantor"]]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["mode"] == "floating"
        assert doc["tau"] == pytest.approx(LN3, rel=1e-9)


class TestProfile:
    def test_csv_header_and_shape(self, corpus_files, capsys):
        rc = main(
            [
                "profile",
                corpus_files["cantor"],
                "--tmin", "1.0",
                "--tmax", "4.0",
                "--samples", "4",
            ]
        )
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "t,r,N_X,N_total,ratio_X,ratio_total"
        assert len(lines) == 5

    def test_lattice_period_columns(self, corpus_files, capsys):
        rc = main(
            [
                "profile",
                corpus_files["cantor"],
                "--tmin", "1.0",
                "--tmax", "6.0",
                "--samples", "2",
                "--period", "auto",
            ]
        )
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("t,r,n,y,")

    def test_output_is_deterministic(self, corpus_files, tmp_path):
        args = [
            "profile",
            corpus_files["two_ratio"],
            "--tmin", "1.0",
            "--tmax", "5.0",
            "--samples", "9",
        ]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(args + ["-o", str(a)]) == 0
        assert main(args + ["-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_bad_period_rejected(self, corpus_files, capsys):
        rc = main(["profile", corpus_files["cantor"], "--period", "sometimes"])
        assert rc == 1
        assert "--period" in capsys.readouterr().err


class TestRenewal:
    def test_scalar_summary(self, tmp_path, capsys):
        p = tmp_path / "renewal.json"
        p.write_text(json.dumps(RENEWAL_DOC), encoding="utf-8")
        assert main(["renewal", str(p)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["dri_ok"] is True
        assert doc["fixed_point_residual"] < 1e-9
        assert doc["limit"]["kind"] == "constant"
        want = LN2 / ((LN2 + LN3) / 2)
        assert doc["limit"]["values"][0] == pytest.approx(want, abs=1e-9)

    def test_solution_csv(self, tmp_path):
        p = tmp_path / "renewal.json"
        p.write_text(json.dumps(RENEWAL_DOC), encoding="utf-8")
        out = tmp_path / "f.csv"
        assert main(["renewal", str(p), "-o", str(out), "--samples", "11"]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "t,f_0"
        assert len(lines) == 12

    def test_lattice_tau_gives_periodic_limit(self, tmp_path, capsys):
        doc = {"M": [[[[LN3, 1.0]]]], "L": [[[0.0, 1.0], [LN3, 0.0]]], "tau": LN3}
        p = tmp_path / "lat.json"
        p.write_text(json.dumps(doc), encoding="utf-8")
        assert main(["renewal", str(p)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["limit"]["kind"] == "periodic"
        vals = out["limit"]["values"]
        flat = [x for row in vals for x in row]
        assert max(abs(x - 1.0) for x in flat) < 1e-9

    def test_malformed_input(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text('{"M": []}', encoding="utf-8")
        assert main(["renewal", str(p)]) == 1
        assert "error:" in capsys.readouterr().err


class TestAnalyze:
    def test_cantor_json(self, corpus_files, capsys):
        rc = main(
            [
                "analyze",
                corpus_files["cantor"],
                "--json",
                "--n-min", "4",
                "--n-max", "8",
                "--y-samples", "4",
            ]
        )
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["regime"]["regime"] == "SmallCondensation-Lattice"
        assert doc["estimate"]["kind"] == "periodic"
        assert doc["cross_check"]["max_rel_discrepancy"] < 0.05
        assert doc["lattice"]["tau"] == pytest.approx(LN3, rel=1e-12)

    def test_inconclusive_exit_code(self, tmp_path, capsys):
        p = tmp_path / "tie.json"
        p.write_text(dumps_system(half_half_segment_graph()), encoding="utf-8")
        assert main(["analyze", str(p)]) == 4
        assert "error:" in capsys.readouterr().err


class TestArgparse:
    # usage errors come from argparse itself and exit rather than return

    def test_no_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_file_argument(self):
        with pytest.raises(SystemExit) as exc:
            main(["dim"])
        assert exc.value.code == 2


class TestReport:
    def test_artifacts_written_and_deterministic(self, corpus_files, tmp_path):
        base = [
            "report",
            corpus_files["cantor"],
            "--n-min", "3",
            "--n-max", "6",
            "--y-samples", "4",
        ]
        d1, d2 = tmp_path / "r1", tmp_path / "r2"
        assert main(base + ["-o", str(d1)]) == 0
        assert main(base + ["-o", str(d2)]) == 0
        names = ["report.json", "profile.csv", "limit.csv", "cross_check.csv"]
        for name in names:
            assert (d1 / name).is_file(), name
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name
        doc = json.loads((d1 / "report.json").read_text())
        assert set(doc["artifacts"].values()) == set(names)
        assert doc["system"]["dimension"] == 1
