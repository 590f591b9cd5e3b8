import json

import numpy as np
import pytest

from hypermatch import io as hio
from hypermatch.cli import main


def run(tmp_path, name, *argv):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def summary(out):
    return json.loads((out / "summary.json").read_text())


def test_sample_writes_readable_point_sets(tmp_path):
    code, out = run(tmp_path, "s", "sample", "--d", "2", "--L", "10", "--seeds", "0-1")
    assert code == 0
    for s in (0, 1):
        ps = hio.read_pointset(out / f"sample_s{s}.csv")
        assert ps.box.dim == 2 and ps.box.side == 10.0
        assert len(ps) == summary(out)["results"][str(s)]["n_points"]
    code, out = run(tmp_path, "l", "sample", "--d", "2", "--L", "10", "--lattice")
    assert len(hio.read_pointset(out / "lattice_s0.csv")) == 100


def test_match_is_byte_identical_across_runs(tmp_path):
    args = ("match", "--d", "2", "--L", "12", "--alpha", "1.5", "--seeds", "3-4")
    _, a = run(tmp_path, "a", *args)
    _, b = run(tmp_path, "b", *args)
    for name in sorted(p.name for p in a.glob("*.csv")):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    sa, sb = summary(a), summary(b)
    sa["config"].pop("out"), sb["config"].pop("out")
    assert sa == sb


def test_match_artifacts_round_trip(tmp_path):
    code, out = run(tmp_path, "m", "match", "--d", "1", "--L", "50", "--seed", "2")
    assert code == 0
    res = summary(out)["results"]["2"]
    assert res["complete"] and res["unstable_pairs"] == 0
    phi = hio.read_pointset(out / "phi_s2.csv")
    psi = hio.read_pointset(out / "psi_s2.csv")
    m = hio.matching_from_csv((out / "matching_s2.csv").read_text(), phi, psi)
    assert m.n_matched == res["n_matched"] == 50
    assert psi.box.dim == 1


def test_queue(tmp_path):
    code, out = run(tmp_path, "q", "queue", "--d", "1", "--L", "500", "--alpha", "1.2",
                    "--periodic")
    assert code == 0
    assert summary(out)["results"]["0"]["identity_max_residual"] == 0
    trace = hio.queue_trace_from_csv((out / "queue_s0.csv").read_text())
    assert trace.L.max() == summary(out)["results"]["0"]["max_queue"]


def test_queue_needs_the_line(tmp_path):
    code, _ = run(tmp_path, "q", "queue", "--d", "2")
    assert code == 2


def test_flower_and_budget_exit(tmp_path):
    base = ("flower", "--d", "2", "--L", "12", "--alpha", "1.2", "--seed", "3")
    code, out = run(tmp_path, "f", *base, "--chains")
    assert code == 0 and summary(out)["results"]["3"]["chains_agree"]
    f = hio.flower_from_csv((out / "flower_s3.csv").read_text())
    assert len(f.radii) == summary(out)["results"]["3"]["balls"]
    codes = {run(tmp_path, f"b{a}", *base, "--anchor", str(a), "--budget", "1")[0]
             for a in range(20)}
    assert 3 in codes


def test_flower_anchor_out_of_range(tmp_path):
    assert run(tmp_path, "f", "flower", "--d", "1", "--L", "10", "--anchor", "99")[0] == 2


def test_rigidity_exit_codes(tmp_path):
    code, out = run(tmp_path, "r", "rigidity", "--d", "1", "--L", "500", "--alpha", "2",
                    "--radius", "4", "--seeds", "0-2")
    assert code == 0
    seeds, recs = hio.rigidity_from_csv((out / "rigidity.csv").read_text())
    assert seeds == [0, 1, 2] and all(r.exact for r in recs)
    # a ball wider than the torus cannot be recovered from the outside
    code, out = run(tmp_path, "r2", "rigidity", "--d", "2", "--L", "10", "--radius", "5",
                    "--center", "5,5")
    assert code == 4 and summary(out)["results"]["inconclusive"] == 1


def test_rigidity_center_dimension(tmp_path):
    assert run(tmp_path, "r", "rigidity", "--d", "2", "--L", "10", "--center", "1")[0] == 2


def test_stats_numvar_on_poisson_is_flat(tmp_path):
    _, samples = run(tmp_path, "s", "sample", "--d", "2", "--L", "60", "--alpha", "1",
                     "--seeds", "0-3")
    inputs = [str(p) for p in sorted(samples.glob("sample_*.csv"))]
    code, out = run(tmp_path, "v", "stats", "numvar", "--input", *inputs, "--radii", "2,4",
                    "--n-windows", "4000")
    assert code == 0
    ratio = summary(out)["results"]["variance_over_mean"]
    assert ratio == pytest.approx([1.0, 1.0], abs=0.15)
    table = hio.variance_from_csv((out / "numvar.csv").read_text())
    np.testing.assert_allclose(table.variance / table.mean, ratio)


@pytest.mark.parametrize("estimator,artifact", [("scattering", "sk_binned.csv"),
                                                ("paircorr", "paircorr.csv")])
def test_stats_point_estimators(tmp_path, estimator, artifact):
    _, samples = run(tmp_path, "s", "sample", "--d", "1", "--L", "200", "--seeds", "0-1")
    inputs = [str(p) for p in sorted(samples.glob("sample_*.csv"))]
    code, out = run(tmp_path, "e", "stats", estimator, "--input", *inputs, "--svg")
    assert code == 0
    assert hio.read_table((out / artifact).read_text()) is not None
    assert list(out.glob("*.svg"))


def test_stats_eccdf_reads_matchings(tmp_path):
    _, m = run(tmp_path, "m", "match", "--d", "2", "--L", "10", "--seeds", "0-1")
    code, out = run(tmp_path, "e", "stats", "eccdf", "--d", "2", "--input",
                    *[str(p) for p in sorted(m.glob("matching_*.csv"))])
    assert code == 0
    table = hio.eccdf_from_csv((out / "eccdf.csv").read_text())
    assert table.n == 200


def test_stats_without_input(tmp_path):
    assert run(tmp_path, "e", "stats", "numvar")[0] == 2


def test_repro_smoke_writes_csv_and_svg(tmp_path):
    code, out = run(tmp_path, "r", "repro", "fig4-3d", "--scale", "smoke", "--svg")
    assert code == 0
    assert (out / "eccdf.csv").exists() and (out / "eccdf.svg").exists()
    table = hio.eccdf_from_csv((out / "eccdf.csv").read_text())
    assert table.n == summary(out)["results"]["n"]


def test_config_file_errors_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[experiment]\nd = 2\nL = -1\n")
    assert run(tmp_path, "x", "match", "--config", str(cfg))[0] == 2
    assert f"{cfg}:3: L:" in capsys.readouterr().err


def test_missing_input_file_exits_2(tmp_path):
    code, _ = run(tmp_path, "x", "match", "--process", "file", "--sample-file",
                  str(tmp_path / "nope.csv"))
    assert code == 2


def test_bad_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["match", "--d", "two"])
    assert exc.value.code == 2
