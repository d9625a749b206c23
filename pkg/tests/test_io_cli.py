import io
import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from azema.cli import main
from azema.io import (
    path_from_rows,
    path_rows,
    read_paths,
    read_paths_csv,
    read_paths_json,
    to_csv_string,
    write_paths_json,
)
from azema.plot import envelope_excess, render_svg
from azema.renewal import RenewalParams, simulate_renewal
from azema.rng import SeedSpec
from azema.sampler import AzemaParams, simulate_path
from azema.structure import GeneralParams, cubic, simulate_general


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_csv_round_trip_rebuilds_paths():
    paths = [simulate_path(AzemaParams(-0.5, 30, 0.2, 1.0, SeedSpec(4, i))) for i in range(5)]
    text = to_csv_string(paths, {"params": paths[0].params.as_dict()})
    config, rows = read_paths_csv(io.StringIO(text))
    for p, r in zip(paths, rows):
        q = path_from_rows(p.params, r)
        assert len(q) == len(p)
        np.testing.assert_array_equal(q.t_end, p.t_end)
        np.testing.assert_array_equal(q.z_post[~p.censored], p.z_post[~p.censored])
        np.testing.assert_array_equal(q.eps[~p.censored], p.eps[~p.censored])
        np.testing.assert_allclose(q.u[~p.censored], p.u[~p.censored], rtol=1e-9)
        ra, rb = path_rows(q), path_rows(p)
        assert [k for _, _, k in ra] == [k for _, _, k in rb]
        np.testing.assert_allclose([z for _, z, _ in ra], [z for _, z, _ in rb], atol=1e-12)


def test_json_round_trip_is_exact():
    items = [simulate_path(AzemaParams(1.0, 10, -0.3, 1.0, SeedSpec(1))),
             simulate_general(GeneralParams(cubic(), 20, 0.1, 1.0, seed=SeedSpec(2))),
             simulate_renewal(RenewalParams("first", 3.0, SeedSpec(3)))]
    buf = io.StringIO()
    write_paths_json(items, buf, {"x": 1})
    buf.seek(0)
    config, back = read_paths_json(buf)
    assert config == {"x": 1}
    for a, b in zip(items[:2], back[:2]):
        np.testing.assert_array_equal(a.t_end, b.t_end)
        np.testing.assert_array_equal(np.nan_to_num(a.z_pre), np.nan_to_num(b.z_pre))
    np.testing.assert_array_equal(back[1].trace.x, items[1].trace.x)
    np.testing.assert_array_equal(back[2].arrivals, items[2].arrivals)


def test_simulate_csv_independent_of_workers(tmp_path, capsys):
    outs = []
    for w in ("1", "4"):
        f = tmp_path / f"w{w}.csv"
        code, _, _ = run(["simulate", "--beta", "-1", "--n", "50", "--paths", "20", "--seed", "7",
                          "--workers", w, "--out", str(f)], capsys)
        assert code == 0
        outs.append(f.read_bytes())
    assert outs[0] == outs[1]
    first = outs[0].decode().splitlines()[0]
    assert first.startswith("# azema path v1; config=")
    cfg = json.loads(first.split("config=", 1)[1])
    assert cfg["seed"] == 7 and "workers" not in cfg


def test_config_file_then_flags(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"beta": 1.0, "n": 10, "paths": 3, "seed": 5}))
    code, out, _ = run(["marginal", "--config", str(cfg), "--n", "40", "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["params"]["n"] == 40
    assert doc["config"]["params"]["beta"] == 1.0
    assert len(doc["values"]) == 3
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(["marginal", "--config", str(cfg)], capsys)[0] == 2


def test_bad_arguments_exit_2(capsys):
    assert run(["simulate", "--beta", "-1", "--f", "cubic"], capsys)[0] == 2
    assert run(["simulate", "--f", "sine"], capsys)[0] == 2
    assert run(["simulate", "--paths", "0"], capsys)[0] == 2
    assert run(["simulate", "--jump-law", "discrete:1:0.5;2:0.5"], capsys)[0] == 2
    assert run(["verify", "--only", "nope"], capsys)[0] == 2
    assert run(["plot", "--input", "/nonexistent/file.json"], capsys)[0] == 2


def test_renewal_marginal_abs_at_least_one(capsys):
    code, out, _ = run(["marginal", "--renewal", "first", "--paths", "200", "--tmax", "2",
                        "--format", "json"], capsys)
    assert code == 0
    assert np.all(np.abs(json.loads(out)["values"]) >= 1.0)


def test_general_simulate_json_and_plot(tmp_path, capsys):
    f = tmp_path / "g.json"
    assert run(["simulate", "--f", "asymmetric:-1,-0.5", "--n", "30", "--paths", "3",
                "--format", "json", "--out", str(f)], capsys)[0] == 0
    svg = tmp_path / "g.svg"
    assert run(["plot", "--input", str(f), "--out", str(svg)], capsys)[0] == 0
    root = ET.parse(svg).getroot()
    assert root.tag.endswith("svg")
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 3


def test_plot_from_csv(tmp_path, capsys):
    f = tmp_path / "p.csv"
    assert run(["simulate", "--beta", "-1", "--n", "30", "--paths", "2", "--out", str(f)],
               capsys)[0] == 0
    paths = read_paths(str(f))
    assert len(paths) == 2
    assert run(["plot", "--input", str(f), "--out", str(tmp_path / "p.svg")], capsys)[0] == 0


def test_parthasarathy_paths_stay_in_envelope():
    paths = [simulate_path(AzemaParams(-2.0, 10_000, 0.0, 1.0, SeedSpec(12, i))) for i in range(5)]
    assert envelope_excess(paths) <= 0.0
    svg = render_svg(paths)
    assert 'stroke-dasharray' in svg
    ET.fromstring(svg)


def test_verify_command(tmp_path, capsys):
    cfg = tmp_path / "v.json"
    cfg.write_text(json.dumps({"battery": {"decomposition": {"paths": 15}}}))
    code, out, err = run(["verify", "--only", "decomposition", "--config", str(cfg)], capsys)
    assert code == 0
    rec = json.loads(out.strip())
    assert rec["name"] == "decomposition" and rec["pass"] is True
    assert "decomposition" in err


def test_converge_command(capsys):
    code, out, err = run(["converge", "--beta", "-1", "--n-list", "10,100,1000", "--paths", "300"],
                         capsys)
    assert "inversions" in out
    assert code in (0, 1) and ("PASS" in err or "FAIL" in err)
    assert run(["converge", "--f", "cubic"], capsys)[0] == 2
