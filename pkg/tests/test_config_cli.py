import json

import pytest

from jconvex.cli import main
from jconvex.config import json_schema, load_scenario, parse_scenario
from jconvex.errors import ConfigInvalid
from jconvex.runner import bundled_scenarios, emit_plotdata, run_scenario

QUICK = {
    "name": "quick",
    "seed": 1,
    "tasks": [
        {"task": "disc", "name": "d", "p": [[0.0, 0.0], [0.1, 0.0]], "v": [[0.3, 0.0], [0.0, 0.1]],
         "n_r": 8, "n_theta": 16},
        {"task": "psh_scan", "name": "scan", "n_points": 20, "expect": "strictly-psh"},
    ],
}


def write(tmp_path, data, name="s.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


BAD = [
    ({"name": "x", "tasks": [{"task": "df_search", "eta_ladder": [1.5]}]}, "tasks.0.df_search.eta_ladder"),
    ({"name": "x", "tasks": [{"task": "warp"}]}, "tasks.0"),
    ({"name": "x", "unknown": 1}, "unknown"),
    ({"name": "bad name!"}, "name"),
    ({"name": "x", "n": 3, "domain": {"kind": "egg"}}, "egg"),
    ({"name": "x", "structure": {"kind": "terms"}}, "entries"),
    ({"name": "x", "structure": {"kind": "terms", "entries": [
        {"i": 0, "j": 2, "terms": [{"z": [1, 0], "zbar": [0, 0], "re": 0.1}]}]}}, "outside"),
    ({"name": "x", "psi": {"kind": "poly", "terms": [{"z": [1], "zbar": [1]}]}}, "length"),
    ({"name": "x", "tasks": [{"task": "contact", "eta": 0.0}]}, "eta"),
    ({"name": "x", "tasks": [{"task": "disc", "p": [[0, 0]], "v": [[1, 0]]}]}, "disc p and v"),
    ({"name": "x", "tasks": [{"task": "hartogs", "name": "a"}, {"task": "levi", "name": "a"}]}, "unique"),
]


@pytest.mark.parametrize("data, needle", BAD)
def test_invalid_scenarios_name_the_field(data, needle):
    with pytest.raises(ConfigInvalid) as info:
        parse_scenario(data)
    assert any(needle in f for f in info.value.fields) or needle in str(info.value)


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"name": "x",\n  "seed": }')
    with pytest.raises(ConfigInvalid, match=r"broken.json:2:"):
        load_scenario(path)


def test_bundled_scenarios_validate():
    names = bundled_scenarios()
    assert len(names) == 4
    for name in names:
        assert main(["validate", name]) == 0


def test_schema_lists_task_kinds():
    text = json.dumps(json_schema())
    for kind in ("df_search", "contact", "hartogs", "normalize"):
        assert kind in text


def test_run_writes_report_and_timings(tmp_path, capsys):
    cfg = write(tmp_path, QUICK)
    assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 0
    report = json.loads((tmp_path / "out" / "quick.report.json").read_text())
    assert report["passed"] and [t["status"] for t in report["tasks"]] == ["pass", "pass"]
    timings = json.loads((tmp_path / "out" / "quick.timings.json").read_text())
    assert set(timings) == {"d", "scan"}
    assert "pass  d" in capsys.readouterr().err


def test_failing_task_gives_exit_one(tmp_path):
    data = dict(QUICK, tasks=[{"task": "psh_scan", "n_points": 10, "expect": "not-psh"}])
    assert main(["run", str(write(tmp_path, data)), "--out", str(tmp_path)]) == 1


def test_expected_failure_of_search_passes(tmp_path):
    data = {"name": "shell", "domain": {"kind": "shell"},
            "tasks": [{"task": "df_search", "n_samples": 30, "n_boundary": 20, "expect_failure": True}]}
    report, _ = run_scenario(parse_scenario(data))
    assert report["passed"]
    assert report["tasks"][0]["result"]["error"] == "PreconditionFailed"


def test_task_without_certificate_is_an_error():
    report, _ = run_scenario(parse_scenario({"name": "x", "tasks": [{"task": "symplectic"}]}))
    assert report["tasks"][0]["status"] == "error"
    assert not report["passed"]


def test_invalid_config_gives_exit_two(tmp_path, capsys):
    cfg = write(tmp_path, {"name": "x", "tasks": [{"task": "df_search", "eta_ladder": [1.5]}]})
    assert main(["run", str(cfg)]) == 2
    assert "eta must lie in (0, 1)" in capsys.readouterr().err


def test_reports_are_reproducible():
    a, _ = run_scenario(parse_scenario(QUICK))
    b, _ = run_scenario(parse_scenario(QUICK))
    assert a == b


def test_emit_plots(tmp_path, capsys):
    cfg = write(tmp_path, QUICK)
    main(["run", str(cfg), "--out", str(tmp_path)])
    report_path = tmp_path / "quick.report.json"
    assert main(["emit-plots", str(report_path), "--section", "d", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "quick.d.csv").read_text().splitlines()
    assert lines[0].startswith("# ")
    assert lines[1] == "r,theta,re0,im0,re1,im1"
    assert len(lines) == 2 + 8 * 16
    assert main(["emit-plots", str(report_path), "--section", "nope"]) == 1
    assert main(["emit-plots", str(tmp_path / "missing.json"), "--section", "d"]) == 2


def test_emit_plotdata_rejects_sections_without_plots(tmp_path):
    report, _ = run_scenario(parse_scenario(QUICK))
    from jconvex.errors import MissingSection

    with pytest.raises(MissingSection):
        emit_plotdata(report, "scan", tmp_path)


def test_list_command(capsys):
    assert main(["list"]) == 0
    assert "ball-standard.json" in capsys.readouterr().out


def test_coarse_disc_reports_missing_jet():
    report, _ = run_scenario(parse_scenario(QUICK))
    res = report["tasks"][0]["result"]
    assert "jet" not in res and "ill conditioned" in res["jet_error"]
