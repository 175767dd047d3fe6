import json
import subprocess
import sys

import pytest

from gpmseg.cli import main
from gpmseg.instance import save_instance

from _util import make_instance

TINY = {
    "grid": [8, 6, 2],
    "segment_block": 2,
    "tree_levels": 1,
    "n_actors_present": 1,
    "label_space": {"actors": ["adult"], "actions": ["walking", "running"], "joint": [[0, 0], [0, 1]]},
}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def tsv(text):
    return [line.split("\t") for line in text.strip().splitlines()]


@pytest.fixture
def noiseless(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    assert run(capsys, "gen", "-o", inst)[0] == 0
    return inst


def test_gen_default_writes_two_files(tmp_path, capsys):
    code, out, _ = run(capsys, "gen", "-o", tmp_path / "a.json")
    assert code == 0
    assert (tmp_path / "a.json").exists() and (tmp_path / "a.truth.json").exists()
    assert out.count("\n") == 1


def test_gen_bad_config_names_field(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid": [30, 32, 16]}))
    code, out, err = run(capsys, "gen", cfg, "-o", tmp_path / "x.json")
    assert code != 0
    assert err.startswith("error: grid:")
    assert err.count("\n") == 1
    assert not (tmp_path / "x.json").exists()


def test_gen_is_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert run(capsys, "gen", "--seed", 7, "--flip-fraction", 0.2, "-o", tmp_path / f"{name}.json")[0] == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.truth.json").read_bytes() == (tmp_path / "b.truth.json").read_bytes()


def test_solve_and_eval_noiseless(noiseless, capsys):
    code, out, _ = run(capsys, "solve", noiseless)
    assert code == 0 and "converged" in out
    sol = noiseless.with_name("inst.solution.json")
    trace = tsv(noiseless.with_name("inst.trace.tsv").read_text())
    assert trace[0][0] == "iteration" and len(trace) >= 2
    code, out, _ = run(capsys, "eval", sol, noiseless.with_name("inst.truth.json"))
    rows = dict(tsv(out)[1:])
    assert float(rows["average_per_class"]) == 1.0
    assert float(rows["global_accuracy"]) == 1.0


def test_max_iters_zero_equals_no_gpm(tmp_path, capsys):
    inst = tmp_path / "n.json"
    run(capsys, "gen", "--seed", 3, "--flip-fraction", 0.2, "-o", inst)
    run(capsys, "solve", inst, "--no-gpm", "-o", tmp_path / "a.json")
    run(capsys, "solve", inst, "--max-iters", 0, "-o", tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.trace.tsv").read_bytes() == (tmp_path / "b.trace.tsv").read_bytes()


def test_no_video_flag(noiseless, capsys, tmp_path):
    assert run(capsys, "solve", noiseless, "--no-video", "--seed", 2, "-o", tmp_path / "nv.json")[0] == 0
    assert json.loads((tmp_path / "nv.json").read_text())["video"] == [0] * 7


def test_solve_directory_in_parallel(tmp_path, capsys):
    d = tmp_path / "suite"
    d.mkdir()
    for s in range(3):
        run(capsys, "gen", "--seed", s, "-o", d / f"i{s}.json")
    code, out, _ = run(capsys, "solve", d, "--jobs", 2, "-o", tmp_path / "out")
    assert code == 0
    assert len(out.strip().splitlines()) == 3
    serial = tmp_path / "serial"
    run(capsys, "solve", d, "-o", serial)
    for s in range(3):
        a = (tmp_path / "out" / f"i{s}.solution.json").read_bytes()
        assert a == (serial / f"i{s}.solution.json").read_bytes()


def test_eval_json_and_figure(noiseless, capsys, tmp_path):
    run(capsys, "solve", noiseless)
    fig = tmp_path / "conf.png"
    code, out, _ = run(capsys, "eval", noiseless.with_name("inst.solution.json"), noiseless.with_name("inst.truth.json"), "--json", "--figure", fig)
    assert code == 0
    d = json.loads(out)
    assert d["average_per_class"] == 1.0
    assert fig.stat().st_size > 0


def test_eval_truth_against_itself(noiseless, capsys):
    truth = noiseless.with_name("inst.truth.json")
    code, out, _ = run(capsys, "eval", truth, truth)
    assert all(float(v) == 1.0 for _, v in tsv(out)[1:])


def test_eval_mismatch_is_an_error(tmp_path, capsys, noiseless):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"labeling": [0, 1]}))
    code, _, err = run(capsys, "eval", bad, noiseless.with_name("inst.truth.json"))
    assert code == 1 and "mismatch" in err


def test_missing_file_is_an_error(tmp_path, capsys):
    code, _, err = run(capsys, "solve", tmp_path / "nope.json")
    assert code == 1 and err.startswith("error:")


def test_schema_error_is_one_line(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text(json.dumps({"labels": {}}))
    code, _, err = run(capsys, "solve", p)
    assert code == 1 and err.startswith("error: schema violation") and err.count("\n") == 1


def test_oracle_on_tiny_instance(tmp_path, capsys):
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    inst = tmp_path / "t.json"
    run(capsys, "gen", cfg, "--flip-fraction", 0.25, "-o", inst)
    code, out, _ = run(capsys, "oracle", inst)
    assert code == 0
    rows = {r[0]: r for r in tsv(out)[1:]}
    assert float(rows["slice"][4]) == 0.0
    assert float(rows["labeling"][5]) <= 0.01


def test_oracle_refuses_large_instance(noiseless, capsys):
    code, _, err = run(capsys, "oracle", noiseless)
    assert code == 1 and "too large" in err and "22" in err


def test_bench_reports_samples(tmp_path, capsys):
    p = tmp_path / "one.json"
    save_instance(make_instance([[0.3, 0.1, 0.9, 0.5]]), p)
    fig = tmp_path / "bench.png"
    code, out, _ = run(capsys, "bench", p, "--repeats", 5, "--figure", fig)
    assert code == 0
    rows = {r[0]: r for r in tsv(out)[1:]}
    assert set(rows) == {"init", "slice", "labeling", "total"}
    for r in rows.values():
        assert r[2] == "5" and len(r[3].split(",")) == 5
    assert float(rows["slice"][1]) < 1e-3
    assert all(float(r[1]) < 5e-3 for r in rows.values())
    assert fig.exists()


def test_render_truth_equals_noiseless_solution(noiseless, capsys, tmp_path):
    run(capsys, "solve", noiseless)
    a, b = tmp_path / "sol.ppm", tmp_path / "truth.ppm"
    assert run(capsys, "render", noiseless.with_name("inst.solution.json"), noiseless, "--frame", 5, "-o", a)[0] == 0
    run(capsys, "render", noiseless.with_name("inst.truth.json"), noiseless, "--frame", 5, "-o", b)
    assert a.read_bytes() == b.read_bytes()
    code, _, err = run(capsys, "render", noiseless.with_name("inst.truth.json"), noiseless, "--frame", 99, "-o", a)
    assert code == 1 and "frame 99" in err


def test_render_without_layout_fails(tmp_path, capsys):
    p = tmp_path / "one.json"
    save_instance(make_instance([[0.3, 0.1, 0.9, 0.5]]), p)
    s = tmp_path / "s.json"
    s.write_text(json.dumps({"labeling": [1]}))
    code, _, err = run(capsys, "render", s, p, "-o", tmp_path / "x.ppm")
    assert code == 1 and "layout" in err


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "gpmseg", "gen", "-o", str(tmp_path / "m.json")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    r = subprocess.run([sys.executable, "-m", "gpmseg", "eval", "x", "y"], capture_output=True, text=True)
    assert r.returncode == 1 and r.stderr.startswith("error:")
