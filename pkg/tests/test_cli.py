import csv
import io
import json
import re

import numpy as np
import pytest

from conftest import CONFIG_DIR
from layoutforge.cli import load_dataset, main
from layoutforge.gdsii import GdsLibrary, read_gds_file, write_gds_file
from layoutforge.geometry import Cell


def doc(name, size_um=10):
    d = json.loads((CONFIG_DIR / f"{name}.json").read_text())
    sec = d.get("metal") or d.get("via")
    sec["total_x"] = sec["total_y"] = size_um
    d.pop("output", None)
    return d


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_metal_clean(tmp_path, write_config, capsys):
    cfg = write_config(doc("metal_test1"))
    code, out, _ = run(capsys, "gen-metal", "--config", cfg, "--out", tmp_path / "m.gds")
    assert code == 0
    assert "status=CLEAN" in out
    assert len(read_gds_file(tmp_path / "m.gds").cells[0]) > 0


def test_gen_metal_deterministic(tmp_path, write_config, capsys):
    cfg = write_config(doc("metal_test4"))
    run(capsys, "gen-metal", "--config", cfg, "--out", tmp_path / "a.gds")
    run(capsys, "gen-metal", "--config", cfg, "--out", tmp_path / "b.gds")
    run(capsys, "gen-metal", "--config", cfg, "--out", tmp_path / "c.gds", "--seed", 99)
    a, b, c = ((tmp_path / n).read_bytes() for n in ("a.gds", "b.gds", "c.gds"))
    assert a == b and a != c


def test_seed_override_matches_config_seed(tmp_path, write_config, capsys):
    d = doc("metal_test2")
    d["seed"] = 17
    run(capsys, "gen-metal", "--config", write_config(d, "s.json"), "--out", tmp_path / "a.gds")
    d["seed"] = 1
    run(capsys, "gen-metal", "--config", write_config(d, "t.json"), "--out", tmp_path / "b.gds", "--seed", 17)
    assert (tmp_path / "a.gds").read_bytes() == (tmp_path / "b.gds").read_bytes()


def test_bad_configs_exit_2(tmp_path, write_config, capsys):
    d = doc("metal_test1")
    d["metal"]["min_t2t"] = 0.5
    code, _, err = run(capsys, "gen-metal", "--config", write_config(d), "--out", tmp_path / "x.gds")
    assert code == 2 and "metal" in err
    assert not (tmp_path / "x.gds").exists()
    d = doc("via_test1")
    del d["via"]["m1"]
    code, _, err = run(capsys, "gen-via", "--config", write_config(d, "v.json"), "--out", tmp_path / "y.gds")
    assert code == 2 and "via.m1" in err
    code, _, _ = run(capsys, "gen-via", "--config", write_config(doc("metal_test1"), "m.json"))
    assert code == 2
    code, _, _ = run(capsys, "gen-metal")
    assert code == 2
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


def test_gen_via_stats(tmp_path, write_config, capsys):
    code, out, _ = run(capsys, "gen-via", "--config", write_config(doc("via_test3", 20)), "--out",
                       tmp_path / "v.gds", "--jsonl", tmp_path / "v.jsonl")
    assert code == 0
    m = re.search(r"candidates=(\d+) after_density=(\d+) vias=(\d+) realized_fraction=([\d.]+)", out)
    cand, dens, vias, frac = int(m[1]), int(m[2]), int(m[3]), float(m[4])
    assert vias <= dens <= cand and cand > 0
    assert frac <= 0.3 + 3 * np.sqrt(0.3 * 0.7 / cand)
    cell = read_gds_file(tmp_path / "v.gds").cells[0]
    assert cell.layer_ids() == [1, 2, 3]
    assert len(cell.layer(2)) == vias
    assert len((tmp_path / "v.jsonl").read_text().splitlines()) == len(cell)


def test_zero_density_empty_via_layer(tmp_path, write_config, capsys):
    d = doc("via_test1")
    d["via"]["via_fraction"] = 0
    code, out, _ = run(capsys, "gen-via", "--config", write_config(d), "--out", tmp_path / "v.gds")
    assert code == 0 and " vias=0 " in out
    assert len(read_gds_file(tmp_path / "v.gds").cells[0].layer(2)) == 0


def test_drc_fresh_and_shrunk_via(tmp_path, write_config, capsys):
    cfg = write_config(doc("via_test4"))
    gds = tmp_path / "v.gds"
    run(capsys, "gen-via", "--config", cfg, "--out", gds)
    code, out, _ = run(capsys, "drc", gds, "--config", cfg)
    assert code == 0 and out.strip().endswith("status=CLEAN")

    cell = read_gds_file(gds).cells[0]
    rects = cell.rects.copy()
    k = int(np.flatnonzero(cell.layers == 2)[0])
    rects[k, 2] -= 1
    write_gds_file(GdsLibrary(cells=[Cell(cell.name, cell.layers, rects)]), tmp_path / "bad.gds")
    code, out, _ = run(capsys, "drc", tmp_path / "bad.gds", "--config", cfg, "--out", tmp_path / "r.txt")
    assert code == 1
    lines = [l for l in (tmp_path / "r.txt").read_text().splitlines() if not l.startswith("#")]
    assert len(lines) == 1 and lines[0].startswith("ViaSize ")
    assert "violations=1" in out


def test_drc_io_errors(tmp_path, write_config, capsys):
    cfg = write_config(doc("metal_test1"))
    gds = tmp_path / "m.gds"
    run(capsys, "gen-metal", "--config", cfg, "--out", gds)
    data = gds.read_bytes()
    (tmp_path / "t.gds").write_bytes(data[: len(data) // 2 + 1])
    code, _, err = run(capsys, "drc", tmp_path / "t.gds", "--config", cfg)
    assert code == 3 and "offset" in err
    code, _, err = run(capsys, "drc", tmp_path / "missing.gds", "--config", cfg)
    assert code == 3 and "missing.gds" in err


def test_bench_rows(tmp_path, capsys):
    out_csv = tmp_path / "bench.csv"
    code, out, _ = run(capsys, "bench", "--out", out_csv, "--repeats", 1)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out_csv.read_text())))
    assert len(rows) == 12
    assert [r["cell"] for r in rows] == [f"metal_test{i}" for i in range(1, 7)] + [f"via_test{i}" for i in range(1, 7)]
    for r in rows:
        assert float(r["area_um2"]) == 100.0
        t = float(r["throughput_um2_per_s"])
        assert 0 < t < float("inf")
        assert t == pytest.approx(float(r["area_um2"]) / float(r["seconds"]), rel=1e-3)


def test_bench_repeat_medians_stable():
    from layoutforge.bench import time_generation
    from conftest import small
    cfg = small("metal_test1", 20_000)
    time_generation(cfg, 1)  # warm-up
    a, b = time_generation(cfg, 5), time_generation(cfg, 5)
    assert max(a, b) <= 2 * min(a, b)


def learning_doc(size_um=12):
    d = json.loads((CONFIG_DIR / "learning_example.json").read_text())
    d["via"]["total_x"] = d["via"]["total_y"] = size_um
    d["train"]["iterations"] = 200
    d["train"]["log_every"] = 50
    d["train"]["losses"] = ["PSL", "PHL"]
    d["train"]["seeds"] = [1, 2, 3]
    d["features"]["ccas"] = {"r_max": 20, "n_c": 3, "d": 2}
    d.pop("output", None)
    return d


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """clips -> features once for the module."""
    root = tmp_path_factory.mktemp("pipe")
    cfg = root / "learn.json"
    cfg.write_text(json.dumps(learning_doc()))
    assert main(["clips", "--config", str(cfg), "--out", str(root / "clips")]) == 0
    assert main(["features", str(root / "clips"), "--config", str(cfg), "--out", str(root / "feat")]) == 0
    return root, cfg


def test_clips_and_features(pipeline):
    root, _ = pipeline
    rows = list(csv.DictReader(open(root / "clips" / "manifest.csv")))
    assert len(rows) == 100
    assert {r["label"] for r in rows} == {"hotspot", "non-hotspot"}
    feat = list(csv.DictReader(open(root / "feat" / "manifest.csv")))
    assert len(feat) == 100
    x, y = load_dataset(root / "feat")
    assert x.shape == (100, 12 * 12 * 32)
    assert 0 < y.sum() < 100
    assert (root / "feat" / "ccas.csv").is_file()


def test_train_outputs(pipeline, capsys):
    root, cfg = pipeline
    code, out, _ = run(capsys, "train", root / "feat", "--config", cfg, "--out", root / "train")
    assert code == 0
    models = json.loads((root / "train" / "models.json").read_text())
    assert set(models) == {"PSL", "PHL"}
    log = (root / "train" / "train_PSL.csv").read_text().splitlines()
    assert log[0] == "iter,loss,auc,lr" and len(log) == 5


def test_eval_table(pipeline, capsys):
    root, cfg = pipeline
    code, out, _ = run(capsys, "eval", root / "feat", "--config", cfg)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "ID,PSL_acc,PSL_fa,PHL_acc,PHL_fa"
    assert [l.split(",")[0] for l in lines[1:]] == ["1", "2", "3", "Ave", "Var"]
    acc = [float(l.split(",")[1]) for l in lines[1:4]]
    assert float(lines[4].split(",")[1]) == pytest.approx(np.mean(acc), abs=0.01)
    assert float(lines[5].split(",")[1]) == pytest.approx(np.var(acc, ddof=1), abs=0.02)
    code2, out2, _ = run(capsys, "eval", root / "feat", "--config", cfg)
    assert out2 == out


def test_eval_single_seed_note(pipeline, capsys):
    root, cfg = pipeline
    code, out, _ = run(capsys, "eval", root / "feat", "--config", cfg, "--seed", 4)
    assert code == 0
    lines = out.strip().splitlines()
    assert [l.split(",")[0] for l in lines[1:3]] == ["4", "Ave"]
    assert lines[-1].startswith("# variance omitted")


def test_dataset_errors(tmp_path, write_config, capsys):
    cfg = write_config(learning_doc())
    code, _, err = run(capsys, "train", tmp_path / "nope", "--config", cfg)
    assert code == 3 and "nope" in err
    (tmp_path / "one.csv").write_text("label,f1\n1,0.5\n1,0.7\n")
    code, _, err = run(capsys, "train", tmp_path / "one.csv", "--config", cfg)
    assert code == 3 and "both" in err
    (tmp_path / "ok.csv").write_text("label,f1,f2\n1,1.0,0.9\n0,-1.0,-0.8\n1,0.8,1.1\n0,-0.9,-1.2\n")
    x, y = load_dataset(tmp_path / "ok.csv")
    assert x.shape == (4, 2) and y.tolist() == [1, 0, 1, 0]
