"""``layoutforge`` command line.

Exit status: 0 clean / success, 1 rule violations, 2 usage or config
error, 3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bench import bench_dir, write_csv
from .config import ConfigError, RunConfig, load_config, shipped_config_dir
from .drc import DrcReport, check_metal, check_via
from .features import (HOTSPOT, NON_HOTSPOT, ccas_sample, feature_tensor, rasterize_clip, read_tensor,
                       select_circles, write_tensor)
from .gdsii import GdsLibrary, GdsParseError, read_gds_file, read_jsonl, write_gds_file, write_jsonl
from .geometry import Cell, Rect
from .learning import (ScoredDataset, TrainLog, evaluate, mean_variance, model_auc,
                       train_pairwise)
from .metal import draw_wire_cell
from .rng import Prng
from .via import generate_via_cell

EXIT_OK, EXIT_DIRTY, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class DatasetError(ValueError):
    """Training input missing or malformed."""


def _load(args) -> RunConfig:
    if not args.config:
        raise ConfigError("", "--config is required")
    return load_config(args.config).with_seed(args.seed)


def _out_path(args, cfg: RunConfig, default: str) -> Path:
    return Path(args.out or cfg.output.get("path") or default)


def _cell_name(cfg: RunConfig, default: str) -> str:
    return cfg.output.get("cell", default)


def _print_report(report: DrcReport, full: bool) -> None:
    text = report.to_text()
    if not full:
        text = text.splitlines()[-1] + "\n"
    sys.stdout.write(text)


def _generate(cfg: RunConfig) -> tuple[Cell, DrcReport, Optional[str]]:
    """The config's cell plus its own rule check; via configs win over metal."""
    if cfg.via is not None:
        v = cfg.via_spec()
        res = generate_via_cell(v)
        report = check_metal(res.m1, v.m1) + check_metal(res.m2, v.m2) + check_via(res.m1, res.m2, res.via, v)
        s = res.stats
        stats = (f"# candidates={s.candidates} after_density={s.after_density} vias={s.after_pitch} "
                 f"realized_fraction={s.realized_density:.6f} target={v.density:g}")
        return res.combined(_cell_name(cfg, v.name)), report, stats
    spec = cfg.metal_spec()
    cell = draw_wire_cell(spec)
    return cell.renamed(_cell_name(cfg, spec.name)), check_metal(cell, spec), None


def _write_outputs(cell: Cell, path: Path, jsonl: Optional[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    write_gds_file(GdsLibrary(cells=[cell]), path)
    if jsonl:
        with open(jsonl, "w") as f:
            write_jsonl(cell, f)


def cmd_gen_metal(args) -> int:
    cfg = _load(args)
    if cfg.metal is None:
        raise ConfigError("metal", "missing")
    cfg = RunConfig(seed=cfg.seed, metal=cfg.metal, output=cfg.output)
    cell, report, _ = _generate(cfg)
    path = _out_path(args, cfg, f"{cell.name.lower()}.gds")
    _write_outputs(cell, path, args.jsonl)
    print(f"# wrote {path} shapes={len(cell)}")
    _print_report(report, full=not report.clean)
    return EXIT_OK if report.clean else EXIT_DIRTY


def cmd_gen_via(args) -> int:
    cfg = _load(args)
    if cfg.via is None:
        raise ConfigError("via", "missing")
    cell, report, stats = _generate(cfg)
    path = _out_path(args, cfg, f"{cell.name.lower()}.gds")
    _write_outputs(cell, path, args.jsonl)
    print(f"# wrote {path} shapes={len(cell)}")
    print(stats)
    _print_report(report, full=not report.clean)
    return EXIT_OK if report.clean else EXIT_DIRTY


def _read_cell(path: Path, name: Optional[str]) -> Cell:
    lib = read_gds_file(path)
    if not lib.cells:
        raise GdsParseError("library holds no structures", 0)
    return lib.cell(name) if name else lib.cells[0]


def cmd_drc(args) -> int:
    cfg = _load(args)
    if not args.input:
        raise ConfigError("", "drc needs a GDS input path")
    cell = _read_cell(Path(args.input), cfg.output.get("cell"))
    report = DrcReport()
    if cfg.via is not None:
        v = cfg.via_spec()
        report = check_metal(cell, v.m1) + check_metal(cell, v.m2) + check_via(cell, cell, cell, v)
    elif cfg.metal is not None:
        report = check_metal(cell, cfg.metal_spec())
    else:
        raise ConfigError("", "config has neither a metal nor a via section")
    if args.out:
        Path(args.out).write_text(report.to_text())
        _print_report(report, full=False)
    else:
        _print_report(report, full=True)
    return EXIT_OK if report.clean else EXIT_DIRTY


# -- clips and learning --------------------------------------------------------

def _windows(bbox: Rect, wx: int, wy: int):
    for y in range(bbox.y_ll, bbox.y_ur - wy + 1, wy):
        for x in range(bbox.x_ll, bbox.x_ur - wx + 1, wx):
            yield Rect(x, y, x + wx, y + wy)


def _clip_cell(cell: Cell, window: Rect, name: str) -> Cell:
    r = cell.rects
    keep = (r[:, 0] < window.x_ur) & (r[:, 2] > window.x_ll) & (r[:, 1] < window.y_ur) & (r[:, 3] > window.y_ll)
    rects = r[keep].copy()
    rects[:, [0, 2]] = np.clip(r[keep][:, [0, 2]], window.x_ll, window.x_ur)
    rects[:, [1, 3]] = np.clip(r[keep][:, [1, 3]], window.y_ll, window.y_ur)
    return Cell(name, cell.layers[keep], rects, window)


def _proxy_labels(counts: np.ndarray) -> list[str]:
    """Clips with more label-layer shapes than the median are called hotspots."""
    med = np.median(counts)
    return [HOTSPOT if c > med else NON_HOTSPOT for c in counts]


def cmd_clips(args) -> int:
    cfg = _load(args)
    fs = cfg.features
    if args.input:
        cell = _read_cell(Path(args.input), cfg.output.get("cell"))
    else:
        cell, _, _ = _generate(cfg)
    out = Path(args.out or cfg.output.get("path") or "clips")
    out.mkdir(parents=True, exist_ok=True)
    windows = list(_windows(cell.bbox, fs.clip_x, fs.clip_y))
    if not windows:
        raise ConfigError("features.clip_x", "clip larger than the cell")
    label_layer = fs.label_layer
    if label_layer is None:
        label_layer = cfg.via_spec().via_layer_id if cfg.via is not None else int(cell.layers[0])
    clips = [_clip_cell(cell, w, f"CLIP_{k:05d}") for k, w in enumerate(windows)]
    counts = np.array([int((c.layers == label_layer).sum()) for c in clips])
    labels = _proxy_labels(counts)
    with open(out / "manifest.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["clip_id", "window", "label"])
        for k, (clip, win, label) in enumerate(zip(clips, windows, labels)):
            cid = f"clip_{k:05d}"
            with open(out / f"{cid}.jsonl", "w") as g:
                write_jsonl(clip, g)
            w.writerow([cid, " ".join(map(str, win.as_tuple())), label])
    n_hot = labels.count(HOTSPOT)
    print(f"# wrote {len(clips)} clips to {out} hotspots={n_hot} non_hotspots={len(clips) - n_hot}")
    return EXIT_OK


def _read_manifest(path: Path) -> list[dict]:
    if not path.is_file():
        raise FileNotFoundError(f"{path}: manifest not found")
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def cmd_features(args) -> int:
    cfg = _load(args)
    fs = cfg.features
    if not args.input:
        raise ConfigError("", "features needs a clip directory")
    src = Path(args.input)
    rows = _read_manifest(src / "manifest.csv")
    out = Path(args.out or "features")
    out.mkdir(parents=True, exist_ok=True)
    samples, labels = [], []
    with open(out / "manifest.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["clip_id", "label", "tensor"])
        for row in rows:
            window = Rect(*map(int, row["window"].split()))
            with open(src / f"{row['clip_id']}.jsonl") as g:
                cell = read_jsonl(g, name=row["clip_id"].upper(), bbox=window)
            clip = rasterize_clip(cell, window, fs.pixel_size, fs.layers, row["label"])
            tensor = feature_tensor(clip, fs.blocks_per_side, fs.keep)
            name = f"{row['clip_id']}.bin"
            with open(out / name, "wb") as g:
                write_tensor(tensor, g)
            w.writerow([row["clip_id"], row["label"], name])
            if fs.ccas is not None:
                samples.append(ccas_sample(clip, fs.ccas.r_max))
                labels.append(1 if row["label"] == HOTSPOT else 0)
    print(f"# wrote {len(rows)} tensors of shape {fs.blocks_per_side}x{fs.blocks_per_side}x{fs.keep} to {out}")
    if fs.ccas is not None and rows:
        samples = np.array(samples)
        with open(out / "ccas.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["clip_id", "label"] + [f"C{i}" for i in range(1, fs.ccas.r_max + 1)])
            for row, s in zip(rows, samples):
                w.writerow([row["clip_id"], row["label"]] + [f"{v:.6f}" for v in s])
        picked = select_circles(samples, labels, fs.ccas)
        print(f"# selected circles {picked}")
    return EXIT_OK


def load_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    """(features, labels in {0, 1}) from a features directory or a ``label,feature...`` CSV."""
    p = Path(path)
    if p.is_dir():
        rows = _read_manifest(p / "manifest.csv")
        x = []
        for row in rows:
            with open(p / row["tensor"], "rb") as f:
                x.append(read_tensor(f).ravel())
        y = [1 if row["label"] == HOTSPOT else 0 for row in rows]
    elif p.is_file():
        x, y = [], []
        with open(p, newline="") as f:
            for k, rec in enumerate(csv.reader(f)):
                if not rec:
                    continue
                try:
                    vals = [float(v) for v in rec[1:]]
                except ValueError:
                    if k == 0:
                        continue  # header
                    raise DatasetError(f"{p}: line {k + 1} is not numeric") from None
                lab = rec[0].strip()
                y.append(1 if lab in ("1", "+1", HOTSPOT) else 0)
                x.append(vals)
    else:
        raise FileNotFoundError(f"{p}: no such file or directory")
    if not x:
        raise DatasetError(f"{p}: dataset is empty")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if y.min() == y.max():
        raise DatasetError(f"{p}: dataset needs both hotspot and non-hotspot samples")
    return x, y


def standardizer(x_train: np.ndarray):
    """Map features to zero mean, unit variance, then shrink by sqrt(dim).

    With the shrink a pair difference has squared norm around 2, so a
    single SGD step at the default rate cannot overshoot.
    """
    mu = x_train.mean(axis=0)
    sd = x_train.std(axis=0)
    sd[sd == 0] = 1.0
    scale = sd * np.sqrt(x_train.shape[1])
    return lambda x: (x - mu) / scale


def _dataset(args) -> tuple[np.ndarray, np.ndarray]:
    if not args.input:
        raise ConfigError("", "a dataset path is required")
    return load_dataset(args.input)


def cmd_train(args) -> int:
    cfg = _load(args)
    x, y = _dataset(args)
    ts = cfg.train
    data = ScoredDataset.from_labels(standardizer(x)(x), y)
    out = Path(args.out or "train")
    out.mkdir(parents=True, exist_ok=True)
    models = {}
    tc = replace(ts.config, seed=cfg.seed)
    for kind in ts.losses:
        log = TrainLog()
        model = train_pairwise(data, ts.loss(kind), tc, log=log)
        (out / f"train_{kind.value}.csv").write_text(log.to_csv())
        auc = model_auc(model, data)
        models[kind.value] = {"weights": model.weights.tolist(), "bias": model.bias, "train_auc": auc}
        print(f"{kind.value} train_auc={auc:.6f}")
    (out / "models.json").write_text(json.dumps(models) + "\n")
    return EXIT_OK


def _split(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(Prng(seed).next_block(n), kind="stable")
    n_test = max(1, int(round(n * fraction)))
    return order[n_test:], order[:n_test]


def eval_run(x: np.ndarray, y: np.ndarray, ts, kind, seed: int) -> tuple[float, float]:
    """Train on a seeded split and score hotspot accuracy / false alarm on the held-out part.

    The decision threshold is the midpoint of the mean training scores of
    the two classes.
    """
    tr, te = _split(len(y), ts.test_fraction, seed)
    if y[tr].min() == y[tr].max() or y[te].min() == y[te].max():
        raise DatasetError(f"seed {seed}: split leaves a class empty; add samples or change test_fraction")
    scale = standardizer(x[tr])
    data = ScoredDataset.from_labels(scale(x[tr]), y[tr])
    model = train_pairwise(data, ts.loss(kind), replace(ts.config, seed=seed))
    thr = 0.5 * (model.score(data.positives).mean() + model.score(data.negatives).mean())
    return evaluate(model.score(scale(x[te])) > thr, y[te])


def cmd_eval(args) -> int:
    cfg = _load(args)
    x, y = _dataset(args)
    ts = cfg.train
    seeds = [args.seed] if args.seed is not None else list(ts.seeds)
    runs = {k: [eval_run(x, y, ts, k, s) for s in seeds] for k in ts.losses}
    head = ["ID"] + [f"{k.value}_{m}" for k in ts.losses for m in ("acc", "fa")]
    lines = [head]
    for i, s in enumerate(seeds):
        lines.append([str(s)] + [f"{100 * v:.2f}" for k in ts.losses for v in runs[k][i]])
    note = None
    if len(seeds) >= 2:
        for label, pick in (("Ave", 0), ("Var", 1)):
            row = [label]
            for k in ts.losses:
                for m in (0, 1):
                    stats = mean_variance([100 * r[m] for r in runs[k]])
                    row.append(f"{stats[pick]:.2f}")
            lines.append(row)
    else:
        lines.append(["Ave"] + [f"{100 * v:.2f}" for k in ts.losses for v in runs[k][0]])
        note = "# variance omitted: needs at least two seeds"
    text = "\n".join(",".join(r) for r in lines) + "\n" + (note + "\n" if note else "")
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    config_dir = Path(args.input) if args.input else shipped_config_dir()
    results = bench_dir(config_dir, full=args.full, repeats=args.repeats)
    if args.out:
        with open(args.out, "w", newline="") as f:
            write_csv(results, f)
    write_csv(results, sys.stdout)
    return EXIT_OK


COMMANDS = {
    "gen-metal": cmd_gen_metal, "gen-via": cmd_gen_via, "drc": cmd_drc, "clips": cmd_clips,
    "features": cmd_features, "train": cmd_train, "eval": cmd_eval, "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="layoutforge", description="Rule-driven metal/via layout synthesis and checks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=list(COMMANDS))
    p.add_argument("input", nargs="?", help="GDS file (drc, clips), clip directory (features), "
                                            "dataset (train, eval) or config directory (bench)")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--full", action="store_true", help="bench at full 100x100 um cell size")
    p.add_argument("--repeats", type=int, default=3, help="bench repetitions (median reported)")
    p.add_argument("--jsonl", help="also dump generated geometry as JSON lines")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be >= 0", file=sys.stderr)
        return EXIT_CONFIG
    if args.repeats < 1:
        print("error: --repeats must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, GdsParseError, DatasetError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
