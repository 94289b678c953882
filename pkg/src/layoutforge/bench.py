"""Generation throughput in um^2 of cell per second, single-threaded."""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO

from .config import RunConfig, load_config
from .metal import draw_wire_cell
from .via import generate_via_cell

CI_SIZE_NM = 10_000


@dataclass(frozen=True)
class BenchResult:
    cell: str
    area_um2: float
    seconds: float

    @property
    def throughput(self) -> float:
        return self.area_um2 / self.seconds


def time_generation(cfg: RunConfig, repeats: int = 3) -> float:
    """Median wall time of generating the config's cell; metal takes precedence over via."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if cfg.metal is not None:
        spec = cfg.metal_spec()
        run = lambda: draw_wire_cell(spec, workers=1)
    else:
        spec = cfg.via_spec()
        run = lambda: generate_via_cell(spec, workers=1)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        run()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bench_configs(paths: Iterable[Path], full: bool = False, repeats: int = 3) -> list[BenchResult]:
    out = []
    for path in paths:
        cfg = load_config(path)
        if not full:
            cfg = cfg.with_size(CI_SIZE_NM, CI_SIZE_NM)
        out.append(BenchResult(Path(path).stem, cfg.area_um2, time_generation(cfg, repeats)))
    return out


def bench_dir(config_dir, full: bool = False, repeats: int = 3) -> list[BenchResult]:
    """Every metal_*.json and via_*.json in ``config_dir``, metal first."""
    d = Path(config_dir)
    paths = sorted(d.glob("metal_*.json")) + sorted(d.glob("via_*.json"))
    if not paths:
        raise FileNotFoundError(f"{d}: no metal_*.json or via_*.json configs")
    return bench_configs(paths, full, repeats)


def write_csv(results: Iterable[BenchResult], out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["cell", "area_um2", "seconds", "throughput_um2_per_s"])
    for r in results:
        w.writerow([r.cell, f"{r.area_um2:g}", f"{r.seconds:.6f}", f"{r.throughput:.1f}"])
