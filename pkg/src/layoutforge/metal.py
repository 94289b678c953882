"""Unidirectional metal grating generation.

Each track is filled left to right with random wires: a wire length drawn
in ``[min_length, min(max_length, room_left)]``, then a tip-to-tip gap drawn
on the grid ``min_t2t + k * t2t_grid`` up to ``min(max_t2t, room_left)``.
A track stops when a minimum-length wire or a minimum gap no longer fits.

Track ``k`` owns a private stream seeded with ``splitmix64(seed ^ k)``, so
tracks can be filled in any order (or all at once) with identical output.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import Cell, Rect
from .rng import EmptyIntervalError, MASK64, Prng, GOLDEN, mix64_array, mulhi64, splitmix64


class Orientation(str, Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


@dataclass(frozen=True)
class MetalSpec:
    """Design rules for one metal grating. Lengths in nm."""

    wire_cd: int
    track_pitch: int
    min_t2t: int
    max_t2t: int
    min_length: int
    max_length: int
    t2t_grid: int
    total_x: int
    total_y: int
    origin: tuple[int, int] = (0, 0)
    orientation: Orientation = Orientation.HORIZONTAL
    layer_id: int = 1
    seed: int = 0
    name: str = "METAL"

    def __post_init__(self):
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        object.__setattr__(self, "origin", tuple(int(v) for v in self.origin))
        checks = [
            (self.wire_cd > 0, "wire_cd must be positive"),
            (self.track_pitch >= self.wire_cd, "track_pitch must be >= wire_cd"),
            (self.min_t2t >= 0, "min_t2t must be >= 0"),
            (self.min_t2t <= self.max_t2t, "min_t2t must be <= max_t2t"),
            (self.min_length >= 1, "min_length must be >= 1"),
            (self.min_length <= self.max_length, "min_length must be <= max_length"),
            (self.t2t_grid > 0, "t2t_grid must be positive"),
            (self.total_x > 0, "total_x must be positive"),
            (self.total_y > 0, "total_y must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"{self.name}: {msg}")

    @property
    def horizontal(self) -> bool:
        return self.orientation is Orientation.HORIZONTAL

    @property
    def along_extent(self) -> int:
        """Cell size in the wire direction."""
        return self.total_x if self.horizontal else self.total_y

    @property
    def across_extent(self) -> int:
        return self.total_y if self.horizontal else self.total_x

    @property
    def bbox(self) -> Rect:
        x0, y0 = self.origin
        return Rect(x0, y0, x0 + self.total_x, y0 + self.total_y)

    def track_count(self) -> int:
        if self.across_extent < self.wire_cd:
            return 0
        return (self.across_extent - self.wire_cd) // self.track_pitch + 1

    def track_seed(self, k: int) -> int:
        return splitmix64((self.seed & MASK64) ^ k)


@dataclass
class TrackFill:
    track_index: int
    wires: list[tuple[int, int]] = field(default_factory=list)  # (start, length), cell-relative


def draw_wire_track(spec: MetalSpec, prng: Prng, track_index: int = 0) -> TrackFill:
    """Fill one track; positions are relative to the cell origin."""
    xt, l1, l2 = spec.along_extent, spec.min_length, spec.max_length
    t1, t2, tg = spec.min_t2t, spec.max_t2t, spec.t2t_grid
    fill = TrackFill(track_index)
    x = 0
    while xt - x >= l1:
        length = prng.rand_int(l1, min(l2, xt - x))
        fill.wires.append((x, length))
        end = x + length
        try:
            gap = prng.rand_grid(t1, min(t2, xt - end), tg)
        except EmptyIntervalError:
            break
        x = end + gap
    return fill


def _wires_to_rects(spec: MetalSpec, tracks, starts, lengths) -> np.ndarray:
    tracks = np.asarray(tracks, dtype=np.int64)
    starts = np.asarray(starts, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    x0, y0 = spec.origin
    across = tracks * spec.track_pitch
    out = np.empty((len(tracks), 4), dtype=np.int64)
    a_lo, a_hi, c_lo, c_hi = (0, 2, 1, 3) if spec.horizontal else (1, 3, 0, 2)
    along0, across0 = (x0, y0) if spec.horizontal else (y0, x0)
    out[:, a_lo] = along0 + starts
    out[:, a_hi] = along0 + starts + lengths
    out[:, c_lo] = across0 + across
    out[:, c_hi] = across0 + across + spec.wire_cd
    return out


def _serial_wires(spec: MetalSpec, tracks):
    t_out, s_out, l_out = [], [], []
    for k in tracks:
        fill = draw_wire_track(spec, Prng(spec.track_seed(int(k))), int(k))
        for start, length in fill.wires:
            t_out.append(int(k))
            s_out.append(start)
            l_out.append(length)
    return t_out, s_out, l_out


def _lockstep_wires(spec: MetalSpec, tracks):
    """All tracks advance together, one wire per iteration, in numpy.

    Bit-for-bit equal to running :func:`draw_wire_track` on each track.
    """
    tracks = np.asarray(tracks, dtype=np.int64)
    xt, l1, l2 = spec.along_extent, spec.min_length, spec.max_length
    t1, t2, tg = spec.min_t2t, spec.max_t2t, spec.t2t_grid
    seeds = np.uint64(spec.seed & MASK64) ^ tracks.astype(np.uint64)
    state = mix64_array(seeds + np.uint64(GOLDEN))
    golden = np.uint64(GOLDEN)
    idx = np.arange(len(tracks))
    x = np.zeros(len(tracks), dtype=np.int64)
    chunks_t, chunks_s, chunks_l = [], [], []
    while len(idx):
        live = (xt - x) >= l1
        if not live.all():
            idx, x, state = idx[live], x[live], state[live]
            if not len(idx):
                break
        state = state + golden
        span = np.minimum(l2, xt - x) - l1 + 1
        length = l1 + mulhi64(mix64_array(state), span.astype(np.uint64)).astype(np.int64)
        chunks_t.append(idx)
        chunks_s.append(x)
        chunks_l.append(length)
        end = x + length
        gap_hi = np.minimum(t2, xt - end)
        fits = gap_hi >= t1
        if not fits.all():
            idx, end, gap_hi, state = idx[fits], end[fits], gap_hi[fits], state[fits]
        state = state + golden
        kmax = (gap_hi - t1) // tg
        k = mulhi64(mix64_array(state), (kmax + 1).astype(np.uint64)).astype(np.int64)
        x = end + t1 + k * tg
    if not chunks_t:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64)
    t = np.concatenate(chunks_t)
    s = np.concatenate(chunks_s)
    ln = np.concatenate(chunks_l)
    # iteration-major -> track-major; stable sort keeps per-track x order
    order = np.argsort(t, kind="stable")
    return tracks[t[order]], s[order], ln[order]


def _lockstep_chunk(args):
    spec, tracks = args
    return _lockstep_wires(spec, tracks)


def draw_wire_cell(spec: MetalSpec, engine: str = "lockstep", workers: int = 1) -> Cell:
    """Generate a full grating cell.

    ``engine="serial"`` fills tracks one at a time with :func:`draw_wire_track`;
    ``engine="lockstep"`` fills all tracks together in numpy. ``workers > 1``
    splits the tracks over processes. All combinations give identical cells.
    """
    n = spec.track_count()
    tracks = np.arange(n, dtype=np.int64)
    if engine == "serial":
        t, s, ln = _serial_wires(spec, tracks)
    elif engine == "lockstep":
        if workers > 1 and n > 1:
            parts = np.array_split(tracks, workers)
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_lockstep_chunk, [(spec, p) for p in parts if len(p)]))
            t = np.concatenate([r[0] for r in results])
            s = np.concatenate([r[1] for r in results])
            ln = np.concatenate([r[2] for r in results])
        else:
            t, s, ln = _lockstep_wires(spec, tracks)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    rects = _wires_to_rects(spec, t, s, ln)
    layers = np.full(len(rects), spec.layer_id, dtype=np.int16)
    return Cell(spec.name, layers, rects, spec.bbox)
