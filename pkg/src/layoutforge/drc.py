"""Geometry-only design rule checker for metal gratings and via layers.

Nothing here calls into the generators: rules are re-derived from the shapes
and the rule sets alone, so a clean report is an independent confirmation.
All limits are inclusive (measured == limit is legal).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from enum import Enum
from typing import TextIO

import numpy as np

from .geometry import Cell, Rect
from .metal import MetalSpec
from .via import ViaSpec


class Kind(str, Enum):
    WidthCD = "WidthCD"
    OffTrack = "OffTrack"
    T2TBelowMin = "T2TBelowMin"
    T2TAboveMax = "T2TAboveMax"
    T2TOffGrid = "T2TOffGrid"
    LengthBelowMin = "LengthBelowMin"
    LengthAboveMax = "LengthAboveMax"
    OutOfBounds = "OutOfBounds"
    SameTrackOverlap = "SameTrackOverlap"
    ViaSize = "ViaSize"
    ViaEnclosureX = "ViaEnclosureX"
    ViaEnclosureY = "ViaEnclosureY"
    ViaPitchX = "ViaPitchX"
    ViaPitchY = "ViaPitchY"
    ViaUncovered = "ViaUncovered"


@dataclass(frozen=True)
class Violation:
    kind: Kind
    location: Rect
    measured: int
    limit: int

    def line(self) -> str:
        r = self.location
        return f"{self.kind.value} {r.x_ll} {r.y_ll} {r.x_ur} {r.y_ur} {self.measured} {self.limit}"


@dataclass
class DrcReport:
    violations: list[Violation] = field(default_factory=list)
    shapes_checked: int = 0

    @property
    def clean(self) -> bool:
        return not self.violations

    def kinds(self) -> set[Kind]:
        return {v.kind for v in self.violations}

    def count(self, kind: Kind) -> int:
        return sum(v.kind is kind for v in self.violations)

    def __add__(self, other: "DrcReport") -> "DrcReport":
        return DrcReport(self.violations + other.violations, self.shapes_checked + other.shapes_checked)

    def write(self, out: TextIO) -> None:
        for v in self.violations:
            out.write(v.line() + "\n")
        status = "CLEAN" if self.clean else "DIRTY"
        out.write(f"# shapes_checked={self.shapes_checked} violations={len(self.violations)} status={status}\n")

    def to_text(self) -> str:
        buf = io.StringIO()
        self.write(buf)
        return buf.getvalue()


def parse_report(text: str) -> DrcReport:
    report = DrcReport()
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                key, _, val = tok.partition("=")
                if key == "shapes_checked":
                    report.shapes_checked = int(val)
            continue
        kind, *nums = line.split()
        x0, y0, x1, y1, measured, limit = map(int, nums)
        report.violations.append(Violation(Kind(kind), Rect(x0, y0, x1, y1), measured, limit))
    return report


def _rect(row) -> Rect:
    return Rect(int(row[0]), int(row[1]), int(row[2]), int(row[3]))


def _emit(out: list, kind: Kind, rects: np.ndarray, measured: np.ndarray, limit) -> None:
    limit = np.broadcast_to(np.asarray(limit, dtype=np.int64), (len(rects),))
    for r, m, lim in zip(rects, measured, limit):
        out.append(Violation(kind, _rect(r), int(m), int(lim)))


def check_metal(cell: Cell, spec: MetalSpec) -> DrcReport:
    """Check every shape on ``spec.layer_id`` against the grating rules."""
    rects = cell.layer(spec.layer_id)
    report = DrcReport(shapes_checked=len(rects))
    if not len(rects):
        return report
    v = report.violations
    horizontal = spec.horizontal
    # work in (along, across) coordinates
    a_lo, c_lo, a_hi, c_hi = (0, 1, 2, 3) if horizontal else (1, 0, 3, 2)
    along0, across0 = spec.origin if horizontal else spec.origin[::-1]
    lo, hi = rects[:, a_lo], rects[:, a_hi]
    clo, chi = rects[:, c_lo], rects[:, c_hi]
    width = chi - clo
    length = hi - lo

    bad = width != spec.wire_cd
    _emit(v, Kind.WidthCD, rects[bad], width[bad], spec.wire_cd)

    offset = (clo - across0) % spec.track_pitch
    bad = offset != 0
    _emit(v, Kind.OffTrack, rects[bad], offset[bad], 0)

    bad = length < spec.min_length
    _emit(v, Kind.LengthBelowMin, rects[bad], length[bad], spec.min_length)
    bad = length > spec.max_length
    _emit(v, Kind.LengthAboveMax, rects[bad], length[bad], spec.max_length)

    box = spec.bbox
    escape = np.maximum.reduce([
        box.x_ll - rects[:, 0], box.y_ll - rects[:, 1],
        rects[:, 2] - box.x_ur, rects[:, 3] - box.y_ur,
    ])
    bad = escape > 0
    _emit(v, Kind.OutOfBounds, rects[bad], escape[bad], 0)

    # neighbours along a track: group by the across lower edge
    order = np.lexsort((hi, lo, clo))
    r = rects[order]
    clo_s, lo_s, hi_s = clo[order], lo[order], hi[order]
    same = clo_s[1:] == clo_s[:-1]
    if same.any():
        # running max of line-end within each group catches nested shapes too
        gid = np.cumsum(np.r_[True, ~same]) - 1
        base = int(lo_s.min())
        stride = int(hi_s.max()) - base + 1
        reach = np.maximum.accumulate(gid * stride + (hi_s - base))
        # furthest line-end of everything before k+1 on the same track
        reach = reach[:-1] - gid[:-1] * stride + base
        gap = lo_s[1:] - reach
        pair = np.flatnonzero(same)
        g = gap[pair]
        prev, nxt = r[pair], r[pair + 1]
        box_pairs = np.stack([
            np.minimum(prev[:, 0], nxt[:, 0]), np.minimum(prev[:, 1], nxt[:, 1]),
            np.maximum(prev[:, 2], nxt[:, 2]), np.maximum(prev[:, 3], nxt[:, 3]),
        ], axis=1)
        overlap = g < 0
        _emit(v, Kind.SameTrackOverlap, box_pairs[overlap], -g[overlap], 0)
        below = (g >= 0) & (g < spec.min_t2t)
        _emit(v, Kind.T2TBelowMin, box_pairs[below], g[below], spec.min_t2t)
        above = g > spec.max_t2t
        _emit(v, Kind.T2TAboveMax, box_pairs[above], g[above], spec.max_t2t)
        off = (g >= spec.min_t2t) & ((g - spec.min_t2t) % spec.t2t_grid != 0)
        _emit(v, Kind.T2TOffGrid, box_pairs[off], g[off], spec.t2t_grid)
    return report


def _covering(metal: np.ndarray, vias: np.ndarray, horizontal: bool):
    """For each via, the metal shape that fully covers it (index or -1).

    Among several covering shapes the one reaching furthest past the via
    is taken. Metal shapes are banded by their across extent.
    """
    n = len(vias)
    found = np.full(n, -1, dtype=np.int64)
    if not len(metal) or not n:
        return found
    a_lo, c_lo, a_hi, c_hi = (0, 1, 2, 3) if horizontal else (1, 0, 3, 2)
    bands, band_of = np.unique(metal[:, [c_lo, c_hi]], axis=0, return_inverse=True)
    band_of = band_of.ravel()
    for b, (blo, bhi) in enumerate(bands):
        inside = np.flatnonzero((vias[:, c_lo] >= blo) & (vias[:, c_hi] <= bhi) & (found < 0))
        if not len(inside):
            continue
        members = np.flatnonzero(band_of == b)
        members = members[np.argsort(metal[members, a_lo], kind="stable")]
        starts = metal[members, a_lo]
        ends = metal[members, a_hi]
        best = np.maximum.accumulate(ends)
        arg = np.zeros(len(ends), dtype=np.int64)
        running = np.r_[True, ends[1:] > best[:-1]]
        arg[running] = np.flatnonzero(running)
        arg = np.maximum.accumulate(arg)
        pos = np.searchsorted(starts, vias[inside, a_lo], side="right") - 1
        ok = pos >= 0
        pos_ok = pos[ok]
        hit = best[pos_ok] >= vias[inside[ok], a_hi]
        found[inside[ok][hit]] = members[arg[pos_ok[hit]]]
    return found


def _pitch(out: list, kind: Kind, vias: np.ndarray, horizontal: bool, limit: int) -> None:
    if limit <= 0 or len(vias) < 2:
        return
    # centres doubled so they stay integer
    cx2 = vias[:, 0] + vias[:, 2]
    cy2 = vias[:, 1] + vias[:, 3]
    row, pos = (cy2, cx2) if horizontal else (cx2, cy2)
    order = np.lexsort((pos, row))
    row, pos, r = row[order], pos[order], vias[order]
    same = row[1:] == row[:-1]
    d2 = pos[1:] - pos[:-1]
    bad = np.flatnonzero(same & (d2 < 2 * limit))
    for k in bad:
        a, b = r[k], r[k + 1]
        loc = Rect(int(min(a[0], b[0])), int(min(a[1], b[1])), int(max(a[2], b[2])), int(max(a[3], b[3])))
        out.append(Violation(kind, loc, int(d2[k] // 2), limit))


def check_via(m1: Cell, m2: Cell, via: Cell, spec: ViaSpec) -> DrcReport:
    """Via size, coverage by both metals, line-end enclosure and pitch."""
    vias = via.layer(spec.via_layer_id)
    report = DrcReport(shapes_checked=len(vias))
    if not len(vias):
        return report
    v = report.violations
    w = vias[:, 2] - vias[:, 0]
    h = vias[:, 3] - vias[:, 1]
    bad = (w != spec.via_x) | (h != spec.via_y)
    for r, ww, hh in zip(vias[bad], w[bad], h[bad]):
        if ww != spec.via_x:
            v.append(Violation(Kind.ViaSize, _rect(r), int(ww), spec.via_x))
        else:
            v.append(Violation(Kind.ViaSize, _rect(r), int(hh), spec.via_y))

    m1r = m1.layer(spec.m1.layer_id)
    m2r = m2.layer(spec.m2.layer_id)
    c1 = _covering(m1r, vias, horizontal=True)
    c2 = _covering(m2r, vias, horizontal=False)
    uncovered = (c1 < 0) | (c2 < 0)
    _emit(v, Kind.ViaUncovered, vias[uncovered], np.zeros(uncovered.sum(), np.int64), 0)

    ok = c1 >= 0
    wires = m1r[c1[ok]]
    margin = np.minimum(vias[ok, 0] - wires[:, 0], wires[:, 2] - vias[ok, 2])
    bad = margin < spec.enclosure_x
    _emit(v, Kind.ViaEnclosureX, vias[ok][bad], margin[bad], spec.enclosure_x)

    ok = c2 >= 0
    wires = m2r[c2[ok]]
    margin = np.minimum(vias[ok, 1] - wires[:, 1], wires[:, 3] - vias[ok, 3])
    bad = margin < spec.enclosure_y
    _emit(v, Kind.ViaEnclosureY, vias[ok][bad], margin[bad], spec.enclosure_y)

    _pitch(v, Kind.ViaPitchX, vias, True, spec.via_pitch_x)
    _pitch(v, Kind.ViaPitchY, vias, False, spec.via_pitch_y)
    return report


def _sites(metal: np.ndarray, cross_pos: np.ndarray, cross_cd: int, via_len: int, enc: int, horizontal: bool):
    """Enumerate (row, column) crossing keys a metal wire can host a via at.

    ``cross_pos`` are lower edges of the orthogonal tracks; a wire hosts a
    via on a crossing when the via window plus ``enc`` on both sides lies
    inside the wire.
    """
    a_lo, c_lo, a_hi = (0, 1, 2) if horizontal else (1, 0, 3)
    if not len(metal) or not len(cross_pos):
        return np.zeros((0, 2), dtype=np.int64)
    off = (cross_cd - via_len) // 2
    win_lo = cross_pos + off
    first = np.searchsorted(win_lo, metal[:, a_lo] + enc, side="left")
    last = np.searchsorted(win_lo, metal[:, a_hi] - enc - via_len, side="right")
    counts = np.maximum(last - first, 0)
    wire = np.repeat(np.arange(len(metal)), counts)
    step = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    cols = cross_pos[np.repeat(first, counts) + step]
    return np.stack([metal[wire, c_lo], cols], axis=1)


@dataclass(frozen=True)
class DensityStats:
    candidates: int
    placed: int

    @property
    def realized_fraction(self) -> float:
        return self.placed / self.candidates if self.candidates else 0.0


def via_density_stats(m1: Cell, m2: Cell, via: Cell, spec: ViaSpec) -> DensityStats:
    """Recount legal via sites from the metal geometry and compare with the vias placed.

    Candidate sites are enumerated wire by wire on each metal and then
    intersected, a different route from the generator's crossing matrix.
    """
    m1r = m1.layer(spec.m1.layer_id)
    m2r = m2.layer(spec.m2.layer_id)
    vias = via.layer(spec.via_layer_id)
    rows = np.unique(m1r[:, 1]) if len(m1r) else np.zeros(0, np.int64)
    cols = np.unique(m2r[:, 0]) if len(m2r) else np.zeros(0, np.int64)
    cd1 = int(m1r[0, 3] - m1r[0, 1]) if len(m1r) else spec.via_y
    cd2 = int(m2r[0, 2] - m2r[0, 0]) if len(m2r) else spec.via_x
    # M1 sites keyed (row_y, col_x); M2 sites keyed (col_x, row_y) then swapped
    s1 = _sites(m1r, cols, cd2, spec.via_x, spec.enclosure_x, horizontal=True)
    s2 = _sites(m2r, rows, cd1, spec.via_y, spec.enclosure_y, horizontal=False)[:, ::-1]
    scale = 1 << 32
    k1 = np.unique(s1[:, 0] * scale + s1[:, 1])
    k2 = np.unique(s2[:, 0] * scale + s2[:, 1])
    cand = np.intersect1d(k1, k2, assume_unique=True)
    vy = vias[:, 1] - (cd1 - spec.via_y) // 2
    vx = vias[:, 0] - (cd2 - spec.via_x) // 2
    placed = np.isin(np.unique(vy * scale + vx), cand).sum()
    return DensityStats(len(cand), int(placed))
