"""Via layer generation on top of two orthogonal metal gratings.

Pipeline: draw a horizontal M1 grating and a vertical M2 grating whose
pitches equal the via pitches, mark every track crossing where both
metals enclose a via (after pulling line-ends in by the enclosure, the
"assist" wires), thin the candidates by the via fraction, then break up
adjacent pairs in scan order so no two vias sit on neighbouring crossings.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .geometry import Cell, Rect, merge_cells
from .metal import MetalSpec, Orientation, draw_wire_cell
from .rng import Prng, derive_seed


@dataclass(frozen=True)
class ViaSpec:
    """Via rules plus the two metal gratings they sit on. Lengths in nm.

    A via pitch of 0 disables the matching pitch rule; the metal pitch is
    then free instead of being tied to the via pitch.
    """

    via_x: int
    via_y: int
    density: float
    enclosure_x: int
    enclosure_y: int
    via_pitch_x: int
    via_pitch_y: int
    m1: MetalSpec
    m2: MetalSpec
    via_layer_id: int = 2
    seed: int = 0
    name: str = "VIA"

    def __post_init__(self):
        errors = []
        if self.via_x <= 0 or self.via_y <= 0:
            errors.append("via size must be positive")
        if not 0.0 <= self.density <= 1.0:
            errors.append(f"density {self.density} outside [0, 1]")
        if self.enclosure_x < 0 or self.enclosure_y < 0:
            errors.append("enclosure must be >= 0")
        if self.via_pitch_x < 0 or self.via_pitch_y < 0:
            errors.append("via pitch must be >= 0")
        if not self.m1.horizontal:
            errors.append("m1 must be horizontal")
        if self.m2.horizontal:
            errors.append("m2 must be vertical")
        if self.m1.wire_cd != self.via_y:
            errors.append(f"m1 wire_cd {self.m1.wire_cd} != via_y {self.via_y}")
        if self.m2.wire_cd != self.via_x:
            errors.append(f"m2 wire_cd {self.m2.wire_cd} != via_x {self.via_x}")
        if self.via_pitch_y and self.m1.track_pitch != self.via_pitch_y:
            errors.append(f"m1 track_pitch {self.m1.track_pitch} != via pitch y {self.via_pitch_y}")
        if self.via_pitch_x and self.m2.track_pitch != self.via_pitch_x:
            errors.append(f"m2 track_pitch {self.m2.track_pitch} != via pitch x {self.via_pitch_x}")
        if (self.m1.total_x, self.m1.total_y, self.m1.origin) != (self.m2.total_x, self.m2.total_y, self.m2.origin):
            errors.append("m1 and m2 must cover the same cell area")
        if self.via_layer_id in (self.m1.layer_id, self.m2.layer_id) or self.m1.layer_id == self.m2.layer_id:
            errors.append("m1, m2 and via layers must be distinct")
        if errors:
            raise ValueError(f"{self.name}: " + "; ".join(errors))

    @property
    def bbox(self) -> Rect:
        return self.m1.bbox


@dataclass(frozen=True)
class ViaCandidateMatrix:
    """0/1 matrix over track crossings: rows are M1 tracks, columns M2 tracks.

    ``overlap`` keeps the raw metal-overlap matrix (before enclosure
    filtering) when the matrix came from :func:`build_candidate_matrix`.
    """

    entries: np.ndarray
    row_y: np.ndarray  # lower edge of each M1 track
    col_x: np.ndarray  # left edge of each M2 track
    via_x: int
    via_y: int
    row_cd: int
    col_cd: int
    overlap: Optional[np.ndarray] = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def count(self) -> int:
        return int(self.entries.sum())

    def with_entries(self, entries: np.ndarray) -> "ViaCandidateMatrix":
        return replace(self, entries=np.asarray(entries, dtype=bool))

    def site(self, i: int, j: int) -> Rect:
        """Via rectangle centred on crossing (i, j)."""
        x = int(self.col_x[j]) + (self.col_cd - self.via_x) // 2
        y = int(self.row_y[i]) + (self.row_cd - self.via_y) // 2
        return Rect(x, y, x + self.via_x, y + self.via_y)

    def site_rects(self) -> np.ndarray:
        ii, jj = np.nonzero(self.entries)
        x = self.col_x[jj] + (self.col_cd - self.via_x) // 2
        y = self.row_y[ii] + (self.row_cd - self.via_y) // 2
        return np.stack([x, y, x + self.via_x, y + self.via_y], axis=1).astype(np.int64)


@dataclass(frozen=True)
class ViaStats:
    candidates: int
    after_density: int
    after_pitch: int

    @property
    def realized_density(self) -> float:
        return self.after_pitch / self.candidates if self.candidates else 0.0


@dataclass(frozen=True)
class ViaResult:
    m1: Cell
    m2: Cell
    via: Cell
    stats: ViaStats
    matrix: ViaCandidateMatrix

    def combined(self, name: Optional[str] = None) -> Cell:
        """All three layers in one cell."""
        return merge_cells(name or self.via.name, self.m1, self.m2, self.via, bbox=self.via.bbox)


def build_assist_layer(rects: np.ndarray, shrink: int, horizontal: bool) -> np.ndarray:
    """Pull both line-ends of every wire in by ``shrink``; drop wires that vanish."""
    if shrink < 0:
        raise ValueError("shrink must be >= 0")
    out = np.array(rects, dtype=np.int64).reshape(-1, 4)
    lo, hi = (0, 2) if horizontal else (1, 3)
    out[:, lo] += shrink
    out[:, hi] -= shrink
    return out[out[:, lo] < out[:, hi]]


def _track_cover(rects, horizontal, origin_across, pitch, n_tracks, q_lo, q_hi, contain):
    """Per (track, query) test against the wires of each track.

    ``contain``: some wire spans [q_lo, q_hi] entirely; otherwise: some wire
    has positive-length overlap with it. Returns an (n_tracks, n_queries)
    boolean matrix. Works for arbitrary (even overlapping) wire sets.
    """
    q_lo = np.asarray(q_lo, dtype=np.int64)
    q_hi = np.asarray(q_hi, dtype=np.int64)
    out = np.zeros((n_tracks, len(q_lo)), dtype=bool)
    if not len(rects) or not n_tracks or not len(q_lo):
        return out
    a_lo, a_hi, c_lo = (0, 2, 1) if horizontal else (1, 3, 0)
    rel = rects[:, c_lo] - origin_across
    on_grid = (rel % pitch == 0) & (rel >= 0) & (rel // pitch < n_tracks)
    rects = rects[on_grid]
    track = rel[on_grid] // pitch
    lo, hi = rects[:, a_lo], rects[:, a_hi]
    base = min(int(lo.min()), int(q_lo.min())) - 1
    span = max(int(hi.max()), int(q_hi.max())) - base + 2
    order = np.lexsort((lo, track))
    track, lo, hi = track[order], lo[order], hi[order]
    start_key = track * span + (lo - base)
    end_key = np.maximum.accumulate(track * span + (hi - base))
    tq = np.arange(n_tracks, dtype=np.int64)[:, None] * span
    if contain:
        pos = np.searchsorted(start_key, tq + (q_lo - base)[None, :], side="right") - 1
        need = tq + (q_hi - base)[None, :]
        ok = pos >= 0
        out[ok] = end_key[pos[ok]] >= need[ok]
    else:
        pos = np.searchsorted(start_key, tq + (q_hi - base)[None, :], side="left") - 1
        need = tq + (q_lo - base)[None, :]
        ok = pos >= 0
        out[ok] = end_key[pos[ok]] > need[ok]
    return out


def _grid(v: ViaSpec):
    m1, m2 = v.m1, v.m2
    x0, y0 = m1.origin
    row_y = y0 + np.arange(m1.track_count(), dtype=np.int64) * m1.track_pitch
    col_x = x0 + np.arange(m2.track_count(), dtype=np.int64) * m2.track_pitch
    return row_y, col_x


def overlap_matrix(m1_cell: Cell, m2_cell: Cell, v: ViaSpec) -> np.ndarray:
    """Crossings where an M1 wire and an M2 wire overlap at all."""
    return _crossings(m1_cell, m2_cell, v, 0, 0, contain=False)


def _crossings(m1_cell, m2_cell, v, shrink1, shrink2, contain):
    row_y, col_x = _grid(v)
    m1r = build_assist_layer(m1_cell.layer(v.m1.layer_id), shrink1, True)
    m2r = build_assist_layer(m2_cell.layer(v.m2.layer_id), shrink2, False)
    x0, y0 = v.m1.origin
    # window each via occupies inside a crossing, along each metal
    vx_lo = col_x + (v.m2.wire_cd - v.via_x) // 2
    vy_lo = row_y + (v.m1.wire_cd - v.via_y) // 2
    if contain:
        q1 = (vx_lo, vx_lo + v.via_x)
        q2 = (vy_lo, vy_lo + v.via_y)
    else:
        q1 = (col_x, col_x + v.m2.wire_cd)
        q2 = (row_y, row_y + v.m1.wire_cd)
    a = _track_cover(m1r, True, y0, v.m1.track_pitch, len(row_y), *q1, contain)
    b = _track_cover(m2r, False, x0, v.m2.track_pitch, len(col_x), *q2, contain)
    return a & b.T


def build_candidate_matrix(m1_cell: Cell, m2_cell: Cell, v: ViaSpec) -> ViaCandidateMatrix:
    """Legal via sites: both assist layers contain the full via rectangle.

    M1 (horizontal) line-ends are pulled in by ``enclosure_x``, M2 (vertical)
    line-ends by ``enclosure_y``; a site survives only if the intersection of
    the two assist wires still holds a whole via, which removes enclosure
    conflicts in the same step.
    """
    row_y, col_x = _grid(v)
    entries = _crossings(m1_cell, m2_cell, v, v.enclosure_x, v.enclosure_y, contain=True)
    return ViaCandidateMatrix(
        entries=entries, row_y=row_y, col_x=col_x,
        via_x=v.via_x, via_y=v.via_y, row_cd=v.m1.wire_cd, col_cd=v.m2.wire_cd,
        overlap=overlap_matrix(m1_cell, m2_cell, v),
    )


def apply_density(m: ViaCandidateMatrix, density: float, prng: Prng) -> ViaCandidateMatrix:
    """Keep each candidate with probability ``density``; one draw per candidate in row-major order."""
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density {density} outside [0, 1]")
    flat = m.entries.ravel()
    idx = np.flatnonzero(flat)
    keep = prng.random_block(len(idx)) < density
    out = np.zeros_like(flat)
    out[idx[keep]] = True
    return m.with_entries(out.reshape(m.entries.shape))


def remove_pitch_conflicts(m: ViaCandidateMatrix, rows: bool = True, cols: bool = True) -> ViaCandidateMatrix:
    """Two scan-order passes: clear (i, j) if (i-1, j) is set, then if (i, j-1) is set.

    Each pass sees its own earlier deletions, so a run 1 1 1 becomes 1 0 1.
    """
    e = m.entries.copy()
    if rows:
        for i in range(1, e.shape[0]):
            e[i] &= ~e[i - 1]
    if cols:
        for j in range(1, e.shape[1]):
            e[:, j] &= ~e[:, j - 1]
    return m.with_entries(e)


def generate_via_cell(v: ViaSpec, engine: str = "lockstep", workers: int = 1) -> ViaResult:
    m1 = draw_wire_cell(v.m1, engine=engine, workers=workers)
    m2 = draw_wire_cell(v.m2, engine=engine, workers=workers)
    cand = build_candidate_matrix(m1, m2, v)
    dense = apply_density(cand, v.density, Prng(derive_seed(v.seed, 3)))
    final = remove_pitch_conflicts(dense, rows=v.via_pitch_y > 0, cols=v.via_pitch_x > 0)
    rects = final.site_rects()
    via = Cell(v.name, np.full(len(rects), v.via_layer_id, dtype=np.int16), rects, v.bbox)
    stats = ViaStats(cand.count(), dense.count(), final.count())
    return ViaResult(m1, m2, via, stats, final)


def default_metals(via_x: int, via_y: int, pitch_x: int, pitch_y: int, total_x: int, total_y: int,
                   m1_rules: dict, m2_rules: dict, seed: int = 0, origin=(0, 0),
                   m1_layer: int = 1, m2_layer: int = 3, name: str = "VIA") -> tuple[MetalSpec, MetalSpec]:
    """Metal gratings tied to a via rule set: widths = via size, pitch = via pitch."""
    m1 = MetalSpec(wire_cd=via_y, track_pitch=pitch_y or 2 * via_y, total_x=total_x, total_y=total_y,
                   origin=origin, orientation=Orientation.HORIZONTAL, layer_id=m1_layer,
                   seed=derive_seed(seed, 1), name=f"{name}_M1", **m1_rules)
    m2 = MetalSpec(wire_cd=via_x, track_pitch=pitch_x or 2 * via_x, total_x=total_x, total_y=total_y,
                   origin=origin, orientation=Orientation.VERTICAL, layer_id=m2_layer,
                   seed=derive_seed(seed, 2), name=f"{name}_M2", **m2_rules)
    return m1, m2
