"""Single-shape fault injection against the rule checker.

Starting from clean generated cells, one shape at a time is resized by
1 nm on one edge, shifted by half a pitch, or duplicated, and the checker
must report a violation of a kind that mutation can plausibly cause.
"""

from __future__ import annotations

from collections import Counter
from itertools import zip_longest
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .drc import Kind, check_metal, check_via
from .geometry import Cell
from .metal import MetalSpec, draw_wire_cell
from .rng import Prng
from .via import ViaResult, ViaSpec, generate_via_cell

RESIZE, SHIFT, DUPLICATE = "resize", "shift", "duplicate"
MUTATIONS = (RESIZE, SHIFT, DUPLICATE)

_ALONG = frozenset({Kind.T2TOffGrid, Kind.T2TBelowMin, Kind.T2TAboveMax, Kind.LengthBelowMin,
                    Kind.LengthAboveMax, Kind.OutOfBounds, Kind.SameTrackOverlap})
_ACROSS = frozenset({Kind.WidthCD, Kind.OffTrack, Kind.OutOfBounds})


@dataclass(frozen=True)
class Mutation:
    op: str
    target: str            # "metal" or "via"
    index: int             # shape row in the layer
    edge: int = 0          # 0..3 = x_ll, y_ll, x_ur, y_ur (resize only)
    delta: int = 0         # nm
    expected: frozenset = frozenset()


def apply_mutation(rects: np.ndarray, m: Mutation) -> np.ndarray:
    out = np.array(rects, dtype=np.int64)
    if m.op == RESIZE:
        out[m.index, m.edge] += m.delta
    elif m.op == SHIFT:
        axis = m.edge  # 0 = shift in x, 1 = shift in y
        out[m.index, axis] += m.delta
        out[m.index, axis + 2] += m.delta
    elif m.op == DUPLICATE:
        out = np.concatenate([out, out[m.index:m.index + 1]])
    else:
        raise ValueError(f"unknown mutation {m.op!r}")
    return out


def _pick(prng: Prng, options: Sequence):
    return options[prng.rand_int(0, len(options) - 1)]


def metal_mutation(prng: Prng, spec: MetalSpec, n_shapes: int) -> Mutation:
    op = _pick(prng, MUTATIONS)
    index = prng.rand_int(0, n_shapes - 1)
    sign = _pick(prng, (-1, 1))
    along_axis = 0 if spec.horizontal else 1
    if op == RESIZE:
        edge = prng.rand_int(0, 3)
        expected = _ALONG if edge % 2 == along_axis else _ACROSS
        return Mutation(op, "metal", index, edge, sign, expected)
    if op == SHIFT:
        return Mutation(op, "metal", index, 1 - along_axis, sign * (spec.track_pitch // 2),
                        frozenset({Kind.OffTrack, Kind.OutOfBounds}))
    return Mutation(op, "metal", index, expected=frozenset({Kind.SameTrackOverlap}))


def via_mutation(prng: Prng, spec: ViaSpec, n_shapes: int) -> Mutation:
    op = _pick(prng, MUTATIONS)
    index = prng.rand_int(0, n_shapes - 1)
    sign = _pick(prng, (-1, 1))
    if op == RESIZE:
        return Mutation(op, "via", index, prng.rand_int(0, 3), sign, frozenset({Kind.ViaSize}))
    if op == SHIFT:
        step = max(spec.via_pitch_x, spec.m2.track_pitch) // 2
        return Mutation(op, "via", index, 0, sign * step,
                        frozenset({Kind.ViaUncovered, Kind.ViaEnclosureX, Kind.ViaEnclosureY,
                                   Kind.ViaPitchX, Kind.ViaPitchY}))
    return Mutation(op, "via", index, expected=frozenset({Kind.ViaPitchX, Kind.ViaPitchY}))


@dataclass(frozen=True)
class Injection:
    case: str
    mutation: Mutation
    found: frozenset

    @property
    def detected(self) -> bool:
        return bool(self.found & self.mutation.expected)


@dataclass
class Campaign:
    injections: list[Injection] = field(default_factory=list)

    @property
    def detection_rate(self) -> float:
        if not self.injections:
            return 0.0
        return sum(i.detected for i in self.injections) / len(self.injections)

    def misses(self) -> list[Injection]:
        return [i for i in self.injections if not i.detected]

    def summary(self) -> dict:
        total = Counter((i.mutation.target, i.mutation.op) for i in self.injections)
        hit = Counter((i.mutation.target, i.mutation.op) for i in self.injections if i.detected)
        return {f"{t}/{op}": (hit[(t, op)], n) for (t, op), n in sorted(total.items())}


def _metal_case(spec: MetalSpec, prng: Prng, cell: Cell) -> Injection:
    rects = cell.layer(spec.layer_id)
    m = metal_mutation(prng, spec, len(rects))
    bad = Cell(cell.name, np.full(len(rects) + (m.op == DUPLICATE), spec.layer_id, np.int16),
               apply_mutation(rects, m))
    return Injection(spec.name, m, frozenset(check_metal(bad, spec).kinds()))


def _via_case(spec: ViaSpec, prng: Prng, res: ViaResult) -> Injection:
    rects = res.via.layer(spec.via_layer_id)
    m = via_mutation(prng, spec, len(rects))
    bad = Cell(res.via.name, np.full(len(rects) + (m.op == DUPLICATE), spec.via_layer_id, np.int16),
               apply_mutation(rects, m))
    return Injection(spec.name, m, frozenset(check_via(res.m1, res.m2, bad, spec).kinds()))


def run_campaign(metal_specs: Sequence[MetalSpec], via_specs: Sequence[ViaSpec], injections: int = 1000,
                 seed: int = 0, baseline_check: bool = True) -> Campaign:
    """Alternate metal and via injections, cycling through the given specs.

    Each base cell must be clean before it is mutated; otherwise a
    detection would prove nothing.
    """
    metals = [(s, draw_wire_cell(s)) for s in metal_specs]
    vias = [(s, generate_via_cell(s)) for s in via_specs]
    if baseline_check:
        for s, c in metals:
            if not check_metal(c, s).clean:
                raise RuntimeError(f"{s.name}: base cell is not clean")
        for s, r in vias:
            if not check_via(r.m1, r.m2, r.via, s).clean:
                raise RuntimeError(f"{s.name}: base cell is not clean")
            if not len(r.via):
                raise RuntimeError(f"{s.name}: base cell has no vias to mutate")
    prng = Prng(seed)
    camp = Campaign()
    order = [c for pair in zip_longest(
        [("m", x) for x in metals], [("v", x) for x in vias]) for c in pair if c is not None]
    for k in range(injections):
        tag, (spec, base) = order[k % len(order)]
        if tag == "m":
            camp.injections.append(_metal_case(spec, prng, base))
        else:
            camp.injections.append(_via_case(spec, prng, base))
    return camp
