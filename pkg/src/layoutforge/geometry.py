"""Integer geometry primitives.

All coordinates are database units (1 dbu = 1 nm). Cells keep their shapes
in numpy arrays so that multi-million-wire cells stay cheap to build,
compare and serialize.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Iterable, Optional

import numpy as np

DBU_PER_UM = 1000


class UnitError(ValueError):
    """A micron value does not map onto a whole number of nanometres."""


def um_to_dbu(value) -> int:
    """Convert a micron quantity (int, float or str) to integer nm, exactly."""
    if isinstance(value, bool):
        raise UnitError(f"not a length: {value!r}")
    try:
        d = Decimal(str(value)) * DBU_PER_UM
    except InvalidOperation as exc:
        raise UnitError(f"not a number: {value!r}") from exc
    if d != d.to_integral_value():
        raise UnitError(f"{value} um is not a whole number of nm")
    return int(d)


def dbu_to_um(value: int) -> float:
    return value / DBU_PER_UM


@dataclass(frozen=True, order=True)
class Rect:
    x_ll: int
    y_ll: int
    x_ur: int
    y_ur: int

    def __post_init__(self):
        if not (self.x_ll < self.x_ur and self.y_ll < self.y_ur):
            raise ValueError(f"degenerate rectangle {self.as_tuple()}")

    @property
    def width(self) -> int:
        return self.x_ur - self.x_ll

    @property
    def height(self) -> int:
        return self.y_ur - self.y_ll

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x_ll, self.y_ll, self.x_ur, self.y_ur)

    def contains(self, other: "Rect") -> bool:
        return (self.x_ll <= other.x_ll and self.y_ll <= other.y_ll
                and other.x_ur <= self.x_ur and other.y_ur <= self.y_ur)

    def translated(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x_ll + dx, self.y_ll + dy, self.x_ur + dx, self.y_ur + dy)


def rect_intersect(a: Rect, b: Rect) -> Optional[Rect]:
    """Largest rectangle inside both; None when the interiors are disjoint."""
    x_ll, y_ll = max(a.x_ll, b.x_ll), max(a.y_ll, b.y_ll)
    x_ur, y_ur = min(a.x_ur, b.x_ur), min(a.y_ur, b.y_ur)
    if x_ll >= x_ur or y_ll >= y_ur:
        return None
    return Rect(x_ll, y_ll, x_ur, y_ur)


def _lex_sorted(layers: np.ndarray, rects: np.ndarray) -> bool:
    if len(layers) < 2:
        return True
    keys = (layers, rects[:, 1], rects[:, 0], rects[:, 2], rects[:, 3])
    undecided = np.ones(len(layers) - 1, dtype=bool)
    for k in keys:
        a, b = k[:-1], k[1:]
        if np.any(undecided & (a > b)):
            return False
        undecided &= a == b
        if not undecided.any():
            break
    return True


class Cell:
    """A flat cell: named list of (layer, rect) shapes plus a bounding box.

    Shapes are kept sorted by (layer, y_ll, x_ll, x_ur, y_ur), so insertion
    order never leaks into output. ``bbox`` defaults to the shape extent; an
    explicit bbox must enclose every shape.
    """

    __slots__ = ("name", "layers", "rects", "_bbox")

    def __init__(self, name: str, layers=None, rects=None, bbox: Optional[Rect] = None):
        layers = np.zeros(0, dtype=np.int16) if layers is None else np.array(layers, dtype=np.int16)
        rects = np.zeros((0, 4), dtype=np.int64) if rects is None else np.array(rects, dtype=np.int64)
        rects = rects.reshape(-1, 4)
        if len(layers) != len(rects):
            raise ValueError("layers and rects differ in length")
        if len(rects):
            bad = (rects[:, 0] >= rects[:, 2]) | (rects[:, 1] >= rects[:, 3])
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise ValueError(f"degenerate rectangle {tuple(rects[i])}")
        if not _lex_sorted(layers, rects):
            order = np.lexsort((rects[:, 3], rects[:, 2], rects[:, 0], rects[:, 1], layers))
            layers, rects = layers[order], rects[order]
        if bbox is not None and len(rects):
            outside = ((rects[:, 0] < bbox.x_ll) | (rects[:, 1] < bbox.y_ll)
                       | (rects[:, 2] > bbox.x_ur) | (rects[:, 3] > bbox.y_ur))
            if outside.any():
                i = int(np.flatnonzero(outside)[0])
                raise ValueError(f"shape {tuple(rects[i])} escapes bbox {bbox.as_tuple()}")
        layers.setflags(write=False)
        rects.setflags(write=False)
        self.name = name
        self.layers = layers
        self.rects = rects
        self._bbox = bbox

    @classmethod
    def from_shapes(cls, name: str, shapes: Iterable[tuple[int, Rect]], bbox: Optional[Rect] = None) -> "Cell":
        shapes = list(shapes)
        layers = [layer for layer, _ in shapes]
        rects = [r.as_tuple() for _, r in shapes]
        return cls(name, layers, rects, bbox)

    @property
    def bbox(self) -> Optional[Rect]:
        if self._bbox is not None:
            return self._bbox
        if not len(self.rects):
            return None
        lo = self.rects[:, :2].min(axis=0)
        hi = self.rects[:, 2:].max(axis=0)
        return Rect(int(lo[0]), int(lo[1]), int(hi[0]), int(hi[1]))

    @property
    def shapes(self) -> list[tuple[int, Rect]]:
        return [(int(layer), Rect(*map(int, r))) for layer, r in zip(self.layers, self.rects)]

    def layer(self, layer_id: int) -> np.ndarray:
        """Rects on one layer, as an (n, 4) array in cell order."""
        return self.rects[self.layers == layer_id]

    def layer_ids(self) -> list[int]:
        return [int(v) for v in np.unique(self.layers)]

    def __len__(self) -> int:
        return len(self.rects)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Cell):
            return NotImplemented
        return (self.name == other.name
                and np.array_equal(self.layers, other.layers)
                and np.array_equal(self.rects, other.rects))

    def __repr__(self) -> str:
        return f"Cell({self.name!r}, {len(self)} shapes, layers={self.layer_ids()})"

    def renamed(self, name: str) -> "Cell":
        return Cell(name, self.layers, self.rects, self._bbox)

    def with_bbox(self, bbox: Optional[Rect]) -> "Cell":
        return Cell(self.name, self.layers, self.rects, bbox)


def merge_cells(name: str, *cells: Cell, bbox: Optional[Rect] = None) -> Cell:
    layers = np.concatenate([c.layers for c in cells]) if cells else None
    rects = np.concatenate([c.rects for c in cells]) if cells else None
    return Cell(name, layers, rects, bbox)


def transpose_cell(cell: Cell, name: Optional[str] = None) -> Cell:
    """Mirror a cell about the line y = x."""
    r = cell.rects[:, [1, 0, 3, 2]]
    bbox = cell._bbox
    if bbox is not None:
        bbox = Rect(bbox.y_ll, bbox.x_ll, bbox.y_ur, bbox.x_ur)
    return Cell(cell.name if name is None else name, cell.layers, r, bbox)
