"""Clip rasterisation, block-DCT feature tensors and circle-density features.

Feature tensors follow the usual JPEG-style recipe: cut the raster into
B x B blocks, take an orthonormal 2-D DCT-II of each block, read the
coefficients in zig-zag order and keep the first K.

Circle features sample the pixel density on concentric digital circles
around the clip centre; circles are then ranked by their mutual
information with the clip labels and picked greedily under a minimum
index spacing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .geometry import Cell, Rect

HOTSPOT, NON_HOTSPOT = "hotspot", "non-hotspot"


@dataclass(frozen=True)
class RasterClip:
    """Binary raster; row 0 is the bottom edge of ``window``."""

    grid: np.ndarray
    pixel_size: int
    origin: tuple[int, int]
    label: Optional[str] = None


@dataclass(frozen=True)
class CcasConfig:
    r_max: int
    n_c: int
    d: int = 0
    bins: int = 16

    def __post_init__(self):
        if self.r_max < 1:
            raise ValueError("r_max must be >= 1")
        if self.n_c < 1:
            raise ValueError("n_c must be >= 1")
        if self.d < 0:
            raise ValueError("d must be >= 0")
        if self.n_c > _ceil_div(self.r_max, self.d + 1):
            raise ValueError(f"cannot place {self.n_c} circles {self.d + 1} apart within radius {self.r_max}")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")


def _ceil_div(a, b):
    return -(-a // b)


def rasterize_clip(cell: Cell, window: Rect, pixel_size: int, layers: Optional[Sequence[int]] = None,
                   label: Optional[str] = None) -> RasterClip:
    """A pixel is 1 when its centre falls in some shape (half-open on the upper edges)."""
    if pixel_size <= 0:
        raise ValueError("pixel_size must be positive")
    if window.width % pixel_size or window.height % pixel_size:
        raise ValueError(f"window {window.as_tuple()} not divisible by pixel size {pixel_size}")
    bbox = cell.bbox
    if bbox is not None and cell._bbox is not None and not bbox.contains(window):
        raise ValueError(f"window {window.as_tuple()} outside cell bbox {bbox.as_tuple()}")
    h, w = window.height // pixel_size, window.width // pixel_size
    grid = np.zeros((h, w), dtype=np.uint8)
    rects = cell.rects if layers is None else cell.rects[np.isin(cell.layers, list(layers))]
    ps = pixel_size
    # centre of pixel c sits at (2c + 1) * ps / 2 from the window edge
    c0 = _ceil_div(2 * (rects[:, 0] - window.x_ll) - ps, 2 * ps)
    c1 = _ceil_div(2 * (rects[:, 2] - window.x_ll) - ps, 2 * ps)
    r0 = _ceil_div(2 * (rects[:, 1] - window.y_ll) - ps, 2 * ps)
    r1 = _ceil_div(2 * (rects[:, 3] - window.y_ll) - ps, 2 * ps)
    c0, c1 = np.clip(c0, 0, w), np.clip(c1, 0, w)
    r0, r1 = np.clip(r0, 0, h), np.clip(r1, 0, h)
    for a, b, c, d in zip(r0.tolist(), r1.tolist(), c0.tolist(), c1.tolist()):
        if a < b and c < d:
            grid[a:b, c:d] = 1
    return RasterClip(grid, pixel_size, (window.x_ll, window.y_ll), label)


@lru_cache(maxsize=64)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis; row k is frequency k."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    c = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    c[0] /= np.sqrt(2.0)
    c.setflags(write=False)
    return c


def dct2(block: np.ndarray) -> np.ndarray:
    block = np.asarray(block, dtype=np.float64)
    c = dct_matrix(block.shape[0])
    if block.shape[0] != block.shape[1]:
        raise ValueError("dct2 needs a square block")
    return c @ block @ c.T


def idct2(coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    c = dct_matrix(coeffs.shape[0])
    return c.T @ coeffs @ c


@lru_cache(maxsize=64)
def zigzag_indices(n: int) -> tuple[tuple[int, int], ...]:
    """(row, col) visiting order: anti-diagonals, even ones walked up-right, odd ones down-left."""
    order = []
    for s in range(2 * n - 1):
        rows = range(max(0, s - n + 1), min(s, n - 1) + 1)
        if s % 2 == 0:
            rows = reversed(rows)
        order.extend((r, s - r) for r in rows)
    return tuple(order)


def zigzag(block: np.ndarray) -> np.ndarray:
    block = np.asarray(block)
    idx = np.array(zigzag_indices(block.shape[0]))
    return block[idx[:, 0], idx[:, 1]]


def inverse_zigzag(vec: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, n), dtype=np.float64)
    idx = np.array(zigzag_indices(n))[: len(vec)]
    out[idx[:, 0], idx[:, 1]] = vec
    return out


def feature_tensor(clip: RasterClip | np.ndarray, blocks_per_side: int = 12, keep: int = 32) -> np.ndarray:
    """(B, B, K) tensor of the first K zig-zag DCT coefficients of each block."""
    grid = clip.grid if isinstance(clip, RasterClip) else np.asarray(clip)
    h, w = grid.shape
    b = blocks_per_side
    if h % b or w % b:
        raise ValueError(f"grid {h}x{w} not divisible into {b}x{b} blocks")
    n = h // b
    if w // b != n:
        raise ValueError("blocks must be square")
    if not 1 <= keep <= n * n:
        raise ValueError(f"keep={keep} outside 1..{n * n}")
    c = dct_matrix(n)
    blocks = grid.astype(np.float64).reshape(b, n, b, n).transpose(0, 2, 1, 3)
    coeffs = c @ blocks @ c.T
    idx = np.array(zigzag_indices(n))[:keep]
    return coeffs[:, :, idx[:, 0], idx[:, 1]]


def reconstruct_grid(tensor: np.ndarray, block_size: int) -> np.ndarray:
    """Inverse of :func:`feature_tensor`, with dropped coefficients taken as zero."""
    b, b2, k = tensor.shape
    n = block_size
    c = dct_matrix(n)
    idx = np.array(zigzag_indices(n))[:k]
    coeffs = np.zeros((b, b2, n, n))
    coeffs[:, :, idx[:, 0], idx[:, 1]] = tensor
    blocks = c.T @ coeffs @ c
    return blocks.transpose(0, 2, 1, 3).reshape(b * n, b2 * n)


def write_tensor(tensor: np.ndarray, sink) -> None:
    """Header of three little-endian int32 (B, B, K), then float64 LE values in C order."""
    b, b2, k = tensor.shape
    sink.write(struct.pack("<3i", b, b2, k))
    sink.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())


def read_tensor(source) -> np.ndarray:
    data = source.read() if hasattr(source, "read") else bytes(source)
    b, b2, k = struct.unpack_from("<3i", data, 0)
    count = b * b2 * k
    if len(data) != 12 + 8 * count:
        raise ValueError(f"tensor file size {len(data)} does not match header {b}x{b2}x{k}")
    return np.frombuffer(data, dtype="<f8", offset=12, count=count).reshape(b, b2, k).copy()


@lru_cache(maxsize=256)
def circle_offsets(r: int) -> np.ndarray:
    """Distinct (dy, dx) pixels of the midpoint (Bresenham) circle of radius r."""
    if r == 0:
        return np.zeros((1, 2), dtype=np.int64)
    pts = set()
    x, y, err = r, 0, 1 - r
    while x >= y:
        for a, b in ((x, y), (y, x)):
            pts.update({(a, b), (-a, b), (a, -b), (-a, -b)})
        y += 1
        if err < 0:
            err += 2 * y + 1
        else:
            x -= 1
            err += 2 * (y - x) + 1
    out = np.array(sorted(pts), dtype=np.int64)
    out.setflags(write=False)
    return out


def ccas_sample(clip: RasterClip | np.ndarray, r_max: int) -> np.ndarray:
    """Mean pixel value on circles of radius 1..r_max around the clip centre."""
    grid = clip.grid if isinstance(clip, RasterClip) else np.asarray(clip)
    h, w = grid.shape
    if r_max < 1 or r_max > min(h, w) // 2:
        raise ValueError(f"r_max={r_max} must lie in 1..{min(h, w) // 2}")
    cy, cx = h // 2, w // 2
    out = np.empty(r_max)
    for r in range(1, r_max + 1):
        off = circle_offsets(r)
        ys, xs = cy + off[:, 0], cx + off[:, 1]
        inside = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
        out[r - 1] = grid[ys[inside], xs[inside]].mean()
    return out


def discretize(values, bins: int = 16, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Equal-width bin codes 0..bins-1 over [lo, hi]; values outside are clamped."""
    v = (np.asarray(values, dtype=np.float64) - lo) / (hi - lo)
    return np.clip(np.floor(v * bins), 0, bins - 1).astype(np.int64)


def mutual_information(c, y) -> float:
    """Plug-in mutual information (nats) between two discrete sequences."""
    c = np.asarray(c)
    y = np.asarray(y)
    if c.shape != y.shape or c.ndim != 1 or len(c) == 0:
        raise ValueError("need two equal-length, non-empty 1-D sequences")
    n = len(c)
    _, ci = np.unique(c, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    joint = np.zeros((ci.max() + 1, yi.max() + 1), dtype=np.int64)
    np.add.at(joint, (ci.ravel(), yi.ravel()), 1)
    nc = joint.sum(axis=1, keepdims=True)
    ny = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    # integer ratio keeps independent cells at log(1) == 0 exactly
    ratio = (joint * n)[nz] / (nc * ny)[nz]
    return max(0.0, float(np.sum(joint[nz] / n * np.log(ratio))))


def _best_spaced_subset(scores: np.ndarray, n_c: int, d: int, maximize: bool):
    """Exact optimum of the spaced subset problem by dynamic programming."""
    m = len(scores)
    sign = 1.0 if maximize else -1.0
    s = sign * scores
    neg = -np.inf
    # best[k][i]: best total choosing k indices from 0..i with i's choice free
    best = np.full((n_c + 1, m), neg)
    take = np.zeros((n_c + 1, m), dtype=bool)
    best[0, :] = 0.0
    for k in range(1, n_c + 1):
        for i in range(m):
            skip = best[k, i - 1] if i > 0 else neg
            prev = i - d - 1
            if k == 1:
                use = s[i]
            else:
                use = best[k - 1, prev] + s[i] if prev >= 0 else neg
            if use > skip:
                best[k, i], take[k, i] = use, True
            else:
                best[k, i] = skip
    if best[n_c, m - 1] == neg:
        return None
    chosen, k, i = [], n_c, m - 1
    while k > 0:
        if take[k, i]:
            chosen.append(i)
            i -= d + 1
            k -= 1
        else:
            i -= 1
    return sorted(chosen)


def select_by_score(scores, n_c: int, d: int, direction: str = "maximize") -> list[int]:
    """Greedy pick of ``n_c`` 1-based indices by score with pairwise spacing > d.

    Ties go to the lower index. If the greedy pass paints itself into a
    corner, the exact dynamic-programming optimum is returned instead.
    """
    scores = np.asarray(scores, dtype=np.float64)
    m = len(scores)
    if direction not in ("maximize", "minimize"):
        raise ValueError(f"direction must be maximize or minimize, not {direction!r}")
    if n_c < 1 or d < 0:
        raise ValueError("need n_c >= 1 and d >= 0")
    if n_c > _ceil_div(m, d + 1):
        raise ValueError(f"cannot pick {n_c} of {m} indices with spacing > {d}")
    key = -scores if direction == "maximize" else scores
    order = np.lexsort((np.arange(m), key))
    chosen: list[int] = []
    for i in order.tolist():
        if all(abs(i - j) > d for j in chosen):
            chosen.append(i)
            if len(chosen) == n_c:
                return sorted(k + 1 for k in chosen)
    exact = _best_spaced_subset(scores, n_c, d, direction == "maximize")
    return [k + 1 for k in exact]


def circle_mutual_information(samples: np.ndarray, labels, bins: int = 16) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float64)
    labels = np.asarray(labels)
    return np.array([mutual_information(discretize(samples[:, i], bins), labels)
                     for i in range(samples.shape[1])])


def select_circles(samples: np.ndarray, labels, cfg: CcasConfig, direction: str = "maximize") -> list[int]:
    """Pick ``cfg.n_c`` circle indices (1-based radii) from per-clip circle densities."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[1] != cfg.r_max:
        raise ValueError(f"samples have {samples.shape[1]} circles, config says r_max={cfg.r_max}")
    mi = circle_mutual_information(samples, labels, cfg.bins)
    return select_by_score(mi, cfg.n_c, cfg.d, direction)
