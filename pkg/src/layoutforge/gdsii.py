"""GDSII stream writer and reader for flat rectangle-only libraries.

Records are big-endian: a 2-byte total length, a record type byte, a data
type byte, then the payload. Reals use the GDSII excess-64 base-16 format.
The database unit is fixed at 1 nm (UNITS 0.001 user units, 1e-9 m).

Boundaries are written as closed, counter-clockwise 5-point rectangles
starting at the lower-left corner, and the BGNLIB/BGNSTR timestamps are
pinned to a constant unless asked otherwise, so equal libraries produce
equal bytes.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import re
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Optional

import numpy as np

from .geometry import Cell, Rect

HEADER = 0x00
BGNLIB = 0x01
LIBNAME = 0x02
UNITS = 0x03
ENDLIB = 0x04
BGNSTR = 0x05
STRNAME = 0x06
ENDSTR = 0x07
BOUNDARY = 0x08
LAYER = 0x0D
DATATYPE = 0x0E
XY = 0x10
ENDEL = 0x11

NO_DATA, INT16, INT32, REAL8, ASCII = 0x00, 0x02, 0x03, 0x05, 0x06

_RECORD_TYPES = {
    HEADER: INT16, BGNLIB: INT16, LIBNAME: ASCII, UNITS: REAL8, ENDLIB: NO_DATA,
    BGNSTR: INT16, STRNAME: ASCII, ENDSTR: NO_DATA, BOUNDARY: NO_DATA,
    LAYER: INT16, DATATYPE: INT16, XY: INT32, ENDEL: NO_DATA,
}
_NAMES = {HEADER: "HEADER", BGNLIB: "BGNLIB", LIBNAME: "LIBNAME", UNITS: "UNITS", ENDLIB: "ENDLIB",
          BGNSTR: "BGNSTR", STRNAME: "STRNAME", ENDSTR: "ENDSTR", BOUNDARY: "BOUNDARY",
          LAYER: "LAYER", DATATYPE: "DATATYPE", XY: "XY", ENDEL: "ENDEL"}

GDS_VERSION = 600
USER_UNIT_PER_DB = 0.001
METERS_PER_DB = 1e-9
FIXED_TIMESTAMP = (2000, 1, 1, 0, 0, 0)

_CELL_NAME = re.compile(r"^[A-Z0-9_$]{1,32}$")
_I32_MIN, _I32_MAX = -(1 << 31), (1 << 31) - 1


class GdsEncodeError(ValueError):
    pass


class GdsParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass
class GdsLibrary:
    name: str = "LAYOUTFORGE"
    cells: list[Cell] = field(default_factory=list)
    user_unit_per_db: float = USER_UNIT_PER_DB
    meters_per_db: float = METERS_PER_DB

    def __eq__(self, other) -> bool:
        if not isinstance(other, GdsLibrary):
            return NotImplemented
        return (self.name == other.name and self.cells == other.cells
                and self.user_unit_per_db == other.user_unit_per_db
                and self.meters_per_db == other.meters_per_db)

    def cell(self, name: str) -> Cell:
        for c in self.cells:
            if c.name == name:
                return c
        raise KeyError(name)


def encode_real8(x: float) -> bytes:
    """8-byte GDSII real: sign, 7-bit excess-64 hex exponent, 56-bit mantissa.

    Every finite double in range encodes exactly (its 53-bit significand
    fits inside the 56-bit mantissa after hex alignment).
    """
    x = float(x)
    if x == 0.0:
        return bytes(8)
    if not math.isfinite(x):
        raise GdsEncodeError(f"cannot encode {x} as real8")
    sign = 0x80 if x < 0 else 0
    frac, exp2 = math.frexp(abs(x))  # abs(x) = frac * 2**exp2, frac in [0.5, 1)
    exp16 = -(-exp2 // 4)  # ceil(exp2 / 4)
    mantissa = int(math.ldexp(frac, exp2 - 4 * exp16 + 56))
    e = exp16 + 64
    if not 0 <= e <= 127:
        raise GdsEncodeError(f"{x} out of real8 range")
    return bytes([sign | e]) + mantissa.to_bytes(7, "big")


def decode_real8(b: bytes) -> float:
    if len(b) != 8:
        raise ValueError("real8 needs 8 bytes")
    sign = -1.0 if b[0] & 0x80 else 1.0
    e = (b[0] & 0x7F) - 64
    mantissa = int.from_bytes(b[1:], "big")
    return sign * math.ldexp(mantissa, 4 * e - 56)


def _record(rtype: int, payload: bytes = b"") -> bytes:
    if len(payload) % 2:
        payload += b"\0"
    length = 4 + len(payload)
    if length > 0xFFFF:
        raise GdsEncodeError(f"record {_NAMES[rtype]} too long ({length} bytes)")
    return struct.pack(">HBB", length, rtype, _RECORD_TYPES[rtype]) + payload


def _ascii(s: str) -> bytes:
    return s.encode("ascii")


def _stamp(ts) -> bytes:
    return struct.pack(">12h", *ts, *ts)


# BOUNDARY, LAYER, DATATYPE, XY(5 points), ENDEL
_BOUNDARY_DTYPE = np.dtype([
    ("b_hdr", ">u4"),
    ("l_hdr", ">u4"), ("layer", ">i2"),
    ("d_hdr", ">u4"), ("datatype", ">i2"),
    ("xy_hdr", ">u4"), ("xy", ">i4", (10,)),
    ("e_hdr", ">u4"),
])
_BOUNDARY_SIZE = _BOUNDARY_DTYPE.itemsize  # 64
_HDR = {
    "b_hdr": (4 << 16) | (BOUNDARY << 8) | NO_DATA,
    "l_hdr": (6 << 16) | (LAYER << 8) | INT16,
    "d_hdr": (6 << 16) | (DATATYPE << 8) | INT16,
    "xy_hdr": (44 << 16) | (XY << 8) | INT32,
    "e_hdr": (4 << 16) | (ENDEL << 8) | NO_DATA,
}


def _boundaries(layers: np.ndarray, rects: np.ndarray) -> bytes:
    if len(rects) and (rects.min() < _I32_MIN or rects.max() > _I32_MAX):
        raise GdsEncodeError("coordinate outside signed 32-bit range")
    if len(layers) and (layers.min() < 0 or layers.max() > 32767):
        raise GdsEncodeError("layer number outside 0..32767")
    arr = np.zeros(len(rects), dtype=_BOUNDARY_DTYPE)
    for name, value in _HDR.items():
        arr[name] = value
    arr["layer"] = layers
    x0, y0, x1, y1 = rects[:, 0], rects[:, 1], rects[:, 2], rects[:, 3]
    arr["xy"] = np.stack([x0, y0, x1, y0, x1, y1, x0, y1, x0, y0], axis=1)
    return arr.tobytes()


def write_gds(lib: GdsLibrary, sink: BinaryIO, timestamp: Optional[_dt.datetime] = None) -> int:
    """Write ``lib`` to a binary stream; returns the byte count.

    ``timestamp`` overrides the fixed epoch used for BGNLIB/BGNSTR.
    """
    ts = FIXED_TIMESTAMP if timestamp is None else (
        timestamp.year, timestamp.month, timestamp.day, timestamp.hour, timestamp.minute, timestamp.second)
    for cell in lib.cells:
        if not _CELL_NAME.match(cell.name):
            raise GdsEncodeError(f"invalid cell name {cell.name!r}: need 1-32 chars of [A-Z0-9_$]")
    try:
        libname = _ascii(lib.name)
    except UnicodeEncodeError as exc:
        raise GdsEncodeError(f"library name {lib.name!r} is not ASCII") from exc
    n = 0

    def put(b: bytes):
        nonlocal n
        sink.write(b)
        n += len(b)

    put(_record(HEADER, struct.pack(">h", GDS_VERSION)))
    put(_record(BGNLIB, _stamp(ts)))
    put(_record(LIBNAME, libname))
    put(_record(UNITS, encode_real8(lib.user_unit_per_db) + encode_real8(lib.meters_per_db)))
    for cell in lib.cells:
        put(_record(BGNSTR, _stamp(ts)))
        put(_record(STRNAME, _ascii(cell.name)))
        put(_boundaries(cell.layers, cell.rects))
        put(_record(ENDSTR))
    put(_record(ENDLIB))
    return n


def write_gds_file(lib: GdsLibrary, path, timestamp=None) -> int:
    with open(path, "wb") as f:
        return write_gds(lib, f, timestamp)


def _rect_from_xy(pts: np.ndarray):
    """Normalise a closed 5-point axis-aligned rectangle, else None."""
    if pts.shape != (5, 2) or not np.array_equal(pts[0], pts[4]):
        return None
    xs, ys = pts[:4, 0], pts[:4, 1]
    x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
    if x0 == x1 or y0 == y1:
        return None
    corners = {(int(a), int(b)) for a, b in pts[:4]}
    if corners != {(x0, y0), (x1, y0), (x1, y1), (x0, y1)}:
        return None
    # consecutive corners must share an edge
    for k in range(4):
        a, b = pts[k], pts[k + 1]
        if a[0] != b[0] and a[1] != b[1]:
            return None
    return (int(x0), int(y0), int(x1), int(y1))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def next(self):
        data, pos = self.data, self.pos
        if pos + 4 > len(data):
            raise GdsParseError("truncated record header", pos)
        length, rtype, dtype = struct.unpack_from(">HBB", data, pos)
        if length < 4 or length % 2:
            raise GdsParseError(f"bad record length {length}", pos)
        if pos + length > len(data):
            raise GdsParseError(f"truncated {_NAMES.get(rtype, hex(rtype))} record", pos)
        if rtype not in _RECORD_TYPES:
            raise GdsParseError(f"unknown record type 0x{rtype:02x}", pos)
        if dtype != _RECORD_TYPES[rtype]:
            raise GdsParseError(f"{_NAMES[rtype]} has data type 0x{dtype:02x}", pos)
        self.pos = pos + length
        return rtype, data[pos + 4:pos + length], pos

    def expect(self, rtype: int):
        got, payload, at = self.next()
        if got != rtype:
            raise GdsParseError(f"expected {_NAMES[rtype]}, found {_NAMES[got]}", at)
        return payload, at

    def fast_boundaries(self):
        """Bulk-decode a run of canonical 64-byte boundary blocks at the cursor."""
        avail = (len(self.data) - self.pos) // _BOUNDARY_SIZE
        if avail == 0:
            return None
        arr = np.frombuffer(self.data, dtype=_BOUNDARY_DTYPE, count=avail, offset=self.pos)
        ok = np.ones(avail, dtype=bool)
        for name, value in _HDR.items():
            ok &= arr[name] == value
        xy = arr["xy"]
        ok &= ((arr["datatype"] == 0)
               & (xy[:, 1] == xy[:, 3]) & (xy[:, 2] == xy[:, 4]) & (xy[:, 5] == xy[:, 7])
               & (xy[:, 6] == xy[:, 0]) & (xy[:, 8] == xy[:, 0]) & (xy[:, 9] == xy[:, 1])
               & (xy[:, 0] < xy[:, 2]) & (xy[:, 1] < xy[:, 5]))
        run = avail if ok.all() else int(np.argmin(ok))
        if run == 0:
            return None
        arr = arr[:run]
        self.pos += run * _BOUNDARY_SIZE
        rects = np.stack([arr["xy"][:, 0], arr["xy"][:, 1], arr["xy"][:, 4], arr["xy"][:, 5]], axis=1)
        return arr["layer"].astype(np.int16), rects.astype(np.int64)


def _read_structure(rd: _Reader, bgn_at: int) -> Cell:
    payload, _ = rd.expect(STRNAME)
    name = payload.rstrip(b"\0").decode("ascii")
    layer_chunks, rect_chunks = [], []
    while True:
        bulk = rd.fast_boundaries()
        if bulk is not None:
            layer_chunks.append(bulk[0])
            rect_chunks.append(bulk[1])
            continue
        rtype, payload, at = rd.next()
        if rtype == ENDSTR:
            break
        if rtype != BOUNDARY:
            raise GdsParseError(f"unsupported element {_NAMES[rtype]} in structure {name}", at)
        layer = datatype = pts = None
        while True:
            rtype, payload, at2 = rd.next()
            if rtype == ENDEL:
                break
            if rtype == LAYER:
                (layer,) = struct.unpack(">h", payload)
            elif rtype == DATATYPE:
                (datatype,) = struct.unpack(">h", payload)
            elif rtype == XY:
                pts = np.frombuffer(payload, dtype=">i4").astype(np.int64).reshape(-1, 2)
            else:
                raise GdsParseError(f"unexpected {_NAMES[rtype]} inside BOUNDARY", at2)
        if layer is None or pts is None:
            raise GdsParseError("BOUNDARY without LAYER or XY", at)
        rect = _rect_from_xy(pts)
        if rect is None:
            raise GdsParseError(f"non-rectangular boundary with {len(pts)} points", at)
        layer_chunks.append(np.array([layer], dtype=np.int16))
        rect_chunks.append(np.array([rect], dtype=np.int64))
    layers = np.concatenate(layer_chunks) if layer_chunks else None
    rects = np.concatenate(rect_chunks) if rect_chunks else None
    return Cell(name, layers, rects)


def read_gds(source) -> GdsLibrary:
    """Parse a library written by :func:`write_gds` (bytes or binary stream)."""
    data = source if isinstance(source, (bytes, bytearray, memoryview)) else source.read()
    rd = _Reader(bytes(data))
    rd.expect(HEADER)
    rd.expect(BGNLIB)
    payload, _ = rd.expect(LIBNAME)
    lib = GdsLibrary(name=payload.rstrip(b"\0").decode("ascii"))
    payload, at = rd.expect(UNITS)
    if len(payload) != 16:
        raise GdsParseError("UNITS needs two reals", at)
    lib.user_unit_per_db = decode_real8(payload[:8])
    lib.meters_per_db = decode_real8(payload[8:])
    if not math.isclose(lib.meters_per_db, METERS_PER_DB, rel_tol=1e-12):
        raise GdsParseError(f"database unit {lib.meters_per_db} m, expected 1e-9", at)
    while True:
        rtype, payload, at = rd.next()
        if rtype == ENDLIB:
            break
        if rtype != BGNSTR:
            raise GdsParseError(f"expected BGNSTR or ENDLIB, found {_NAMES[rtype]}", at)
        lib.cells.append(_read_structure(rd, at))
    if rd.pos != len(rd.data):
        raise GdsParseError("trailing bytes after ENDLIB", rd.pos)
    return lib


def read_gds_file(path) -> GdsLibrary:
    with open(path, "rb") as f:
        return read_gds(f)


def iter_records(data: bytes):
    """Yield (offset, length, record_type, data_type) for every record."""
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise GdsParseError("truncated record header", pos)
        length, rtype, dtype = struct.unpack_from(">HBB", data, pos)
        if length < 4:
            raise GdsParseError(f"bad record length {length}", pos)
        yield pos, length, rtype, dtype
        pos += length


def write_jsonl(cell: Cell, sink) -> None:
    """Debug dump: one ``{"layer": n, "rect": [x_ll, y_ll, x_ur, y_ur]}`` per line, in nm."""
    for layer, r in zip(cell.layers.tolist(), cell.rects.tolist()):
        sink.write(json.dumps({"layer": layer, "rect": r}) + "\n")


def read_jsonl(source, name: str = "CELL", bbox: Optional[Rect] = None) -> Cell:
    layers, rects = [], []
    for line in source:
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        layers.append(int(obj["layer"]))
        rects.append([int(v) for v in obj["rect"]])
    return Cell(name, layers, rects, bbox)
