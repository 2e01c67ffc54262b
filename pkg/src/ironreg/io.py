"""Point-cloud (PLY) and correspondence (CSV) file I/O.

The PLY reader supports ASCII and binary-little-endian files with scalar
x/y/z vertex properties; any extra scalar properties are skipped and
point order is preserved. Parse failures raise typed errors carrying the
byte offset (PLY) or line number (CSV) of the problem.
"""

from __future__ import annotations

import numpy as np

from .errors import CorrespondenceParseError, PlyParseError, ShapeError
from .geometry import CorrespondenceSet, as_cloud

_PLY_TYPES = {
    "char": "i1",
    "int8": "i1",
    "uchar": "u1",
    "uint8": "u1",
    "short": "i2",
    "int16": "i2",
    "ushort": "u2",
    "uint16": "u2",
    "int": "i4",
    "int32": "i4",
    "uint": "u4",
    "uint32": "u4",
    "float": "f4",
    "float32": "f4",
    "double": "f8",
    "float64": "f8",
}


def _parse_ply_header(data: bytes):
    """Returns (fmt, elements, body_offset); elements are
    (name, count, [(type, propname), ...]) with None type for lists."""
    offset = 0
    lines = []
    while True:
        end = data.find(b"\n", offset)
        if end < 0:
            raise PlyParseError("header has no end_header line", offset=offset)
        line = data[offset:end].strip(b"\r").decode("ascii", errors="replace")
        lines.append((offset, line))
        offset = end + 1
        if line == "end_header":
            break
        if offset > 65536:
            raise PlyParseError("header exceeds 64 KiB", offset=offset)

    if not lines or lines[0][1] != "ply":
        raise PlyParseError("missing 'ply' magic", offset=0)

    fmt = None
    elements = []
    for at, line in lines[1:-1]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if len(parts) < 2 or parts[1] not in ("ascii", "binary_little_endian"):
                raise PlyParseError(f"unsupported format {line!r}", offset=at)
            fmt = parts[1]
        elif parts[0] == "element":
            if len(parts) != 3:
                raise PlyParseError(f"bad element line {line!r}", offset=at)
            try:
                count = int(parts[2])
            except ValueError:
                raise PlyParseError(f"bad element count {line!r}", offset=at)
            elements.append([parts[1], count, []])
        elif parts[0] == "property":
            if not elements:
                raise PlyParseError("property before any element", offset=at)
            if parts[1] == "list":
                elements[-1][2].append((None, parts[-1]))
            else:
                if parts[1] not in _PLY_TYPES:
                    raise PlyParseError(f"unknown property type {parts[1]!r}", offset=at)
                elements[-1][2].append((_PLY_TYPES[parts[1]], parts[2]))
        elif parts[0] in ("obj_info",):
            continue
        else:
            raise PlyParseError(f"unrecognized header line {line!r}", offset=at)

    if fmt is None:
        raise PlyParseError("header has no format line", offset=0)
    return fmt, elements, offset


def load_point_cloud(path) -> np.ndarray:
    """Read vertex x/y/z coordinates from a PLY file as an (N, 3) array."""
    with open(path, "rb") as fh:
        data = fh.read()
    fmt, elements, body = _parse_ply_header(data)

    vertex = None
    preceding = []
    for elem in elements:
        if elem[0] == "vertex":
            vertex = elem
            break
        preceding.append(elem)
    if vertex is None:
        raise PlyParseError("no vertex element in header", offset=0)
    _, count, props = vertex
    names = [p[1] for p in props]
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise PlyParseError(f"vertex element lacks property {axis!r}", offset=0)
    if any(p[0] is None for p in props):
        raise PlyParseError("list properties in the vertex element are unsupported", offset=0)

    if fmt == "ascii":
        return _read_ascii_vertices(data, body, preceding, count, props)
    return _read_binary_vertices(data, body, preceding, count, props)


def _read_ascii_vertices(data, body, preceding, count, props):
    text = data[body:]
    rows = np.empty((count, 3))
    col = {name: k for k, (_, name) in enumerate(props)}
    want = (col["x"], col["y"], col["z"])
    n_fields = len(props)

    offset = body
    skip = sum(e[1] for e in preceding)
    got = 0
    for raw in text.split(b"\n"):
        line_at = offset
        offset += len(raw) + 1
        line = raw.strip(b"\r").strip()
        if not line:
            continue
        if skip > 0:
            skip -= 1
            continue
        if got >= count:
            break
        fields = line.split()
        if len(fields) != n_fields:
            raise PlyParseError(
                f"vertex line has {len(fields)} fields, expected {n_fields}",
                offset=line_at,
            )
        try:
            rows[got] = [float(fields[w]) for w in want]
        except ValueError:
            raise PlyParseError("non-numeric vertex coordinate", offset=line_at)
        got += 1
    if got < count:
        raise PlyParseError(
            f"header claims {count} vertices, body has {got}", offset=offset
        )
    return rows


def _read_binary_vertices(data, body, preceding, count, props):
    offset = body
    for name, n, eprops in preceding:
        if any(p[0] is None for p in eprops):
            raise PlyParseError(
                f"cannot skip element {name!r} with list properties before vertex",
                offset=offset,
            )
        offset += n * sum(np.dtype("<" + t).itemsize for t, _ in eprops)

    dtype = np.dtype([(name, "<" + t) for t, name in props])
    need = count * dtype.itemsize
    if len(data) - offset < need:
        have = (len(data) - offset) // dtype.itemsize
        raise PlyParseError(
            f"header claims {count} vertices, body has {max(have, 0)}",
            offset=len(data),
        )
    rec = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    out = np.empty((count, 3))
    out[:, 0] = rec["x"]
    out[:, 1] = rec["y"]
    out[:, 2] = rec["z"]
    return out


def save_point_cloud(path, points, binary: bool = True) -> None:
    """Write an (N, 3) cloud as a PLY file with double x/y/z properties.

    Binary mode round-trips coordinates bitwise."""
    pts = as_cloud(points)
    fmt = "binary_little_endian" if binary else "ascii"
    header = (
        "ply\n"
        f"format {fmt} 1.0\n"
        f"element vertex {pts.shape[0]}\n"
        "property double x\n"
        "property double y\n"
        "property double z\n"
        "end_header\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(np.ascontiguousarray(pts, dtype="<f8").tobytes())
        else:
            for p in pts:
                fh.write(f"{p[0]!r} {p[1]!r} {p[2]!r}\n".encode("ascii"))


CSV_HEADER = "px,py,pz,qx,qy,qz"


def load_correspondences(path) -> CorrespondenceSet:
    """Read a 6-column CSV (px,py,pz,qx,qy,qz), optional header line."""
    src = []
    dst = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            fields = [f.strip() for f in stripped.split(",")]
            if lineno == 1 and not _is_number(fields[0]):
                continue  # header
            if len(fields) != 6:
                raise CorrespondenceParseError(
                    f"expected 6 columns, got {len(fields)}", line=lineno
                )
            try:
                vals = [float(f) for f in fields]
            except ValueError:
                raise CorrespondenceParseError(
                    f"non-numeric field in {stripped!r}", line=lineno
                )
            src.append(vals[:3])
            dst.append(vals[3:])
    if not src:
        raise CorrespondenceParseError("file contains no correspondences", line=1)
    return CorrespondenceSet(np.array(src), np.array(dst))


def save_correspondences(path, correspondences: CorrespondenceSet) -> None:
    """Write correspondences with full round-trip precision."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")
        for p, q in zip(correspondences.src, correspondences.dst):
            fh.write(
                f"{p[0]!r},{p[1]!r},{p[2]!r},{q[0]!r},{q[1]!r},{q[2]!r}\n"
            )


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False
