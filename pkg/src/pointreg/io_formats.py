"""Bit-exact file I/O: PLY point clouds, PFM depth maps, camera text files.

All on-disk float payloads are 32-bit except camera files, which are decimal
text at full float64 precision. Writers emit canonical bytes so that
write -> read -> write reproduces files exactly; ASCII floats use the
shortest decimal representation that round-trips through float32.
"""

from __future__ import annotations

import warnings

import numpy as np

from .camera import CameraModel, DepthMap
from .errors import (
    BadShapeError,
    CountMismatchError,
    MalformedHeaderError,
    MissingKeyError,
    NonOrthonormalRotationError,
    UnsupportedPropertyError,
    WrongChannelCountError,
)
from .geometry import PointCloud

__all__ = [
    "read_ply",
    "write_ply",
    "read_pfm",
    "write_pfm",
    "read_camera",
    "write_camera",
]

# Scalar PLY property types we can skip over; "list" properties cannot be
# skipped without interpreting them, so they are rejected.
_PLY_SCALAR_SIZES = {
    "char": 1, "int8": 1,
    "uchar": 1, "uint8": 1,
    "short": 2, "int16": 2,
    "ushort": 2, "uint16": 2,
    "int": 4, "int32": 4,
    "uint": 4, "uint32": 4,
    "float": 4, "float32": 4,
    "double": 8, "float64": 8,
}


def _f32_text(value: float) -> str:
    # Shortest decimal that parses back to the same float32.
    return str(np.float32(value))


def write_ply(cloud: PointCloud, path, format: str = "binary_little_endian") -> None:
    """Write a fully valid cloud as PLY 1.0 with float x/y/z vertices."""
    if format not in ("ascii", "binary_little_endian"):
        raise ValueError(f"unsupported PLY format {format!r}")
    if not np.all(cloud.valid):
        raise ValueError("cannot write a cloud containing invalid points")
    pts = cloud.points.astype("<f4")
    header = (
        "ply\n"
        f"format {format} 1.0\n"
        f"element vertex {len(pts)}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        "end_header\n"
    )
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        if format == "binary_little_endian":
            f.write(pts.tobytes())
        else:
            lines = [
                f"{_f32_text(x)} {_f32_text(y)} {_f32_text(z)}\n"
                for x, y, z in pts
            ]
            f.write("".join(lines).encode("ascii"))


def _parse_ply_header(lines: list[str]):
    if not lines or lines[0].strip() != "ply":
        raise MalformedHeaderError("missing 'ply' magic")
    fmt = None
    count = None
    properties: list[tuple[str, str]] = []  # (type, name)
    in_vertex = False
    saw_vertex = False
    for line in lines[1:]:
        tokens = line.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if len(tokens) != 3 or tokens[2] != "1.0":
                raise MalformedHeaderError(f"bad format line: {line!r}")
            if tokens[1] not in ("ascii", "binary_little_endian"):
                raise MalformedHeaderError(f"unsupported PLY format {tokens[1]!r}")
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise MalformedHeaderError(f"bad element line: {line!r}")
            if tokens[1] != "vertex" or saw_vertex:
                raise MalformedHeaderError(
                    "only a single 'vertex' element is supported"
                )
            try:
                count = int(tokens[2])
            except ValueError:
                raise MalformedHeaderError(f"bad vertex count: {tokens[2]!r}")
            if count < 0:
                raise MalformedHeaderError("negative vertex count")
            in_vertex = True
            saw_vertex = True
        elif tokens[0] == "property":
            if not in_vertex:
                raise MalformedHeaderError("property declared outside an element")
            if tokens[1] == "list":
                raise UnsupportedPropertyError(
                    "list properties on vertices are not supported"
                )
            if len(tokens) != 3:
                raise MalformedHeaderError(f"bad property line: {line!r}")
            properties.append((tokens[1], tokens[2]))
        else:
            raise MalformedHeaderError(f"unrecognized header line: {line!r}")
    if fmt is None:
        raise MalformedHeaderError("missing format line")
    if count is None:
        raise MalformedHeaderError("missing 'element vertex' declaration")
    names = [n for _, n in properties]
    try:
        ix, iy, iz = names.index("x"), names.index("y"), names.index("z")
    except ValueError:
        raise MalformedHeaderError("vertex element must declare x, y, z")
    if not (ix < iy < iz):
        raise MalformedHeaderError("x, y, z must be declared in that order")
    for axis_idx in (ix, iy, iz):
        if properties[axis_idx][0] not in ("float", "float32"):
            raise MalformedHeaderError("x, y, z must be 32-bit floats")
    for ptype, name in properties:
        if ptype not in _PLY_SCALAR_SIZES:
            raise UnsupportedPropertyError(f"unknown property type {ptype!r} for {name!r}")
    extras = [n for n in names if n not in ("x", "y", "z")]
    if extras:
        warnings.warn(
            f"skipping unsupported PLY vertex properties: {', '.join(extras)}"
        )
    return fmt, count, properties, (ix, iy, iz)


def read_ply(path) -> PointCloud:
    """Read a PLY vertex cloud (ascii or binary_little_endian).

    Extra scalar vertex properties are skipped with a warning; ASCII
    coordinates are snapped to float32 so both formats read back equal.
    """
    with open(path, "rb") as f:
        raw = f.read()
    end = raw.find(b"end_header\n")
    if end < 0:
        raise MalformedHeaderError("missing end_header")
    header_text = raw[:end].decode("ascii", errors="replace")
    body = raw[end + len(b"end_header\n"):]
    fmt, count, properties, xyz_idx = _parse_ply_header(header_text.splitlines())

    if fmt == "ascii":
        text_lines = [ln for ln in body.decode("ascii", errors="replace").splitlines() if ln.strip()]
        if len(text_lines) != count:
            raise CountMismatchError(
                f"header declares {count} vertices, body has {len(text_lines)} records"
            )
        pts = np.empty((count, 3))
        for r, line in enumerate(text_lines):
            fields = line.split()
            if len(fields) != len(properties):
                raise CountMismatchError(
                    f"record {r} has {len(fields)} fields, expected {len(properties)}"
                )
            try:
                pts[r] = [float(fields[i]) for i in xyz_idx]
            except ValueError:
                raise CountMismatchError(f"record {r} has a non-numeric coordinate")
        pts = pts.astype(np.float32).astype(np.float64)
    else:
        sizes = [_PLY_SCALAR_SIZES[t] for t, _ in properties]
        record = sum(sizes)
        if len(body) != count * record:
            raise CountMismatchError(
                f"body has {len(body)} bytes, expected {count * record}"
            )
        offsets = np.cumsum([0] + sizes[:-1])
        pts = np.empty((count, 3))
        flat = np.frombuffer(body, dtype=np.uint8).reshape(count, record) if count else np.empty((0, record), np.uint8)
        for col, prop_idx in enumerate(xyz_idx):
            off = offsets[prop_idx]
            pts[:, col] = flat[:, off:off + 4].copy().view("<f4").ravel()
        pts = pts.astype(np.float64)
    return PointCloud(pts)


def write_pfm(depth: DepthMap, path) -> None:
    """Write a grayscale PFM ("Pf"), little-endian, rows bottom-to-top.

    Raw stored values are written for every pixel, including invalid ones,
    so a read -> write round trip is byte-exact.
    """
    data = np.flipud(depth.values.astype("<f4"))
    header = f"Pf\n{depth.width} {depth.height}\n-1.0\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(data.tobytes())


def read_pfm(path) -> DepthMap:
    """Read a grayscale PFM file; non-positive or non-finite pixels become invalid."""
    with open(path, "rb") as f:
        raw = f.read()

    def next_line(start):
        nl = raw.find(b"\n", start)
        if nl < 0:
            raise MalformedHeaderError("truncated PFM header")
        return raw[start:nl].decode("ascii", errors="replace"), nl + 1

    magic, pos = next_line(0)
    if magic == "PF":
        raise WrongChannelCountError("color PFM ('PF') is not supported, expected 'Pf'")
    if magic != "Pf":
        raise MalformedHeaderError(f"bad PFM magic {magic!r}")
    dims, pos = next_line(pos)
    parts = dims.split()
    if len(parts) != 2:
        raise MalformedHeaderError(f"bad PFM dimension line {dims!r}")
    try:
        width, height = int(parts[0]), int(parts[1])
    except ValueError:
        raise MalformedHeaderError(f"bad PFM dimension line {dims!r}")
    if width < 1 or height < 1:
        raise MalformedHeaderError("PFM dimensions must be positive")
    scale_text, pos = next_line(pos)
    try:
        scale = float(scale_text)
    except ValueError:
        raise MalformedHeaderError(f"bad PFM scale {scale_text!r}")
    if scale == 0.0 or not np.isfinite(scale):
        raise MalformedHeaderError("PFM scale must be nonzero and finite")

    body = raw[pos:]
    expected = width * height * 4
    if len(body) != expected:
        raise MalformedHeaderError(
            f"PFM body has {len(body)} bytes, expected {expected}"
        )
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(body, dtype=dtype).reshape(height, width).astype(np.float64)
    data = np.flipud(data).copy()
    valid = np.isfinite(data) & (data > 0.0)
    return DepthMap(data, valid)


def _f64_text(value: float) -> str:
    # repr of a Python float is the shortest exact round-trip decimal.
    return repr(float(value))


def write_camera(cam: CameraModel, path) -> None:
    """Write a camera as flat key/value text (one camera per file)."""
    cam2world = np.eye(4)
    cam2world[:3, :3] = cam.rotation
    cam2world[:3, 3] = cam.translation
    lines = [
        f"width {cam.width}\n",
        f"height {cam.height}\n",
        "intrinsics " + " ".join(_f64_text(v) for v in cam.intrinsics.ravel()) + "\n",
        "cam2world " + " ".join(_f64_text(v) for v in cam2world.ravel()) + "\n",
    ]
    with open(path, "w", encoding="ascii") as f:
        f.writelines(lines)


def _parse_floats(key: str, tokens: list[str], n: int) -> np.ndarray:
    if len(tokens) != n:
        raise BadShapeError(f"key {key!r} has {len(tokens)} values, expected {n}")
    try:
        return np.array([float(t) for t in tokens])
    except ValueError:
        raise BadShapeError(f"key {key!r} has a non-numeric value")


def read_camera(path) -> CameraModel:
    """Parse and validate a camera text file into a CameraModel."""
    entries: dict[str, list[str]] = {}
    with open(path, "r", encoding="ascii") as f:
        for line in f:
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            entries[tokens[0]] = tokens[1:]
    for key in ("width", "height", "intrinsics", "cam2world"):
        if key not in entries:
            raise MissingKeyError(f"camera file missing key {key!r}")

    dims = {}
    for key in ("width", "height"):
        try:
            dims[key] = int(entries[key][0]) if len(entries[key]) == 1 else None
        except ValueError:
            dims[key] = None
        if dims[key] is None or dims[key] < 1:
            raise BadShapeError(f"{key} must be a single positive integer")

    K = _parse_floats("intrinsics", entries["intrinsics"], 9).reshape(3, 3)
    M = _parse_floats("cam2world", entries["cam2world"], 16).reshape(4, 4)
    if not np.array_equal(K[2], [0.0, 0.0, 1.0]):
        raise BadShapeError("intrinsics last row must be (0, 0, 1)")
    if K[0, 0] <= 0.0 or K[1, 1] <= 0.0:
        raise BadShapeError("focal lengths must be positive")
    if not np.array_equal(M[3], [0.0, 0.0, 0.0, 1.0]):
        raise BadShapeError("cam2world bottom row must be (0, 0, 0, 1)")
    R = M[:3, :3]
    if (
        np.max(np.abs(R.T @ R - np.eye(3))) > 1e-6
        or abs(np.linalg.det(R) - 1.0) > 1e-6
    ):
        raise NonOrthonormalRotationError(
            "cam2world rotation block is not orthonormal within 1e-6"
        )
    return CameraModel(
        intrinsics=K,
        rotation=R,
        translation=M[:3, 3],
        width=dims["width"],
        height=dims["height"],
    )
