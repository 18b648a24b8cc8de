"""File formats: PGM and CSV images, sinogram CSV, binary operator cache and
flat ``key=value`` manifests."""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .grids import Grid1D, Image, ImageGrid, Sinogram, SparseOperator

PGM_MAXVAL = 65535
ORIENTATION_NOTE = "row 0 = top (largest x2), column 0 = left (smallest x1)"
OPERATOR_MAGIC = b"ABELRDN1"


def _fmt(v: float) -> str:
    return repr(float(v))


# ---------------------------------------------------------------- images

def write_pgm(path, image: Image, binary: bool = True) -> None:
    """Quantise ``[0, max(values)]`` linearly onto ``0..65535``.

    Negative values clip to 0.  The scale (the value mapped to 65535) is kept
    in a header comment so :func:`read_pgm` can undo the quantisation.
    """
    vals = image.values
    top = float(vals.max())
    scale = top if top > 0 else 1.0
    q = np.rint(np.clip(vals, 0.0, None) / scale * PGM_MAXVAL).astype(np.int64)
    m = image.grid.m
    header = (
        f"{'P5' if binary else 'P2'}\n# {ORIENTATION_NOTE}\n# scale {_fmt(scale)}\n"
        f"{m} {m}\n{PGM_MAXVAL}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(q.astype(">u2").tobytes())
        else:
            for row in q:
                fh.write((" ".join(map(str, row)) + "\n").encode("ascii"))


def read_pgm(path) -> Image:
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    scale = 1.0
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            end = data.index(b"\n", pos)
            comment = data[pos + 1:end].decode("ascii").split()
            if len(comment) == 2 and comment[0] == "scale":
                scale = float(comment[1])
            pos = end + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if w != h:
        raise ValueError(f"expected a square image, got {w}x{h}")
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = ">u2" if maxval > 255 else "u1"
        q = np.frombuffer(data[pos:], dtype=dtype, count=w * h)
    elif magic == b"P2":
        q = np.array(data[pos:].split(), dtype=np.int64)
    else:
        raise ValueError(f"unsupported PGM magic {magic!r}")
    if q.size != w * h:
        raise ValueError("truncated PGM raster")
    return Image(ImageGrid(w), q.astype(float).reshape(h, w) / maxval * scale)


def write_image_csv(path, image: Image) -> None:
    """Lossless CSV, one line per grid row (top row first)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        for row in image.values:
            wr.writerow([_fmt(v) for v in row])


def read_image_csv(path) -> Image:
    vals = np.loadtxt(path, delimiter=",", ndmin=2)
    return Image(ImageGrid(vals.shape[0]), vals)


# ------------------------------------------------------------- sinograms

def write_sinogram_csv(path, sino: Sinogram) -> None:
    """Three header lines ``j,s,<j>,<s>``, ``p,<lo>,<hi>,<count>``,
    ``y1,<lo>,<hi>,<count>`` then one value row per ``p`` sample."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["j", "s", sino.j, _fmt(sino.s)])
        for name, ax in (("p", sino.p_axis), ("y1", sino.y_axis)):
            wr.writerow([name, _fmt(ax.lo), _fmt(ax.hi), ax.count])
        for row in sino.values:
            wr.writerow([_fmt(v) for v in row])


def read_sinogram_csv(path) -> Sinogram:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3 or rows[0][:2] != ["j", "s"] or rows[1][0] != "p" or rows[2][0] != "y1":
        raise ValueError(f"{path}: missing sinogram header")
    j, s = int(rows[0][2]), float(rows[0][3])
    p_axis = Grid1D(float(rows[1][1]), float(rows[1][2]), int(rows[1][3]))
    y_axis = Grid1D(float(rows[2][1]), float(rows[2][2]), int(rows[2][3]))
    vals = np.array([[float(v) for v in r] for r in rows[3:]], dtype=float)
    return Sinogram(p_axis, y_axis, vals.reshape(p_axis.count, y_axis.count), j, s)


# -------------------------------------------------------- operator cache

def save_operator(path, op: SparseOperator) -> None:
    """Flat binary: magic, (rows, cols, nnz, block_rows) as int64, then
    row offsets, column indices (int64) and weights (float64), little-endian."""
    mat = op.matrix
    with open(path, "wb") as fh:
        fh.write(OPERATOR_MAGIC)
        fh.write(struct.pack("<4q", mat.shape[0], mat.shape[1], mat.nnz, op.block_rows))
        fh.write(mat.indptr.astype("<i8").tobytes())
        fh.write(mat.indices.astype("<i8").tobytes())
        fh.write(mat.data.astype("<f8").tobytes())


def load_operator(path) -> SparseOperator:
    raw = Path(path).read_bytes()
    if raw[:8] != OPERATOR_MAGIC:
        raise ValueError(f"{path}: not an operator cache file")
    rows, cols, nnz, block_rows = struct.unpack_from("<4q", raw, 8)
    pos = 8 + 32
    indptr = np.frombuffer(raw, "<i8", rows + 1, pos)
    pos += 8 * (rows + 1)
    indices = np.frombuffer(raw, "<i8", nnz, pos)
    pos += 8 * nnz
    data = np.frombuffer(raw, "<f8", nnz, pos)
    return SparseOperator.from_csr(rows, cols, indptr, indices, data, block_rows)


# ------------------------------------------------------------- manifests

def parse_manifest(text: str) -> dict[str, str]:
    """Flat ``section.key=value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"manifest line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"manifest line {lineno}: empty key")
        out[key] = value
    return out


def read_manifest(path) -> dict[str, str]:
    return parse_manifest(Path(path).read_text())


def format_manifest(entries: dict) -> str:
    return "".join(f"{k}={entries[k]}\n" for k in sorted(entries))


def write_manifest(path, entries: dict) -> None:
    Path(path).write_text(format_manifest(entries))


def write_rows_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def write_profile_csv(path, points, values, header=("p", "f")) -> None:
    write_rows_csv(path, header, zip(map(float, points), map(float, values)))


def read_profile_csv(path) -> tuple[np.ndarray, np.ndarray]:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return arr[:, 0], arr[:, 1]
