"""Binary PGM (P5) output for heightmaps and rasterised curves."""

from __future__ import annotations

import numpy as np


def _check_bits(bits: int) -> int:
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    return 255 if bits == 8 else 65535


def write_pgm(path, image: np.ndarray, maxval: int, comment: str = "") -> None:
    """Write integer ``image`` (rows x cols) as P5; 16-bit samples are big-endian."""
    rows, cols = image.shape
    dtype = ">u1" if maxval < 256 else ">u2"
    header = "P5\n"
    for line in comment.splitlines():
        header += f"# {line}\n"
    header += f"{cols} {rows}\n{maxval}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(image, dtype=dtype).tobytes())


def read_pgm(path):
    """Return ``(image, maxval, comments)``; enough of the format to read our own files back."""
    with open(path, "rb") as fh:
        raw = fh.read()
    pos = 0
    tokens, comments = [], []
    while len(tokens) < 4:
        end = raw.index(b"\n", pos)
        line = raw[pos:end].decode("ascii")
        pos = end + 1
        if line.startswith("#"):
            comments.append(line[1:].strip())
        else:
            tokens.extend(line.split())
    if tokens[0] != "P5":
        raise ValueError("not a binary PGM file")
    cols, rows, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dtype = ">u1" if maxval < 256 else ">u2"
    image = np.frombuffer(raw[pos:], dtype=dtype, count=rows * cols).reshape(rows, cols)
    return image.astype(np.int64), maxval, comments


def rescale(values: np.ndarray, maxval: int):
    """Affine map of ``values`` onto ``0..maxval``; returns (levels, lo, hi)."""
    lo, hi = float(np.min(values)), float(np.max(values))
    span = hi - lo
    if span == 0:
        return np.zeros(values.shape, dtype=np.int64), lo, hi
    levels = np.rint((values - lo) / span * maxval).astype(np.int64)
    return levels, lo, hi


def write_heightmap(path, f1: np.ndarray, bits: int = 8) -> None:
    """Surface heightmap: ``f1[a, b]`` at (x_a, y_b); rows follow y, increasing downward."""
    maxval = _check_bits(bits)
    levels, lo, hi = rescale(f1.T, maxval)
    comment = f"f1 = {lo!r} + level * {(hi - lo)!r} / {maxval}"
    write_pgm(path, levels, maxval, comment)


def write_curve(path, x: np.ndarray, f1: np.ndarray, width: int = 1024, height: int = 512,
                bits: int = 8) -> None:
    """Rasterise the sampled graph: each pixel column marks the rows its samples span."""
    maxval = _check_bits(bits)
    lo, hi = float(np.min(f1)), float(np.max(f1))
    span_y = hi - lo if hi > lo else 1.0
    col = np.minimum(((x - x[0]) / (x[-1] - x[0]) * width).astype(np.int64), width - 1)
    row = np.rint((hi - f1) / span_y * (height - 1)).astype(np.int64)
    top = np.full(width, height, dtype=np.int64)
    bottom = np.full(width, -1, dtype=np.int64)
    np.minimum.at(top, col, row)
    np.maximum.at(bottom, col, row)
    image = np.zeros((height, width), dtype=np.int64)
    r = np.arange(height)[:, None]
    image[(r >= top[None, :]) & (r <= bottom[None, :])] = maxval
    comment = (f"row r <-> f1 = {hi!r} - r * {span_y!r} / {height - 1}\n"
               f"column c <-> x in [{x[0]!r}, {x[-1]!r}] / {width}")
    write_pgm(path, image, maxval, comment)
