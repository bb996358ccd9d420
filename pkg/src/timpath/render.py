"""Deterministic portable-pixmap rendering of target areas, material and paths."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .raster import polyline_pixels

WHITE = np.array([255.0, 255.0, 255.0])
MATERIAL_GRAY = np.array([110.0, 110.0, 110.0])
PATH_COLOR = np.array([30.0, 60.0, 220.0])
MATERIAL_ALPHA = 0.6


def encode_ppm(rgb: np.ndarray, binary: bool = True) -> bytes:
    """P6 (binary) or P3 (ASCII) encoding of an ``(H, W, 3)`` uint8 image."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("image must have shape (height, width, 3)")
    rgb = rgb.astype(np.uint8)
    h, w = rgb.shape[:2]
    if binary:
        return f"P6\n{w} {h}\n255\n".encode() + rgb.tobytes()
    lines = [f"P3\n{w} {h}\n255"]
    for row in rgb.reshape(h, w * 3):
        lines.append(" ".join(str(int(v)) for v in row))
    return ("\n".join(lines) + "\n").encode()


def write_ppm(path, rgb: np.ndarray, binary: bool = True) -> None:
    Path(path).write_bytes(encode_ppm(rgb, binary))


def _tokens(data: bytes, count: int, pos: int):
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated pixmap header")
        out.append(data[start:pos])
    return out, pos


def decode_ppm(data: bytes) -> np.ndarray:
    """Decode P3 or P6 data with maxval up to 255 into an ``(H, W, 3)`` uint8 array."""
    (magic, w, h, maxval), pos = _tokens(data, 4, 0)
    if magic not in (b"P3", b"P6"):
        raise ValueError(f"not a P3/P6 pixmap (magic {magic!r})")
    w, h, maxval = int(w), int(h), int(maxval)
    if not 0 < maxval < 256:
        raise ValueError("only 8-bit pixmaps are supported")
    if magic == b"P6":
        raster = np.frombuffer(data, np.uint8, 3 * w * h, pos + 1)
    else:
        raster = np.array(data[pos:].split()[: 3 * w * h], dtype=np.int64)
        if raster.size != 3 * w * h:
            raise ValueError("truncated pixmap data")
    scaled = raster.astype(np.int64) * 255 // maxval
    return scaled.astype(np.uint8).reshape(h, w, 3)


def read_ppm(path) -> np.ndarray:
    return decode_ppm(Path(path).read_bytes())


def _upscale(img: np.ndarray, scale: int) -> np.ndarray:
    return np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)


def render_state(
    shape: tuple[int, int],
    cool=None,
    tab=None,
    fill=None,
    path_points=None,
    scale: int = 8,
) -> np.ndarray:
    """Target areas with material and path on top.

    Cooling share tints a cell green and taboo share red; the fill ratio
    blends in gray with opacity ``0.6 * fill``; the path is drawn as a one
    pixel polyline at ``scale`` pixels per cell.
    """
    h, w = shape
    img = np.tile(WHITE, (h, w, 1))
    if cool is not None:
        c = np.asarray(cool, float)[..., None]
        img = img * (1 - c) + np.array([0.0, 200.0, 0.0]) * c
    if tab is not None:
        t = np.asarray(tab, float)[..., None]
        img = img * (1 - t) + np.array([220.0, 0.0, 0.0]) * t
    if fill is not None:
        a = MATERIAL_ALPHA * np.clip(np.asarray(fill, float), 0.0, 1.0)[..., None]
        img = img * (1 - a) + MATERIAL_GRAY * a
    img = _upscale(img, scale)
    if path_points is not None:
        line = polyline_pixels(path_points, img.shape[:2], scale, 1.0)
        img[line] = PATH_COLOR
    return np.rint(img).astype(np.uint8)


def render_occupancy(mask, scale: int = 1) -> np.ndarray:
    """Occupied cells black, empty cells white."""
    mask = np.asarray(mask, dtype=bool)
    img = np.where(mask[..., None], 0, 255).astype(np.uint8) * np.ones(3, np.uint8)
    return _upscale(img, scale)


def render_heat_table(values, scale: int = 12) -> np.ndarray:
    """Blocks shaded from white (0) to dark blue (1) for a matrix of ratios."""
    v = np.clip(np.asarray(values, float), 0.0, 1.0)
    if v.ndim == 1:
        v = v[:, None]
    low = WHITE
    high = np.array([20.0, 40.0, 140.0])
    img = low * (1 - v[..., None]) + high * v[..., None]
    return np.rint(_upscale(img, scale)).astype(np.uint8)
