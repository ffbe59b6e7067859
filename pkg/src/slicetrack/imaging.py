"""Detection front-end: background difference, thresholding and blob
(connected-component) analysis on 8-bit grayscale PGM frames.

Pixel convention: x = column, y = row, origin top-left, pixel centres at
integer coordinates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .core import DetectionSlice, ParseError, Point

DEFAULT_THRESHOLD = 40
DEFAULT_CONNECTIVITY = 8
DEFAULT_MIN_AREA = 4


@dataclass(frozen=True, eq=False)
class GrayImage:
    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or 0 in px.shape:
            raise ValueError(f"expected a non-empty 2-D image, got shape {px.shape}")
        if px.dtype != np.uint8:
            if px.min() < 0 or px.max() > 255:
                raise ValueError("gray levels must lie in [0, 255]")
            px = px.astype(np.uint8)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True, eq=False)
class BinaryImage:
    pixels: np.ndarray  # (height, width) bool

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"expected a 2-D image, got shape {px.shape}")
        object.__setattr__(self, "pixels", px.astype(bool, copy=False))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Blob:
    pixel_count: int
    centroid: Point
    bounding_box: tuple[int, int, int, int]  # min_x, min_y, max_x, max_y


# -- PGM ---------------------------------------------------------------------

_WS = b" \t\r\n\x0b\x0c"


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping ``#``
    comments. Returns the tokens and the offset just past the last one."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos] in _WS:
            pos += 1
        if pos >= n:
            raise ParseError("truncated header")
        if data[pos] == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < n and data[pos] not in _WS and data[pos] != ord("#"):
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def parse_pgm(data: bytes) -> GrayImage:
    """Decode a P5 (binary) or P2 (ASCII) PGM with maxval <= 255."""
    if len(data) < 2 or data[:2] not in (b"P5", b"P2"):
        raise ParseError(f"unsupported magic {data[:2]!r}; only P2/P5 grayscale")
    magic = data[:2]
    tokens, pos = _header_tokens(data[2:], 3)
    pos += 2
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ParseError(f"bad header values {tokens!r}") from None
    if width <= 0 or height <= 0:
        raise ParseError(f"bad dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise ParseError(f"maxval {maxval} outside 1..255")
    n = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates header and raster
        payload = data[pos + 1 : pos + 1 + n]
        if len(payload) < n:
            raise ParseError(f"truncated raster: {len(payload)} of {n} bytes")
        px = np.frombuffer(payload, dtype=np.uint8)
    else:
        text = re.sub(rb"#[^\r\n]*", b" ", data[pos:])
        values = text.split()
        if len(values) < n:
            raise ParseError(f"truncated raster: {len(values)} of {n} values")
        try:
            px = np.array([int(v) for v in values[:n]], dtype=np.int64)
        except ValueError:
            raise ParseError("non-integer raster value") from None
    if px.max(initial=0) > maxval:
        raise ParseError(f"pixel value above maxval {maxval}")
    return GrayImage(px.reshape(height, width).astype(np.uint8))


def read_pgm(path) -> GrayImage:
    try:
        return parse_pgm(Path(path).read_bytes())
    except ParseError as exc:
        raise ParseError(str(exc), path=path) from None


def encode_pgm(img: GrayImage, binary: bool = True) -> bytes:
    header = f"P{5 if binary else 2}\n{img.width} {img.height}\n255\n".encode()
    if binary:
        return header + img.pixels.tobytes()
    rows = (" ".join(map(str, row)) for row in img.pixels.tolist())
    return header + "\n".join(rows).encode() + b"\n"


def write_pgm(img: GrayImage, path, binary: bool = True) -> None:
    Path(path).write_bytes(encode_pgm(img, binary))


# -- frame stacks ------------------------------------------------------------

_PRINTF_INT = re.compile(r"%(0?)(\d*)d")


def resolve_frame_pattern(pattern: str) -> list[Path]:
    """Files matching a printf-style pattern such as ``frames/f_%04d.pgm``,
    sorted by frame number."""
    directory, name = Path(pattern).parent, Path(pattern).name
    m = _PRINTF_INT.search(name)
    if m is None:
        p = Path(pattern)
        return [p] if p.is_file() else []
    width = int(m.group(2)) if m.group(2) else None
    digits = r"\d+" if width is None or not m.group(1) else rf"\d{{{width},}}"
    regex = re.compile(
        re.escape(name[: m.start()]) + f"({digits})" + re.escape(name[m.end() :]) + "$"
    )
    if not directory.is_dir():
        return []
    found = []
    for entry in directory.iterdir():
        hit = regex.match(entry.name)
        if hit and entry.is_file():
            found.append((int(hit.group(1)), entry))
    return [p for _, p in sorted(found)]


def median_background(frames: Sequence[GrayImage]) -> GrayImage:
    """Per-pixel median across a stack, for when no empty frame is available."""
    stack = np.stack([f.pixels for f in frames])
    return GrayImage(np.median(stack, axis=0).round().astype(np.uint8))


# -- per-frame processing ----------------------------------------------------


def background_difference(frame: GrayImage, background: GrayImage) -> GrayImage:
    if frame.pixels.shape != background.pixels.shape:
        raise ValueError(
            f"frame {frame.pixels.shape} and background {background.pixels.shape} differ"
        )
    diff = np.abs(frame.pixels.astype(np.int16) - background.pixels.astype(np.int16))
    return GrayImage(diff.astype(np.uint8))


def binarize(img: GrayImage, threshold: int) -> BinaryImage:
    """1 where intensity >= threshold."""
    return BinaryImage(img.pixels >= threshold)


_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def label_components(img: BinaryImage, connectivity: int = DEFAULT_CONNECTIVITY):
    """Label array (0 = background) and component count."""
    try:
        structure = _STRUCTURES[connectivity]
    except KeyError:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}") from None
    return ndimage.label(img.pixels, structure=structure)


def connected_components(
    img: BinaryImage,
    connectivity: int = DEFAULT_CONNECTIVITY,
    min_area: int = DEFAULT_MIN_AREA,
) -> list[Blob]:
    """Blobs of 1-pixels with at least ``min_area`` pixels, ordered by the
    top-left corner (min_y, min_x) of their bounding boxes."""
    labels, count = label_components(img, connectivity)
    if count == 0:
        return []
    flat = labels.ravel()
    fg = np.flatnonzero(flat)
    lab = flat[fg]
    ys, xs = np.divmod(fg, labels.shape[1])
    idx = lab - 1
    area = np.bincount(idx, minlength=count)
    sum_x = np.bincount(idx, weights=xs, minlength=count)
    sum_y = np.bincount(idx, weights=ys, minlength=count)
    min_x = np.full(count, labels.shape[1])
    min_y = np.full(count, labels.shape[0])
    max_x = np.full(count, -1)
    max_y = np.full(count, -1)
    np.minimum.at(min_x, idx, xs)
    np.minimum.at(min_y, idx, ys)
    np.maximum.at(max_x, idx, xs)
    np.maximum.at(max_y, idx, ys)
    # first raster pixel breaks ties between boxes sharing a corner
    first = np.full(count, flat.size)
    np.minimum.at(first, idx, fg)

    keep = np.flatnonzero(area >= min_area)
    keep = keep[np.lexsort((first[keep], min_x[keep], min_y[keep]))]
    return [
        Blob(
            int(area[k]),
            Point(sum_x[k] / area[k], sum_y[k] / area[k]),
            (int(min_x[k]), int(min_y[k]), int(max_x[k]), int(max_y[k])),
        )
        for k in keep
    ]


def detect_frame(
    frame: GrayImage,
    background: GrayImage,
    threshold: int = DEFAULT_THRESHOLD,
    connectivity: int = DEFAULT_CONNECTIVITY,
    min_area: int = DEFAULT_MIN_AREA,
) -> list[Point]:
    mask = binarize(background_difference(frame, background), threshold)
    return [b.centroid for b in connected_components(mask, connectivity, min_area)]


def detect_stack(
    frames: Sequence[GrayImage],
    background: GrayImage,
    threshold: int = DEFAULT_THRESHOLD,
    connectivity: int = DEFAULT_CONNECTIVITY,
    min_area: int = DEFAULT_MIN_AREA,
) -> list[DetectionSlice]:
    return [
        DetectionSlice(s, tuple(detect_frame(f, background, threshold, connectivity, min_area)))
        for s, f in enumerate(frames)
    ]
