"""Grayscale rasters, Netpbm I/O, 2x2 box downsampling and image pyramids."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MIN_PYRAMID_DIM = 8


class ImageSizeError(ValueError):
    pass


class PnmParseError(ValueError):
    """Malformed or unsupported Netpbm data; ``offset`` is the byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True, eq=False)
class Image:
    """Real-valued luminance raster; ``data[y, x]`` is pixel (x, y)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ImageSizeError(f"image data must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image data contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_flat(cls, width: int, height: int, values: Sequence[float]) -> Image:
        if len(values) != width * height:
            raise ImageSizeError(f"expected {width * height} values, got {len(values)}")
        return cls(np.asarray(values, dtype=np.float64).reshape(height, width))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    def __repr__(self):
        return f"Image({self.width}x{self.height})"


Pyramid = list  # list[Image], index 0 = full resolution


# --- Netpbm -----------------------------------------------------------------

class _HeaderReader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def _skip_space(self):
        buf = self.buf
        while self.pos < len(buf):
            c = buf[self.pos]
            if c == ord("#"):
                while self.pos < len(buf) and buf[self.pos] not in b"\r\n":
                    self.pos += 1
            elif c in b" \t\r\n\v\f":
                self.pos += 1
            else:
                break

    def token(self, what: str) -> tuple[bytes, int]:
        self._skip_space()
        start = self.pos
        while self.pos < len(self.buf) and self.buf[self.pos] not in b" \t\r\n\v\f#":
            self.pos += 1
        if start == self.pos:
            raise PnmParseError(f"missing {what}", start)
        return self.buf[start:self.pos], start

    def integer(self, what: str) -> int:
        tok, start = self.token(what)
        if not tok.isdigit():
            raise PnmParseError(f"invalid {what} {tok!r}", start)
        self.last_start = start
        return int(tok)


def load_pgm(buf: bytes) -> Image:
    """Decode a plain (P2) or binary (P5) PGM with maxval <= 255."""
    if len(buf) < 2:
        raise PnmParseError("truncated magic number", 0)
    magic = bytes(buf[:2])
    if magic not in (b"P2", b"P5"):
        raise PnmParseError(f"unsupported magic {magic!r}", 0)
    rd = _HeaderReader(bytes(buf))
    rd.pos = 2
    width = rd.integer("width")
    width_pos = rd.last_start
    height = rd.integer("height")
    maxval = rd.integer("maxval")
    maxval_pos = rd.last_start
    if width < 1 or height < 1:
        raise PnmParseError(f"invalid dimensions {width}x{height}", width_pos)
    if not 1 <= maxval <= 255:
        raise PnmParseError(f"unsupported maxval {maxval}", maxval_pos)
    count = width * height

    if magic == b"P5":
        # exactly one whitespace byte separates the header from the raster
        if rd.pos >= len(buf) or buf[rd.pos] not in b" \t\r\n\v\f":
            raise PnmParseError("missing whitespace after maxval", rd.pos)
        start = rd.pos + 1
        payload = buf[start:start + count]
        if len(payload) < count:
            raise PnmParseError(f"truncated payload: expected {count} bytes, got {len(payload)}",
                                start + len(payload))
        values = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
        if values.max(initial=0) > maxval:
            bad = int(np.argmax(values > maxval))
            raise PnmParseError(f"sample exceeds maxval {maxval}", start + bad)
    else:
        values = np.empty(count, dtype=np.float64)
        for i in range(count):
            try:
                v = rd.integer("sample")
            except PnmParseError as exc:
                if exc.offset >= len(buf):
                    raise PnmParseError(f"truncated payload: expected {count} samples, got {i}",
                                        exc.offset) from None
                raise
            if v > maxval:
                raise PnmParseError(f"sample {v} exceeds maxval {maxval}", rd.pos)
            values[i] = v
    return Image(values.reshape(height, width))


def _to_bytes(data: np.ndarray) -> np.ndarray:
    # clamp, then round half-up
    return np.floor(np.clip(data, 0.0, 255.0) + 0.5).astype(np.uint8)


def save_pgm(image: Image) -> bytes:
    """Binary P5 encoding; values clamped to [0, 255] and rounded half-up."""
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + _to_bytes(image.data).tobytes()


def save_ppm(image: Image, overlay: Iterable[tuple[int, int]] = (),
             color: tuple[int, int, int] = (255, 0, 0)) -> bytes:
    """Binary P6 rendering of ``image`` in gray with ``overlay`` pixels painted ``color``.

    Out-of-bounds overlay points are skipped.
    """
    rgb = np.repeat(_to_bytes(image.data)[:, :, None], 3, axis=2)
    h, w = image.shape
    for x, y in overlay:
        if 0 <= x < w and 0 <= y < h:
            rgb[y, x] = color
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    return header + rgb.tobytes()


# --- pyramids ----------------------------------------------------------------

def downsample(image: Image) -> Image:
    """Halve both dimensions by averaging 2x2 blocks; an odd trailing row/column is dropped."""
    h, w = image.shape
    if w < 2 or h < 2:
        raise ImageSizeError(f"cannot downsample a {w}x{h} image")
    h2, w2 = h // 2, w // 2
    d = image.data[:2 * h2, :2 * w2]
    out = ((d[0::2, 0::2] + d[0::2, 1::2]) + (d[1::2, 0::2] + d[1::2, 1::2])) * 0.25
    return Image(out)


def max_pyramid_levels(width: int, height: int) -> int:
    levels = 1
    while width // 2 >= MIN_PYRAMID_DIM and height // 2 >= MIN_PYRAMID_DIM:
        width, height = width // 2, height // 2
        levels += 1
    return levels


def build_pyramid(image: Image, num_levels: int) -> list[Image]:
    """Return ``num_levels`` images, level 0 being ``image`` and each next one downsampled x2."""
    if num_levels < 1:
        raise ValueError(f"num_levels must be >= 1, got {num_levels}")
    if num_levels > 1:
        feasible = max_pyramid_levels(image.width, image.height)
        if num_levels > feasible:
            raise ImageSizeError(
                f"{num_levels} pyramid levels requested for a {image.width}x{image.height} image; "
                f"at most {feasible} keep the top level >= {MIN_PYRAMID_DIM}x{MIN_PYRAMID_DIM}")
    levels = [image]
    for _ in range(num_levels - 1):
        levels.append(downsample(levels[-1]))
    return levels
