"""8-bit raster frames and PNG I/O.

ImageBuffer is the substrate every augmentation and vision operation works
on: row-major, channel-interleaved, 1 (gray) or 3 (RGB) channels.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


class DimensionMismatchError(ValueError):
    """Two buffers that must share a shape do not."""


class ImageBuffer:
    """Immutable 8-bit image. Pixels live in a read-only (h, w, c) uint8 array."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise ValueError(f"expected 2D or 3D pixel array, got ndim={arr.ndim}")
        if arr.shape[2] not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {arr.shape[2]}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be at least 1x1, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.floating) or np.issubdtype(arr.dtype, np.integer):
                if arr.min() < 0 or arr.max() > 255:
                    raise ValueError("pixel values outside [0, 255]")
                arr = arr.astype(np.uint8)
            else:
                raise ValueError(f"unsupported pixel dtype {arr.dtype}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    def __setattr__(self, name, value):  # pragma: no cover - guards misuse
        raise AttributeError("ImageBuffer is immutable")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        h, w, c = self.pixels.shape
        return (w, h, c)

    @property
    def data(self) -> bytes:
        """Raw row-major, channel-interleaved bytes (len = w*h*c)."""
        return self.pixels.tobytes()

    @classmethod
    def from_bytes(cls, width: int, height: int, channels: int, data: bytes) -> "ImageBuffer":
        expected = width * height * channels
        if len(data) != expected:
            raise ValueError(
                f"data length {len(data)} != width*height*channels = {expected}"
            )
        arr = np.frombuffer(data, dtype=np.uint8).reshape(height, width, channels)
        return cls(arr)

    @classmethod
    def full(cls, width: int, height: int, value: int, channels: int = 1) -> "ImageBuffer":
        return cls(np.full((height, width, channels), value, dtype=np.uint8))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None  # mutable-sized payload; identity hashing would mislead

    def __repr__(self) -> str:
        return f"ImageBuffer({self.width}x{self.height}x{self.channels})"


def require_same_shape(a: ImageBuffer, b: ImageBuffer) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatchError(
            f"shape mismatch: {a.width}x{a.height}x{a.channels} vs "
            f"{b.width}x{b.height}x{b.channels}"
        )


def load_png(path: str | Path) -> ImageBuffer:
    """Read a PNG as grayscale or RGB depending on the file's bands."""
    with Image.open(path) as im:
        if im.mode in ("L", "1", "I;16"):
            im = im.convert("L")
        else:
            im = im.convert("RGB")
        return ImageBuffer(np.asarray(im))


def save_png(img: ImageBuffer, path: str | Path) -> None:
    arr = img.pixels
    if img.channels == 1:
        Image.fromarray(arr[:, :, 0], mode="L").save(path, format="PNG")
    else:
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def png_bytes(img: ImageBuffer) -> bytes:
    """Encode to PNG in memory (used for protocol FRAME payloads)."""
    import io

    buf = io.BytesIO()
    save_png(img, buf)
    return buf.getvalue()


def from_png_bytes(data: bytes) -> ImageBuffer:
    import io

    return load_png(io.BytesIO(data))
