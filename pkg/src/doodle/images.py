"""PNG ingestion and saving.

Content and style photos always come back as 3-channel RGB; any alpha is
dropped.  Annotation maps keep their natural channel count: greyscale
files become 1-channel maps, RGB files 3-channel, and RGBA files
4-channel with alpha as the last channel.  All values are 32-bit floats
in [0, 255].
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageIOError, ValidationError
from .tensor import DTYPE, require_chw


def _open(path: str | Path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
        return img
    except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
        raise ImageIOError(f"cannot read image {path}: {exc}") from exc


def _to_chw(img: Image.Image) -> np.ndarray:
    arr = np.asarray(img, dtype=DTYPE)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    else:
        arr = arr.transpose(2, 0, 1)
    return np.ascontiguousarray(arr)


def load_image(path: str | Path) -> np.ndarray:
    """Load a photo as a (3, H, W) float tensor, dropping any alpha."""
    return _to_chw(_open(path).convert("RGB"))


def _map_mode(img: Image.Image) -> Image.Image:
    if img.mode in ("L", "I", "I;16", "F"):
        return img.convert("L")
    if "A" in img.getbands() or (img.mode == "P" and "transparency" in img.info):
        return img.convert("RGBA")
    return img.convert("RGB")


def load_map(path: str | Path) -> np.ndarray:
    """Load an annotation map, keeping its channel structure.

    Greyscale gives one channel, RGB three, RGBA four (alpha last).
    """
    return _to_chw(_map_mode(_open(path)))


def encode_png(image: np.ndarray) -> bytes:
    """Encode a (C, H, W) float tensor in [0, 255] as PNG bytes.

    Values are rounded to the nearest 8-bit level; encoding the same
    array twice yields identical bytes.
    """
    require_chw(image, "image")
    c = image.shape[0]
    if c not in (1, 3, 4):
        raise ValidationError(f"cannot encode {c}-channel image as PNG")
    quant = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    if c == 1:
        pil = Image.fromarray(quant[0], mode="L")
    else:
        pil = Image.fromarray(quant.transpose(1, 2, 0))
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def decode_png(blob: bytes, as_map: bool = False) -> np.ndarray:
    """Decode PNG bytes; photos collapse to RGB, maps keep channels."""
    try:
        img = Image.open(io.BytesIO(blob))
        img.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageIOError(f"cannot decode image payload: {exc}") from exc
    return _to_chw(_map_mode(img) if as_map else img.convert("RGB"))


def save_png(image: np.ndarray, path: str | Path) -> None:
    """Write a (C, H, W) float tensor in [0, 255] to a PNG file."""
    Path(path).write_bytes(encode_png(image))
