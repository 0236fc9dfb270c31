"""Float image helpers: tensors live in [-1, 1] as (3, H, W) float32."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputError


def to_uint8(image: np.ndarray) -> np.ndarray:
    """(3, H, W) float in [-1, 1] -> (H, W, 3) uint8."""
    if image.ndim != 3 or image.shape[0] != 3:
        raise InputError(f"expected (3, H, W) image, got {image.shape}")
    arr = np.clip((image + 1.0) * 127.5, 0.0, 255.0)
    return np.rint(arr).astype(np.uint8).transpose(1, 2, 0)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    """(H, W, 3) uint8 -> (3, H, W) float32 in [-1, 1]."""
    return (arr.astype(np.float32) / 127.5 - 1.0).transpose(2, 0, 1)


def image_to_png_bytes(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(image)).save(buf, format="PNG")
    return buf.getvalue()


def save_image(image: np.ndarray, path: str | Path) -> None:
    Path(path).write_bytes(image_to_png_bytes(image))


def load_image(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return from_uint8(np.asarray(img.convert("RGB"), dtype=np.uint8))


def tile_sheet(rows: list[list[np.ndarray]], pad: int = 2) -> np.ndarray:
    """Compose (H, W, 3) uint8 cells into one sheet with white padding."""
    if not rows or not rows[0]:
        raise InputError("tile_sheet needs at least one cell")
    ch = max(cell.shape[0] for row in rows for cell in row)
    cw = max(cell.shape[1] for row in rows for cell in row)
    n_cols = max(len(row) for row in rows)
    sheet = np.full(
        (len(rows) * (ch + pad) + pad, n_cols * (cw + pad) + pad, 3), 255, dtype=np.uint8
    )
    for r, row in enumerate(rows):
        for c, cell in enumerate(row):
            y = pad + r * (ch + pad)
            x = pad + c * (cw + pad)
            sheet[y : y + cell.shape[0], x : x + cell.shape[1]] = cell
    return sheet
