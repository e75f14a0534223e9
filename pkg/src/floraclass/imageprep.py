"""Crop/resize/augment pipeline and pixel normalization.

Images are cropped square before resizing so the aspect ratio is never
distorted. Resampling is bilinear with half-pixel centers; when a centered
crop cannot be split evenly, the extra margin pixel goes to the leading
(top/left) edge. Both conventions are pinned by golden tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from floraclass.errors import DataError


@dataclass
class Image:
    """8-bit RGB image, pixels laid out (height, width, 3) row-major."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise DataError(f"expected an (h, w, 3) pixel array, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise DataError(f"zero-dimension image: shape {px.shape}")
        if px.dtype != np.uint8:
            raise DataError(f"expected uint8 pixels, got {px.dtype}")
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def load_image(path: str | Path) -> Image:
    """Read a PNG or JPEG file as RGB."""
    try:
        with PILImage.open(path) as im:
            return Image(np.asarray(im.convert("RGB")))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc


def decode_image(data: bytes) -> Image:
    """Decode PNG or JPEG bytes as RGB."""
    import io

    try:
        with PILImage.open(io.BytesIO(data)) as im:
            return Image(np.asarray(im.convert("RGB")))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot decode image bytes: {exc}") from exc


def save_png(img: Image, path: str | Path) -> None:
    PILImage.fromarray(img.pixels).save(path, format="PNG")


def _lead_centered_offset(full: int, part: int) -> int:
    # odd remainders leave the extra margin pixel on the leading edge
    return (full - part + 1) // 2


def center_crop_square(img: Image) -> Image:
    """Crop to side = min(width, height), window centered."""
    side = min(img.width, img.height)
    x0 = _lead_centered_offset(img.width, side)
    y0 = _lead_centered_offset(img.height, side)
    return Image(img.pixels[y0 : y0 + side, x0 : x0 + side].copy())


def _resample_bilinear(pixels: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    src_h, src_w = pixels.shape[:2]
    if (src_h, src_w) == (out_h, out_w):
        return pixels.copy()
    sy = (np.arange(out_h) + 0.5) * (src_h / out_h) - 0.5
    sx = (np.arange(out_w) + 0.5) * (src_w / out_w) - 0.5
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    fy = (sy - y0)[:, None, None]
    fx = (sx - x0)[None, :, None]
    y0c = np.clip(y0, 0, src_h - 1)
    y1c = np.clip(y0 + 1, 0, src_h - 1)
    x0c = np.clip(x0, 0, src_w - 1)
    x1c = np.clip(x0 + 1, 0, src_w - 1)
    px = pixels.astype(np.float64)
    top = px[np.ix_(y0c, x0c)] * (1 - fx) + px[np.ix_(y0c, x1c)] * fx
    bot = px[np.ix_(y1c, x0c)] * (1 - fx) + px[np.ix_(y1c, x1c)] * fx
    out = top * (1 - fy) + bot * fy
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def resize(img: Image, side: int = 224) -> Image:
    """Bilinear resample to side x side."""
    if side < 1:
        raise DataError(f"resize side must be >= 1, got {side}")
    return Image(_resample_bilinear(img.pixels, side, side))


def apply_augment(img: Image, flip: bool, zoom: float) -> Image:
    """Deterministic augmentation core: horizontal flip then central zoom."""
    if zoom < 1.0:
        raise DataError(f"zoom factor must be >= 1, got {zoom}")
    px = img.pixels
    if flip:
        px = px[:, ::-1]
    if zoom > 1.0:
        crop_w = max(1, int(round(img.width / zoom)))
        crop_h = max(1, int(round(img.height / zoom)))
        if (crop_w, crop_h) != (img.width, img.height):
            x0 = _lead_centered_offset(img.width, crop_w)
            y0 = _lead_centered_offset(img.height, crop_h)
            px = px[y0 : y0 + crop_h, x0 : x0 + crop_w]
            px = _resample_bilinear(px, img.width, img.height)
    return Image(px.copy())


def augment(img: Image, seed) -> Image:
    """Seeded random horizontal flip (p=0.5) and central zoom in [1.0, 1.2]."""
    rng = np.random.default_rng(seed)
    flip = bool(rng.random() < 0.5)
    zoom = float(rng.uniform(1.0, 1.2))
    return apply_augment(img, flip, zoom)


def to_tensor(img: Image) -> np.ndarray:
    """Map uint8 pixels to float32 in [0, 1], shape (side, side, 3)."""
    return img.pixels.astype(np.float32) / np.float32(255.0)


IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def prep_directory(
    in_dir: str | Path,
    out_dir: str | Path,
    side: int = 224,
    augment_copies: int = 0,
    seed: int = 0,
) -> list[Path]:
    """Crop+resize every image in in_dir into out_dir as PNG, plus optional
    augmented copies; returns the written paths."""
    in_dir = Path(in_dir)
    out_dir = Path(out_dir)
    if not in_dir.is_dir():
        raise DataError(f"input directory {in_dir} does not exist")
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    sources = sorted(
        p for p in in_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not sources:
        raise DataError(f"no PNG/JPEG images in {in_dir}")
    for idx, src in enumerate(sources):
        img = resize(center_crop_square(load_image(src)), side)
        dest = out_dir / f"{src.stem}.png"
        save_png(img, dest)
        written.append(dest)
        for copy in range(augment_copies):
            aug = augment(img, seed=[seed, idx, copy])
            dest = out_dir / f"{src.stem}.aug{copy}.png"
            save_png(aug, dest)
            written.append(dest)
    return written
