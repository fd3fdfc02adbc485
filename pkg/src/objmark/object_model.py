"""Image, mask and report I/O shared by every stage of the pipeline.

Binary portable graymaps (P5, maxval 255) are read and written natively;
plain P2 graymaps are read as well.  Other rasters (PNG, BMP, TIFF...) go
through Pillow and are converted to 8-bit luminance.
"""
from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np

INF_SENTINEL = "inf"


class ImageFormatError(ValueError):
    """Raised for unreadable, degenerate or unsupported raster files."""


class MaskError(ValueError):
    """Raised when a mask is empty or does not match its image."""


@dataclass
class ObjectImage:
    """8-bit luminance raster plus the binary shape mask of the object.

    ``pixels`` is a ``(height, width)`` uint8 array, ``mask`` a bool array of
    the same shape where True marks a pixel inside the object.
    """

    pixels: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels)
        if self.pixels.ndim != 2:
            raise ImageFormatError(f"expected a 2-D raster, got shape {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            if self.pixels.size and (self.pixels.min() < 0 or self.pixels.max() > 255):
                raise ImageFormatError("pixel values must lie in [0, 255]")
            self.pixels = self.pixels.astype(np.uint8)
        if self.mask is None:
            self.mask = np.ones(self.pixels.shape, dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.pixels.shape:
            raise MaskError(
                f"mask shape {self.mask.shape} differs from image shape {self.pixels.shape}"
            )

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def with_pixels(self, pixels: np.ndarray) -> "ObjectImage":
        return ObjectImage(pixels, self.mask.copy())

    def with_mask(self, mask: np.ndarray) -> "ObjectImage":
        return ObjectImage(self.pixels.copy(), mask)

    def copy(self) -> "ObjectImage":
        return ObjectImage(self.pixels.copy(), self.mask.copy())


# --------------------------------------------------------------------------
# graymap codec

_PNM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _pnm_header(data: bytes):
    """Return (magic, width, height, maxval, offset of first raster byte)."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = _PNM_TOKEN.match(data, pos)
        if m is None:
            raise ImageFormatError("truncated graymap header")
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ImageFormatError("malformed graymap header") from exc
    # exactly one whitespace byte separates the header from binary data
    return magic, width, height, maxval, pos + 1


def _decode_pgm(data: bytes) -> np.ndarray:
    magic, width, height, maxval, offset = _pnm_header(data)
    if width <= 0 or height <= 0:
        raise ImageFormatError("zero-area image")
    if maxval != 255:
        raise ImageFormatError(f"unsupported bit depth (maxval {maxval}, need 255)")
    if magic == b"P5":
        raw = data[offset:offset + width * height]
        if len(raw) != width * height:
            raise ImageFormatError("truncated graymap raster")
        return np.frombuffer(raw, dtype=np.uint8).reshape(height, width).copy()
    if magic == b"P2":
        values = data[offset - 1:].split()
        if len(values) < width * height:
            raise ImageFormatError("truncated graymap raster")
        arr = np.array([int(v) for v in values[: width * height]], dtype=np.int64)
        if arr.min() < 0 or arr.max() > 255:
            raise ImageFormatError("graymap sample outside [0, 255]")
        return arr.astype(np.uint8).reshape(height, width)
    raise ImageFormatError(f"not a graymap (magic {magic!r})")


def encode_pgm(pixels: np.ndarray) -> bytes:
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    return b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes()


def decode_raster(data: bytes) -> np.ndarray:
    """Decode graymap bytes or any Pillow-readable raster to 8-bit luminance."""
    if data[:2] in (b"P5", b"P2"):
        return _decode_pgm(data)
    import io

    from PIL import Image, UnidentifiedImageError

    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageFormatError(f"unreadable raster: {exc}") from exc
    if img.mode in ("I;16", "I;16B", "I;16L", "I", "F"):
        raise ImageFormatError(f"unsupported bit depth (mode {img.mode})")
    if img.mode != "L":
        img = img.convert("L")
    arr = np.asarray(img, dtype=np.uint8)
    if arr.size == 0:
        raise ImageFormatError("zero-area image")
    return arr.copy()


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc.strerror or exc}") from exc


def load_image(path) -> ObjectImage:
    """Load a grayscale raster; the returned object has an all-true mask."""
    return ObjectImage(decode_raster(_read_bytes(path)))


def load_mask(path, width: int, height: int) -> np.ndarray:
    """Load a mask raster; samples above 127 are inside the object."""
    raster = decode_raster(_read_bytes(path))
    if raster.shape != (height, width):
        raise MaskError(
            f"mask is {raster.shape[1]}x{raster.shape[0]}, image is {width}x{height}"
        )
    mask = raster > 127
    if not mask.any():
        raise MaskError("empty mask")
    return mask


def load_object(image_path, mask_path=None) -> ObjectImage:
    obj = load_image(image_path)
    if mask_path is not None:
        obj.mask = load_mask(mask_path, obj.width, obj.height)
    return obj


def save_image(img, path) -> None:
    """Write pixels losslessly; ``.pgm`` (or no suffix) is native, else Pillow."""
    pixels = img.pixels if isinstance(img, ObjectImage) else np.asarray(img)
    path = Path(path)
    if path.suffix.lower() in ("", ".pgm", ".pnm"):
        data = encode_pgm(pixels)
        path.write_bytes(data)
        return
    from PIL import Image

    Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="L").save(path)


def save_mask(mask: np.ndarray, path) -> None:
    save_image(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8), path)


# --------------------------------------------------------------------------
# reports

def _is_rho_key(key: str) -> bool:
    return key == "rho" or key.startswith("rho_") or key.endswith("_rho")


def _is_psnr_key(key: str) -> bool:
    return "psnr" in key


@dataclass
class Report:
    """Ordered list of flat key/value records (one per attack, key, or stage).

    Serialized as JSON Lines.  Infinite PSNR values are written as the string
    ``"inf"`` and parsed back to ``math.inf``.
    """

    records: list = field(default_factory=list)

    def add(self, **fields: Any) -> dict:
        rec = dict(fields)
        self._validate(rec)
        self.records.append(rec)
        return rec

    def __iter__(self) -> Iterator[dict]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def where(self, **match) -> list:
        return [r for r in self.records if all(r.get(k) == v for k, v in match.items())]

    @staticmethod
    def _validate(rec: dict) -> None:
        for key, value in rec.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                continue
            if _is_rho_key(key) and not (-1.0 <= value <= 1.0):
                raise ValueError(f"{key}={value} outside [-1, 1]")
            if _is_psnr_key(key) and not (value > 0 or math.isinf(value)):
                raise ValueError(f"{key}={value} is not a positive PSNR")

    def dumps(self) -> str:
        lines = [json.dumps(_encode_record(r), sort_keys=False) for r in self.records]
        return "".join(line + "\n" for line in lines)

    @classmethod
    def loads(cls, text: str) -> "Report":
        rep = cls()
        for line in text.splitlines():
            line = line.strip()
            if line:
                rep.add(**_decode_record(json.loads(line)))
        return rep


def _encode_value(v):
    if isinstance(v, float) and math.isinf(v):
        return INF_SENTINEL if v > 0 else "-inf"
    if isinstance(v, np.generic):
        return _encode_value(v.item())
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def _encode_record(rec: dict) -> dict:
    return {k: _encode_value(v) for k, v in rec.items()}


def _decode_record(rec: dict) -> dict:
    out = {}
    for k, v in rec.items():
        if v == INF_SENTINEL and _is_psnr_key(k):
            v = math.inf
        out[k] = v
    return out


def save_report(report: Report, path) -> None:
    try:
        Path(path).write_text(report.dumps())
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc.strerror or exc}") from exc


def load_report(path) -> Report:
    return Report.loads(Path(path).read_text())


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path
