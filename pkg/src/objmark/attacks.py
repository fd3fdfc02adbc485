"""Attack simulators for robustness testing.

All attacks act on the whole raster and leave the mask alone.  Noise
strengths are percentages of the 8-bit range:

* uniform: ``U[-255 p / 200, +255 p / 200]`` (p% of full range, peak to peak)
* gaussian: ``sigma = 2.55 p``
* laplacian: scale ``b = 2.55 p / sqrt(2)`` (same sigma as the gaussian case)
"""
from __future__ import annotations

import io
import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .object_model import ObjectImage, decode_raster, encode_pgm

KINDS = (
    "none", "uniform_noise", "gaussian_noise", "laplacian_noise", "blur3", "median5",
    "gaussian_filter", "rescale", "jpeg", "jpeg2000", "rewatermark",
)
JPEG2000_ENV = "OBJMARK_JPEG2000_CMD"


class CodecUnavailable(RuntimeError):
    """The codec needed by an attack is not available in this environment."""


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    strength: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        s = self.strength
        if self.kind.endswith("_noise") and s < 0:
            raise ValueError("noise percentage must be >= 0")
        if self.kind == "rescale" and not 0 < s <= 1:
            raise ValueError("rescale factor must be in (0, 1]")
        if self.kind in ("jpeg", "jpeg2000") and not 1 <= s <= 100:
            raise ValueError("quality must be in 1..100")

    @property
    def label(self) -> str:
        if self.kind in ("none", "blur3", "median5", "gaussian_filter"):
            return self.kind
        return f"{self.kind}:{self.strength:g}"


def _pixels(img) -> np.ndarray:
    return img.pixels if isinstance(img, ObjectImage) else np.asarray(img)


def _wrap(img, pixels: np.ndarray):
    pixels = np.clip(pixels, 0, 255).astype(np.uint8)
    if isinstance(img, ObjectImage):
        return img.with_pixels(pixels)
    return pixels


def _round(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def add_noise(img, kind: str, p: float, seed: int = 0):
    if p < 0:
        raise ValueError("noise percentage must be >= 0")
    x = _pixels(img).astype(np.float64)
    if p == 0:
        return _wrap(img, x)
    rng = np.random.default_rng(seed)
    kind = kind.removesuffix("_noise")
    if kind == "uniform":
        a = 255.0 * p / 200.0
        noise = rng.uniform(-a, a, x.shape)
    elif kind == "gaussian":
        noise = rng.normal(0.0, 2.55 * p, x.shape)
    elif kind == "laplacian":
        noise = rng.laplace(0.0, 2.55 * p / np.sqrt(2.0), x.shape)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return _wrap(img, _round(x + noise))


def blur3(img):
    x = _pixels(img).astype(np.float64)
    return _wrap(img, _round(ndimage.uniform_filter(x, size=3, mode="nearest")))


def median5(img):
    return _wrap(img, ndimage.median_filter(_pixels(img), size=5, mode="nearest"))


def gaussian_kernel(size: int = 3, sigma: float = 0.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()


def gaussian_filter(img):
    x = _pixels(img).astype(np.float64)
    return _wrap(img, _round(ndimage.convolve(x, gaussian_kernel(), mode="nearest")))


def _bilinear_axis(x: np.ndarray, size: int, axis: int) -> np.ndarray:
    src = x.shape[axis]
    if size == src:
        return x
    pos = (np.arange(size) + 0.5) * (src / size) - 0.5
    pos = np.clip(pos, 0, src - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, src - 1)
    frac = pos - lo
    a = np.take(x, lo, axis=axis)
    b = np.take(x, hi, axis=axis)
    shape = [1] * x.ndim
    shape[axis] = size
    frac = frac.reshape(shape)
    return a * (1 - frac) + b * frac


def bilinear_resize(x: np.ndarray, height: int, width: int) -> np.ndarray:
    """Pixel-center aligned bilinear resampling (no antialiasing)."""
    x = np.asarray(x, dtype=np.float64)
    return _bilinear_axis(_bilinear_axis(x, height, 0), width, 1)


def rescale_roundtrip(img, factor: float):
    if not 0 < factor <= 1:
        raise ValueError("rescale factor must be in (0, 1]")
    x = _pixels(img)
    h, w = x.shape
    th, tw = int(round(h * factor)), int(round(w * factor))
    if th < 8 or tw < 8:
        raise ValueError(f"rescaled size {tw}x{th} is below 8x8")
    small = np.clip(_round(bilinear_resize(x, th, tw)), 0, 255)
    return _wrap(img, _round(bilinear_resize(small, h, w)))


def jpeg_roundtrip(img, quality: int):
    if not 1 <= quality <= 100:
        raise ValueError("quality must be in 1..100")
    try:
        from PIL import Image, features
    except ImportError as exc:  # pragma: no cover
        raise CodecUnavailable("Pillow is not installed") from exc
    if not features.check("jpg"):
        raise CodecUnavailable("Pillow was built without JPEG support")
    buf = io.BytesIO()
    Image.fromarray(_pixels(img).astype(np.uint8), mode="L").save(
        buf, format="JPEG", quality=int(quality)
    )
    decoded = np.asarray(Image.open(io.BytesIO(buf.getvalue())).convert("L"))
    return _wrap(img, decoded)


def jpeg2000_rate(quality: float) -> float:
    """Compression ratio used for a JPEG2000 'quality' percentage."""
    return 1.0 + (100.0 - quality) / 2.0


def jpeg2000_roundtrip(img, quality: float):
    """JPEG2000 round trip through an external command or Pillow's OpenJPEG.

    When ``$OBJMARK_JPEG2000_CMD`` is set it is used as a command template
    with ``{input}``, ``{output}`` and ``{quality}`` placeholders; the
    command must read a PGM at ``{input}`` and write the decoded PGM (or
    PNG) to ``{output}``.
    """
    if not 1 <= quality <= 100:
        raise ValueError("quality must be in 1..100")
    pixels = _pixels(img).astype(np.uint8)
    template = os.environ.get(JPEG2000_ENV)
    if template:
        with tempfile.TemporaryDirectory() as tmp:
            src, dst = Path(tmp) / "in.pgm", Path(tmp) / "out.pgm"
            src.write_bytes(encode_pgm(pixels))
            cmd = template.format(input=shlex.quote(str(src)), output=shlex.quote(str(dst)),
                                  quality=quality)
            proc = subprocess.run(cmd, shell=True, capture_output=True)
            if proc.returncode != 0 or not dst.exists():
                raise CodecUnavailable(
                    f"JPEG2000 command failed ({proc.returncode}): {proc.stderr.decode()[:200]}"
                )
            decoded = decode_raster(dst.read_bytes())
    else:
        try:
            from PIL import Image, features
        except ImportError as exc:  # pragma: no cover
            raise CodecUnavailable("Pillow is not installed") from exc
        if not features.check("jpg_2000"):
            raise CodecUnavailable(f"no JPEG2000 codec: set ${JPEG2000_ENV}")
        buf = io.BytesIO()
        Image.fromarray(pixels, mode="L").save(
            buf, format="JPEG2000", quality_mode="rates",
            quality_layers=[jpeg2000_rate(quality)], irreversible=True,
        )
        decoded = np.asarray(Image.open(io.BytesIO(buf.getvalue())).convert("L"))
    if decoded.shape != pixels.shape:
        raise CodecUnavailable("JPEG2000 codec changed the image size")
    return _wrap(img, decoded)


def rewatermark(img, mask, seed2, cfg=None):
    from .watermark import embed

    obj = img if isinstance(img, ObjectImage) else ObjectImage(img, mask)
    if mask is not None:
        obj = obj.with_mask(mask)
    return embed(obj, seed2, cfg)[0]


def apply_attack(img: ObjectImage, spec: AttackSpec, cfg=None) -> ObjectImage:
    kind, s = spec.kind, spec.strength
    if kind == "none":
        return img.copy()
    if kind.endswith("_noise"):
        return add_noise(img, kind, s, spec.rng_seed)
    if kind == "blur3":
        return blur3(img)
    if kind == "median5":
        return median5(img)
    if kind == "gaussian_filter":
        return gaussian_filter(img)
    if kind == "rescale":
        return rescale_roundtrip(img, s)
    if kind == "jpeg":
        return jpeg_roundtrip(img, int(s))
    if kind == "jpeg2000":
        return jpeg2000_roundtrip(img, s)
    if kind == "rewatermark":
        return rewatermark(img, img.mask, spec.rng_seed, cfg)
    raise ValueError(f"unknown attack kind {kind!r}")
