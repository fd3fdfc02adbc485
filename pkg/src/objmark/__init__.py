"""Blind watermarking of arbitrarily shaped objects in the SA-DWT domain."""
from .kernels import BACKEND
from .object_model import ObjectImage, Report, load_image, load_mask, load_object, save_image
from .watermark import EmbedConfig, detect, embed, extract, generate_watermark

__all__ = [
    "BACKEND",
    "EmbedConfig",
    "ObjectImage",
    "Report",
    "detect",
    "embed",
    "extract",
    "generate_watermark",
    "load_image",
    "load_mask",
    "load_object",
    "save_image",
]
__version__ = "0.1.0"
