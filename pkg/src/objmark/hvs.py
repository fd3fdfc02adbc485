"""Visual model: per-block brightness, texture and the activity classifier.

Brightness is the mean of a block's wavelet coefficients, texture their
population variance, and the activity ``vm = brightness * texture**beta``.
Blocks whose activity reaches the mean activity over the embedded blocks
are "high activity" (t = +1), the others low activity (t = -1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class BlockActivity:
    k: int
    brightness: float
    texture: float
    vm: float
    t: int = 0


def sign(x):
    """Sign with sign(0) = +1, elementwise for arrays."""
    if np.ndim(x) == 0:
        return 1 if x >= 0 else -1
    return np.where(np.asarray(x) >= 0, 1, -1)


def activity_values(blocks: np.ndarray, beta: float):
    """Vectorized brightness/texture/vm for an ``(L, N*N)`` coefficient array."""
    blocks = np.asarray(blocks, dtype=np.float64)
    brightness = blocks.mean(axis=1)
    texture = ((brightness[:, None] - blocks) ** 2).mean(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        powered = np.where(texture > 0, np.power(texture, beta), 0.0)
    return brightness, texture, brightness * powered


def block_activity(block, beta: float, k: int | None = None) -> BlockActivity:
    """Activity of one block (``WaveletBlock`` or flat coefficient array)."""
    values = block.flat if hasattr(block, "origin") else np.asarray(block).reshape(-1)
    if k is None:
        k = getattr(block, "k", 0)
    b, t, vm = activity_values(values[None, :], beta)
    return BlockActivity(k=k, brightness=float(b[0]), texture=float(t[0]), vm=float(vm[0]))


def classify(activities: list):
    """Fill in t for every activity; returns ``(activities, Tc)``."""
    if not activities:
        raise ValueError("classify needs at least one block")
    vm = np.array([a.vm for a in activities], dtype=np.float64)
    tc = math.fsum(vm) / vm.size
    classes = sign(vm - tc)
    return [replace(a, t=int(t)) for a, t in zip(activities, classes)], tc


def classify_values(vm: np.ndarray):
    """Array form of :func:`classify`: returns ``(t, Tc)``."""
    vm = np.asarray(vm, dtype=np.float64)
    if vm.size == 0:
        raise ValueError("classify needs at least one block")
    # fsum is exactly rounded, so Tc does not depend on block order
    tc = math.fsum(vm.tolist()) / vm.size
    return sign(vm - tc), tc
