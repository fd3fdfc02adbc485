"""In-place lifting shape-adaptive integer Haar DWT.

Coefficients stay at the pixel coordinates they came from (the interleaved
subband arrangement), so the spatial mask doubles as the shape information
of every subband.  Level ``l`` works on the lattice of positions that are
multiples of ``2**(l-1)`` in both directions: a row pass, then a column pass.
Along a pass, lattice index ``2m`` (low-pass slot) is paired with ``2m+1``
(high-pass slot) when both are inside the mask::

    d = x_odd - x_even          # stored at the odd slot
    s = x_even + floor(d / 2)   # stored at the even slot

Unpaired samples keep their value.  Positions outside the mask are never
read or written, so they keep whatever the source raster held there.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from . import kernels
from .object_model import MaskError, ObjectImage

BANDS = ("LL", "HL", "LH", "HH")


@dataclass
class CoeffGrid:
    coeffs: np.ndarray  # int32, (height, width)
    mask: np.ndarray  # bool, untouched spatial mask
    levels: int

    @property
    def height(self) -> int:
        return self.coeffs.shape[0]

    @property
    def width(self) -> int:
        return self.coeffs.shape[1]

    @property
    def written_count(self) -> int:
        """Number of cells carrying transform output (= mask popcount)."""
        return int(np.count_nonzero(self.mask))

    def copy(self) -> "CoeffGrid":
        return CoeffGrid(self.coeffs.copy(), self.mask.copy(), self.levels)


class SubbandId(NamedTuple):
    level: int
    band: str


@dataclass
class WaveletBlock:
    """An aligned ``side x side`` tile; ``values`` is a view into the grid."""

    k: int
    origin: tuple
    side: int
    values: np.ndarray

    @property
    def flat(self) -> np.ndarray:
        """Coefficients I_1..I_{N*N} in raster order (a copy)."""
        return self.values.reshape(-1).astype(np.int64)


def _check_levels(height: int, width: int, levels: int) -> None:
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if (1 << levels) > min(height, width):
        raise ValueError(
            f"{levels} levels need both dimensions >= {1 << levels}, image is {width}x{height}"
        )


def lattice_active(mask: np.ndarray, level: int) -> np.ndarray:
    """Cells taking part in the given level: in-mask and on its lattice."""
    step = 1 << (level - 1)
    active = np.zeros(mask.shape, dtype=np.uint8)
    active[::step, ::step] = mask[::step, ::step]
    return active


def forward_array(pixels: np.ndarray, mask: np.ndarray, levels: int) -> np.ndarray:
    coeffs = np.array(pixels, dtype=np.int32, copy=True)
    for level in range(1, levels + 1):
        active = lattice_active(mask, level)
        step = 1 << (level - 1)
        kernels.lift_pass(coeffs, active, step, 1, False)
        kernels.lift_pass(coeffs, active, step, 0, False)
    return coeffs


def inverse_array(coeffs: np.ndarray, mask: np.ndarray, levels: int) -> np.ndarray:
    out = np.array(coeffs, dtype=np.int32, copy=True)
    for level in range(levels, 0, -1):
        active = lattice_active(mask, level)
        step = 1 << (level - 1)
        kernels.lift_pass(out, active, step, 0, True)
        kernels.lift_pass(out, active, step, 1, True)
    return out


def forward(obj: ObjectImage, levels: int) -> CoeffGrid:
    _check_levels(obj.height, obj.width, levels)
    if not obj.mask.any():
        raise MaskError("empty mask")
    mask = obj.mask.copy()
    return CoeffGrid(forward_array(obj.pixels, mask, levels), mask, levels)


def inverse(grid: CoeffGrid) -> ObjectImage:
    """Reconstruct pixels; values are clamped to [0, 255]."""
    if grid.mask.shape != grid.coeffs.shape:
        raise ValueError("coefficient grid and mask dimensions differ")
    _check_levels(grid.height, grid.width, grid.levels)
    pixels = inverse_array(grid.coeffs, grid.mask, grid.levels)
    return ObjectImage(np.clip(pixels, 0, 255).astype(np.uint8), grid.mask.copy())


def lift_segment_forward(samples: Iterable[tuple]) -> list:
    """Lift one run of ``(lattice index, value)`` samples.

    >>> lift_segment_forward([(0, 10), (1, 14)])
    [(0, 12), (1, 4)]
    >>> lift_segment_forward([(3, 77)])
    [(3, 77)]
    """
    samples = list(samples)
    values = dict(samples)
    out = dict(values)
    for idx, x_even in values.items():
        if idx % 2 == 0 and idx + 1 in values:
            d = values[idx + 1] - x_even
            out[idx] = x_even + d // 2
            out[idx + 1] = d
    return [(idx, out[idx]) for idx, _ in samples]


def lift_segment_inverse(samples: Iterable[tuple]) -> list:
    samples = list(samples)
    values = dict(samples)
    out = dict(values)
    for idx, s in values.items():
        if idx % 2 == 0 and idx + 1 in values:
            d = values[idx + 1]
            out[idx] = s - d // 2
            out[idx + 1] = d + out[idx]
    return [(idx, out[idx]) for idx, _ in samples]


def _band_slices(sid: SubbandId):
    level, band = sid
    step = 1 << level
    half = step >> 1
    row0 = half if band in ("LH", "HH") else 0
    col0 = half if band in ("HL", "HH") else 0
    return slice(row0, None, step), slice(col0, None, step)


def _check_subband(grid: CoeffGrid, sid: SubbandId) -> None:
    level, band = sid
    if band not in BANDS:
        raise ValueError(f"unknown band {band!r}")
    if not 1 <= level <= grid.levels:
        raise ValueError(f"level {level} out of range 1..{grid.levels}")
    if band == "LL" and level != grid.levels:
        raise ValueError("LL is only extractable at the deepest level")


def extract_subband(grid: CoeffGrid, sid: SubbandId):
    """Lazy-wavelet extraction of one subband.

    Returns ``(plane, valid)`` where ``valid`` marks cells whose source
    position lies inside the object.
    """
    sid = SubbandId(*sid)
    _check_subband(grid, sid)
    rows, cols = _band_slices(sid)
    return grid.coeffs[rows, cols].copy(), grid.mask[rows, cols].copy()


def insert_subband(grid: CoeffGrid, sid: SubbandId, plane: np.ndarray) -> None:
    """Write a plane back into the interleaved arrangement (in-mask cells only)."""
    sid = SubbandId(*sid)
    _check_subband(grid, sid)
    rows, cols = _band_slices(sid)
    target = grid.coeffs[rows, cols]
    if plane.shape != target.shape:
        raise ValueError(f"plane shape {plane.shape} != subband shape {target.shape}")
    valid = grid.mask[rows, cols]
    target[valid] = plane[valid]


def subband_ids(levels: int) -> list:
    ids = []
    for level in range(1, levels + 1):
        ids.extend(SubbandId(level, b) for b in ("HL", "LH", "HH"))
    ids.append(SubbandId(levels, "LL"))
    return ids


def eligible_origins(mask: np.ndarray, side: int) -> np.ndarray:
    """Raster-ordered origins of aligned tiles lying fully inside the mask."""
    h, w = mask.shape
    th, tw = h // side, w // side
    if th == 0 or tw == 0:
        return np.zeros((0, 2), dtype=np.int64)
    tiles = mask[: th * side, : tw * side].reshape(th, side, tw, side).all(axis=(1, 3))
    rows, cols = np.nonzero(tiles)
    return np.stack([rows * side, cols * side], axis=1).astype(np.int64)


def level_blocks(grid: CoeffGrid, N: int) -> list:
    if N != 1 << grid.levels:
        raise ValueError(f"block side {N} must equal 2**levels = {1 << grid.levels}")
    return [
        WaveletBlock(k, (int(r), int(c)), N, grid.coeffs[r:r + N, c:c + N])
        for k, (r, c) in enumerate(eligible_origins(grid.mask, N))
    ]
