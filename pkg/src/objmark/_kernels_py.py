"""Vectorized numpy versions of the hot loops (reference/fallback backend).

Every function here has a twin with an identical signature in the compiled
``_ckernels`` extension; ``objmark.kernels`` picks one at import.
"""
import numpy as np


def _lattice_views(coeffs, active, stride, axis):
    # only lattice lines take part; the pass runs along the other axis
    a = coeffs if axis == 1 else coeffs.T
    m = np.asarray(active, dtype=bool)
    m = m if axis == 1 else m.T
    a, m = a[::stride], m[::stride]
    even = a[:, 0::2 * stride]
    odd = a[:, stride::2 * stride]
    k = odd.shape[1]
    even = even[:, :k]
    pair = m[:, 0::2 * stride][:, :k] & m[:, stride::2 * stride]
    return even, odd, pair


def lift_pass(coeffs, active, stride, axis, inverse):
    """One in-place integer Haar lifting pass along ``axis`` (1 = rows).

    Samples on the stride lattice are paired by global parity: lattice index
    2m (even slot) with 2m+1 (odd slot).  Only pairs where both cells are
    active are lifted; lone samples keep their value.
    """
    even, odd, pair = _lattice_views(coeffs, active, stride, axis)
    if not pair.any():
        return
    e = even[pair]
    o = odd[pair]
    if not inverse:
        d = o - e
        even[pair] = e + (d >> 1)
        odd[pair] = d
    else:
        xe = e - (o >> 1)
        even[pair] = xe
        odd[pair] = o + xe


def steer_block(values, w, table, vmin, cls, energy, lam, modulus, target, max_delta):
    """Return steered coefficients for one block (see watermark.steer_block)."""
    values = np.asarray(values, dtype=np.int64)
    deltas = np.arange(-max_delta, max_delta + 1)
    cand = values[:, None] + deltas[None, :]
    idx = np.clip(cand - vmin, 0, table.shape[1] - 1)
    score = w * table[cls[:, None], idx] - lam * energy[:, None] * (deltas[None, :] ** 2)
    # argmax over a |delta|-sorted order so ties resolve to the smallest move
    order = np.argsort(np.abs(deltas), kind="stable")
    best = order[np.argmax(score[:, order], axis=1)]
    cur = deltas[best].copy()

    zero_cost = np.abs(energy) == 0
    while True:
        lsb = (values + cur) % modulus
        if w * (int(lsb.sum()) - target) >= 0:
            break
        new = cand % modulus
        gain = w * (new - lsb[:, None])
        cost = energy[:, None] * (deltas[None, :] ** 2 - cur[:, None] ** 2)
        cost = np.maximum(cost, 1e-9)
        ratio = np.where(gain > 0, gain / cost, -np.inf)
        if zero_cost.any():
            ratio[zero_cost] = np.where(gain[zero_cost] > 0, np.inf, -np.inf)
        flat = int(np.argmax(ratio))
        i, j = divmod(flat, deltas.size)
        if not np.isfinite(ratio[i, j]) and ratio[i, j] < 0:
            break
        cur[i] = deltas[j]
    return values + cur


def block_lsb_sums(coeffs, origins, side, modulus):
    """Sum of ``coeff mod modulus`` over each side x side block."""
    out = np.empty(len(origins), dtype=np.int64)
    for k, (r, c) in enumerate(origins):
        out[k] = int((coeffs[r:r + side, c:c + side].astype(np.int64) % modulus).sum())
    return out
