"""Independent reference implementations used only by the tests.

Nothing here imports objmark; these are written from the textbook
definitions so that agreement means something.
"""
import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
M64 = (1 << 64) - 1


def s_transform_1d(x):
    """Integer Haar S-transform of a 1-D sequence (Mallat order).

    ``(low, high)``; an odd trailing sample goes to the low band unchanged.
    """
    x = [int(v) for v in x]
    low, high = [], []
    for m in range(len(x) // 2):
        a, b = x[2 * m], x[2 * m + 1]
        d = b - a
        low.append(a + (d // 2))  # Python // floors
        high.append(d)
    if len(x) % 2:
        low.append(x[-1])
    return low, high


def mallat_haar(img, levels):
    """Standard separable integer Haar on a rectangle, Mallat layout.

    Returns a list of per-level dicts {"HL", "LH", "HH"} plus the final LL,
    each a 2-D integer array.
    """
    cur = np.array(img, dtype=np.int64)
    bands = []
    for _ in range(levels):
        rows_l, rows_h = [], []
        for r in cur:
            lo, hi = s_transform_1d(r)
            rows_l.append(lo)
            rows_h.append(hi)
        L = np.array(rows_l, dtype=np.int64)
        H = np.array(rows_h, dtype=np.int64).reshape(cur.shape[0], -1)

        def cols(a):
            lo_c, hi_c = [], []
            for c in a.T:
                lo, hi = s_transform_1d(c)
                lo_c.append(lo)
                hi_c.append(hi)
            lo_a = np.array(lo_c, dtype=np.int64).reshape(a.shape[1], -1).T
            hi_a = np.array(hi_c, dtype=np.int64).reshape(a.shape[1], -1).T
            return lo_a, hi_a

        LL, LH = cols(L)  # low rows/cols, high rows (odd row) low cols
        HL, HH = cols(H)
        bands.append({"HL": HL, "LH": LH, "HH": HH})
        cur = LL
    return bands, cur


def mallat_to_interleaved(shape, bands, ll):
    """Scatter Mallat subbands to the positions they occupy in place.

    Level l lives on the 2**(l-1) lattice; its low slot is the even lattice
    index and its high slot the odd one.
    """
    out = np.full(shape, np.iinfo(np.int64).min, dtype=np.int64)
    for l, b in enumerate(bands, 1):
        step = 1 << (l - 1)
        big = 2 * step
        out[0::big, step::big][: b["HL"].shape[0], : b["HL"].shape[1]] = b["HL"]
        out[step::big, 0::big][: b["LH"].shape[0], : b["LH"].shape[1]] = b["LH"]
        out[step::big, step::big][: b["HH"].shape[0], : b["HH"].shape[1]] = b["HH"]
    big = 1 << len(bands)
    out[0::big, 0::big] = ll
    return out


def splitmix64_reference(seed, count):
    """SplitMix64 with Python big ints, stateful form."""
    state = seed & M64
    out = []
    for _ in range(count):
        state = (state + GOLDEN) & M64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
        out.append(z ^ (z >> 31))
    return out
