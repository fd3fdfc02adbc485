"""Compare the compiled and numpy kernel backends on the reference object.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time
from pathlib import Path

import numpy as np

from objmark import kernels, load_object, sadwt, watermark

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def transform_job(impl, obj, levels=3):
    def run():
        c = np.array(obj.pixels, dtype=np.int32)
        for level in range(1, levels + 1):
            active = sadwt.lattice_active(obj.mask, level)
            step = 1 << (level - 1)
            impl.lift_pass(c, active, step, 1, False)
            impl.lift_pass(c, active, step, 0, False)
        for level in range(levels, 0, -1):
            active = sadwt.lattice_active(obj.mask, level)
            step = 1 << (level - 1)
            impl.lift_pass(c, active, step, 0, True)
            impl.lift_pass(c, active, step, 1, True)
        return c
    return run


def steer_job(impl, blocks, W, cfg):
    table, vmin = watermark.steer_table(cfg.n, cfg.levels)
    cls, energy = watermark.block_geometry(cfg.levels)
    lam = watermark.STEER_COST / cfg.alpha

    def run():
        for k in range(len(blocks)):
            target = watermark._target_sum(int(W[k]), cfg.margin, cfg)
            impl.steer_block(blocks[k], int(W[k]), table, vmin, cls, energy, lam,
                             cfg.modulus, target, cfg.half)
    return run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    obj = load_object(DATA / "reference.pgm", DATA / "reference_mask.pgm")
    cfg = watermark.EmbedConfig()
    grid = sadwt.forward(obj, cfg.levels)
    origins = sadwt.eligible_origins(obj.mask, cfg.N)[: cfg.L]
    blocks = watermark._block_stack(grid.coeffs, origins, cfg.N)
    W = watermark.generate_watermark(42, len(origins)).values
    found = kernels.backends()
    print(f"object {obj.width}x{obj.height}, {int(obj.mask.sum())} in-mask pixels, "
          f"{len(origins)} blocks; active backend: {kernels.BACKEND}")
    rows = {}
    for name, impl in found.items():
        rows[name] = (
            best_of(transform_job(impl, obj), args.repeat),
            best_of(steer_job(impl, blocks, W, cfg), max(1, args.repeat // 2)),
            best_of(lambda: impl.block_lsb_sums(grid.coeffs, origins, cfg.N, cfg.modulus),
                    args.repeat),
        )
    print(f"{'backend':<8} {'fwd+inv 3 lv':>14} {'steer 1700':>12} {'lsb sums':>10}")
    for name, (a, b, c) in rows.items():
        print(f"{name:<8} {a * 1e3:>12.2f}ms {b * 1e3:>10.1f}ms {c * 1e3:>8.2f}ms")
    if "cython" in rows:
        p, q = rows["python"], rows["cython"]
        print("speedup  " + "  ".join(f"{x / y:.1f}x" for x, y in zip(p, q)))


if __name__ == "__main__":
    main()
