"""Command-line front end: ``objmark <subcommand> ...``.

Exit status: 0 success, 1 watermark absent (``detect --strict``), 2 usage
error, 3 I/O or codec error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import attacks, bench, sadwt
from .object_model import (
    ImageFormatError, MaskError, ensure_dir, load_object, save_image,
    save_report,
)
from .watermark import EmbedConfig, detect, embed, extract, parse_seed

EXIT_OK, EXIT_ABSENT, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

# flag dest -> EmbedConfig field
_CFG_FLAGS = {
    "n": "n", "alpha": "alpha", "beta": "beta", "levels": "levels", "block_size": "N",
    "L": "L", "threshold": "threshold", "mode": "mode", "margin": "margin",
}
_CFG_TYPES = {
    "n": int, "levels": int, "N": int, "alpha": float, "beta": float, "L": int,
    "threshold": float, "mode": str, "margin": int, "guarantee": str, "flag_rule": str,
    "skip_zero_average": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
    "max_passes": int,
}
_CFG_ALIASES = {"block_size": "N", "t_rho": "threshold", "T_rho": "threshold"}


class UsageError(Exception):
    pass


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` comments and blank lines are ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _CFG_ALIASES.get(key, key)
        if key not in _CFG_TYPES:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        try:
            out[key] = _CFG_TYPES[key](value)
        except ValueError:
            raise UsageError(f"config line {lineno}: bad value {value!r} for {key}") from None
    return out


def build_config(args) -> EmbedConfig:
    """Defaults < config file < explicit flags."""
    fields = {}
    if getattr(args, "config", None):
        try:
            fields.update(parse_config_text(Path(args.config).read_text()))
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc.strerror or exc}") from exc
    for dest, name in _CFG_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            fields[name] = value
    if "levels" in fields and "N" not in fields:
        fields["N"] = 1 << fields["levels"]
    try:
        return EmbedConfig(**fields)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _seed(text):
    try:
        return parse_seed(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_cfg_flags(p):
    g = p.add_argument_group("embedding parameters")
    g.add_argument("--config", help="flat key=value file, overridden by flags")
    g.add_argument("--n", type=int, help="LSB bits per coefficient (5)")
    g.add_argument("--alpha", type=float, help="embedding strength (0.3)")
    g.add_argument("--beta", type=float, help="texture exponent (0.318)")
    g.add_argument("--levels", type=int, help="decomposition levels (3)")
    g.add_argument("--block-size", type=int, dest="block_size", help="block side N (8)")
    g.add_argument("--L", type=int, dest="L", help="watermark length (1700)")
    g.add_argument("--threshold", type=float, help="detection threshold (0.1)")
    g.add_argument("--mode", choices=("literal", "guaranteed"))
    g.add_argument("--margin", type=int, help="guaranteed-mode average margin (4)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="objmark", description="Object-based wavelet watermarking.")
    sub = ap.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("embed", help="embed a watermark into the masked object")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--seed", required=True, type=_seed)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    _add_cfg_flags(p)

    p = sub.add_parser("detect", help="blind detection against a key")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--seed", required=True, type=_seed)
    p.add_argument("--report")
    p.add_argument("--strict", action="store_true", help="exit 1 when the mark is absent")
    _add_cfg_flags(p)

    p = sub.add_parser("extract", help="print the extracted bit string")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    _add_cfg_flags(p)

    p = sub.add_parser("attack", help="apply one attack")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", help="needed only for rewatermark")
    p.add_argument("--kind", required=True, choices=attacks.KINDS)
    p.add_argument("--strength", type=float, default=0.0)
    p.add_argument("--rng-seed", type=int, default=0, dest="rng_seed")
    p.add_argument("--out", required=True)
    _add_cfg_flags(p)

    p = sub.add_parser("psnr", help="masked PSNR between two images")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--mask", required=True)

    p = sub.add_parser("transform", help="dump the transform for debugging")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--dump-dir", required=True, dest="dump_dir")

    p = sub.add_parser("bench", help="run the attack table")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--seed", required=True, type=_seed)
    p.add_argument("--attacks", help="attack list file (default: full table)")
    p.add_argument("--out", required=True, help="output stem: writes .csv and .jsonl")
    p.add_argument("--image-id", default=None, dest="image_id")
    p.add_argument("--keys", type=int, default=200, help="false-alarm sweep size (0 = off)")
    p.add_argument("--workers", type=int, default=1)
    _add_cfg_flags(p)
    return ap


# --------------------------------------------------------------------------
# subcommands

def _fmt_rho(rho: float) -> str:
    return f"{rho:.6f}"


def _cmd_embed(args, out):
    cfg = build_config(args)
    obj = load_object(args.image, args.mask)
    wm, rep = embed(obj, args.seed, cfg)
    save_image(wm, args.out)
    psnr = "inf" if math.isinf(rep.psnr) else f"{rep.psnr:.2f}"
    print(f"embedded {rep.L_used} bits ({rep.eligible} eligible blocks), PSNR {psnr} dB", file=out)
    if args.report:
        save_report(rep.to_report(cfg), args.report)
    return EXIT_OK


def _cmd_detect(args, out):
    cfg = build_config(args)
    res = detect(load_object(args.image, args.mask), None, args.seed, cfg)
    print(f"rho={_fmt_rho(res.rho)} {'PRESENT' if res.present else 'ABSENT'}", file=out)
    if args.report:
        from .object_model import Report

        rep = Report()
        rep.add(**res.to_record(seed=args.seed, image=str(args.image)))
        save_report(rep, args.report)
    if args.strict and not res.present:
        return EXIT_ABSENT
    return EXIT_OK


def _cmd_extract(args, out):
    bits = extract(load_object(args.image, args.mask), None, build_config(args))
    print("".join("1" if b > 0 else "0" for b in bits), file=out)
    return EXIT_OK


def _cmd_attack(args, out):
    cfg = build_config(args)
    try:
        spec = attacks.AttackSpec(args.kind, args.strength, args.rng_seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if spec.kind == "rewatermark" and not args.mask:
        raise UsageError("rewatermark needs --mask")
    obj = load_object(args.image, args.mask)
    save_image(attacks.apply_attack(obj, spec, cfg), args.out)
    print(f"{spec.label} -> {args.out}", file=out)
    return EXIT_OK


def _cmd_psnr(args, out):
    a = load_object(args.a, args.mask)
    b = load_object(args.b, args.mask)
    if a.pixels.shape != b.pixels.shape:
        raise UsageError(f"images differ in size: {a.pixels.shape} vs {b.pixels.shape}")
    v = bench.psnr_masked(a, b)
    print("inf" if math.isinf(v) else f"{v:.4f}", file=out)
    return EXIT_OK


def encode_pgm16(values: np.ndarray) -> bytes:
    h, w = values.shape
    body = np.asarray(values, dtype=">u2").tobytes()
    return b"P5\n%d %d\n65535\n" % (w, h) + body


def _cmd_transform(args, out):
    obj = load_object(args.image, args.mask)
    try:
        grid = sadwt.forward(obj, args.levels)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    d = ensure_dir(args.dump_dir)
    # signed coefficients are stored with a +32768 offset
    (d / "coeffs.pgm").write_bytes(encode_pgm16(grid.coeffs.astype(np.int64) + 32768))
    for sid in sadwt.subband_ids(args.levels):
        plane, valid = sadwt.extract_subband(grid, sid)
        stem = f"L{sid.level}_{sid.band}"
        (d / f"{stem}.pgm").write_bytes(encode_pgm16(plane.astype(np.int64) + 32768))
        save_image(np.where(valid, 255, 0).astype(np.uint8), d / f"{stem}_valid.pgm")
    print(f"{grid.written_count} coefficients written to {d}", file=out)
    return EXIT_OK


def _cmd_bench(args, out):
    cfg = build_config(args)
    specs = None
    if args.attacks:
        try:
            specs = bench.load_attack_list(args.attacks)
        except OSError as exc:
            raise OSError(f"cannot read attack list {args.attacks}: {exc.strerror or exc}") from exc
        except ValueError as exc:
            raise UsageError(f"{args.attacks}: {exc}") from None
    obj = load_object(args.image, args.mask)
    image_id = args.image_id or Path(args.image).stem
    run = bench.run_table2(obj, args.seed, cfg, specs, image_id=image_id,
                           n_keys=args.keys, workers=args.workers)
    stem = Path(args.out)
    if stem.suffix in (".csv", ".jsonl"):
        stem = stem.with_suffix("")
    if stem.parent != Path("."):
        ensure_dir(stem.parent)
    stem.with_suffix(".csv").write_text(run.to_csv())
    save_report(run.to_report(), stem.with_suffix(".jsonl"))
    print(run.summary(), file=out)
    return EXIT_OK


_COMMANDS = {
    "embed": _cmd_embed, "detect": _cmd_detect, "extract": _cmd_extract,
    "attack": _cmd_attack, "psnr": _cmd_psnr, "transform": _cmd_transform,
    "bench": _cmd_bench,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"objmark: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ImageFormatError, MaskError, OSError, attacks.CodecUnavailable) as exc:
        print(f"objmark: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"objmark: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
