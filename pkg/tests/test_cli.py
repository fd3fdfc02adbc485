import io
import subprocess
import sys

import numpy as np
import pytest

from conftest import REF_IMAGE, REF_MASK
from objmark import cli, load_image, save_image
from objmark.object_model import save_mask


def run(argv):
    buf = io.StringIO()
    code = cli.main([str(a) for a in argv], out=buf)
    return code, buf.getvalue()


@pytest.fixture(scope="module")
def marked(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    out = d / "wm.pgm"
    code, text = run(["embed", "--image", REF_IMAGE, "--mask", REF_MASK, "--seed", 42,
                      "--out", out, "--report", d / "embed.jsonl"])
    assert code == 0, text
    return d, out


def test_detect_present(marked):
    _, wm = marked
    code, text = run(["detect", "--image", wm, "--mask", REF_MASK, "--seed", 42])
    assert code == 0
    assert text.strip() == "rho=1.000000 PRESENT"


def test_detect_strict_absent(marked):
    _, wm = marked
    code, text = run(["detect", "--image", REF_IMAGE, "--mask", REF_MASK, "--seed", 42, "--strict"])
    assert code == 1 and "ABSENT" in text
    code, _ = run(["detect", "--image", REF_IMAGE, "--mask", REF_MASK, "--seed", 42])
    assert code == 0


def test_missing_mask_is_usage_error(marked, capsys):
    _, wm = marked
    code, _ = run(["detect", "--image", wm, "--seed", 42])
    assert code == 2
    assert "usage" in capsys.readouterr().err


def test_bad_seed_and_missing_file(capsys):
    assert run(["detect", "--image", REF_IMAGE, "--mask", REF_MASK, "--seed", "zz"])[0] == 2
    code, _ = run(["detect", "--image", "/no/such.pgm", "--mask", REF_MASK, "--seed", 1])
    assert code == 3
    assert "cannot read" in capsys.readouterr().err


def test_psnr_identical_prints_inf():
    code, text = run(["psnr", "--a", REF_IMAGE, "--b", REF_IMAGE, "--mask", REF_MASK])
    assert code == 0 and text.strip() == "inf"


def test_extract_bits(marked):
    _, wm = marked
    code, text = run(["extract", "--image", wm, "--mask", REF_MASK])
    bits = text.strip()
    assert code == 0 and len(bits) == 1700 and set(bits) <= {"0", "1"}


def test_attack_then_detect(marked):
    d, wm = marked
    out = d / "j.pgm"
    code, _ = run(["attack", "--image", wm, "--kind", "jpeg", "--strength", 70, "--out", out])
    assert code == 0
    code, text = run(["detect", "--image", out, "--mask", REF_MASK, "--seed", 42])
    assert "PRESENT" in text
    assert run(["attack", "--image", wm, "--kind", "jpeg", "--strength", 0, "--out", out])[0] == 2


def test_inputs_not_mutated(marked):
    d, wm = marked
    before = wm.read_bytes()
    run(["attack", "--image", wm, "--kind", "median5", "--out", d / "m.pgm"])
    run(["detect", "--image", wm, "--mask", REF_MASK, "--seed", 42])
    assert wm.read_bytes() == before


def test_deterministic_outputs(tmp_path):
    outs = []
    for name in ("a.pgm", "b.pgm"):
        run(["embed", "--image", REF_IMAGE, "--mask", REF_MASK, "--seed", "0x10",
             "--out", tmp_path / name])
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\nalpha = 0.5\nL = 100\nthreshold=0.2\n")
    ns = cli.build_parser().parse_args(
        ["detect", "--image", "x", "--mask", "y", "--seed", "1", "--config", str(cfg), "--L", "50"])
    c = cli.build_config(ns)
    assert (c.alpha, c.L, c.threshold, c.n) == (0.5, 50, 0.2, 5)
    with pytest.raises(cli.UsageError):
        cli.parse_config_text("nonsense = 1")
    ns = cli.build_parser().parse_args(
        ["detect", "--image", "x", "--mask", "y", "--seed", "1", "--levels", "2"])
    assert cli.build_config(ns).N == 4


def test_transform_dump(tmp_path, rng):
    px = rng.integers(0, 256, (16, 16)).astype(np.uint8)
    mask = np.ones((16, 16), bool)
    mask[:4, :4] = False
    save_image(px, tmp_path / "i.pgm")
    save_mask(mask, tmp_path / "m.pgm")
    code, text = run(["transform", "--image", tmp_path / "i.pgm", "--mask", tmp_path / "m.pgm",
                      "--levels", 2, "--dump-dir", tmp_path / "dump"])
    assert code == 0 and text.startswith(f"{mask.sum()} coefficients")
    raw = (tmp_path / "dump" / "coeffs.pgm").read_bytes()
    body = np.frombuffer(raw[-16 * 16 * 2:], dtype=">u2").astype(int) - 32768
    assert np.array_equal(body.reshape(16, 16)[~mask], px[~mask])
    valid = load_image(tmp_path / "dump" / "L1_HH_valid.pgm").pixels
    assert np.array_equal(valid > 0, mask[1::2, 1::2])


def test_bench_command(tmp_path):
    lst = tmp_path / "att.txt"
    lst.write_text("none\njpeg 85\n")
    code, text = run(["bench", "--image", REF_IMAGE, "--mask", REF_MASK, "--seed", 42,
                      "--attacks", lst, "--out", tmp_path / "out" / "run", "--keys", 10])
    assert code == 0
    assert "Sans attack" in text
    assert (tmp_path / "out" / "run.csv").read_text().count("\n") == 3
    assert (tmp_path / "out" / "run.jsonl").exists()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "objmark", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "embed" in proc.stdout
