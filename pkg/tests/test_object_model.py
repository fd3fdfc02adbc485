import math

import numpy as np
import pytest

from objmark import object_model as om
from objmark.object_model import ImageFormatError, MaskError, ObjectImage, Report


def test_pgm_roundtrip(tmp_path, rng):
    px = rng.integers(0, 256, (7, 13), dtype=np.uint8)
    p = tmp_path / "a.pgm"
    om.save_image(px, p)
    back = om.load_image(p)
    assert back.pixels.dtype == np.uint8
    assert np.array_equal(back.pixels, px)
    assert back.mask.all()


def test_ascii_pgm_with_comments():
    data = b"P2\n# hello\n3 2\n255\n0 1 2\n253 254 255\n"
    px = om.decode_raster(data)
    assert px.tolist() == [[0, 1, 2], [253, 254, 255]]


def test_png_roundtrip(tmp_path, rng):
    px = rng.integers(0, 256, (9, 5), dtype=np.uint8)
    p = tmp_path / "a.png"
    om.save_image(px, p)
    assert np.array_equal(om.load_image(p).pixels, px)


def test_sixteen_bit_pgm_rejected():
    data = b"P5\n2 1\n65535\n" + b"\x00\x01\x00\x02"
    with pytest.raises(ImageFormatError):
        om.decode_raster(data)


def test_garbage_rejected():
    with pytest.raises(ImageFormatError):
        om.decode_raster(b"not an image at all")


def test_missing_file():
    with pytest.raises(ImageFormatError):
        om.load_image("/nonexistent/x.pgm")


def test_mask_threshold_and_size(tmp_path):
    m = np.array([[0, 127, 128, 255]], dtype=np.uint8)
    om.save_image(m, tmp_path / "m.pgm")
    assert om.load_mask(tmp_path / "m.pgm", 4, 1).tolist() == [[False, False, True, True]]
    with pytest.raises(MaskError):
        om.load_mask(tmp_path / "m.pgm", 3, 1)


def test_empty_mask(tmp_path):
    om.save_image(np.zeros((3, 3), np.uint8), tmp_path / "m.pgm")
    with pytest.raises(MaskError, match="empty"):
        om.load_mask(tmp_path / "m.pgm", 3, 3)


def test_object_image_validation():
    with pytest.raises((ValueError, MaskError)):
        ObjectImage(np.zeros((2, 2), np.uint8), np.ones((3, 2), bool))
    obj = ObjectImage(np.zeros((2, 3), np.uint8))
    assert (obj.width, obj.height) == (3, 2)
    assert obj.mask.all()


def test_report_roundtrip_with_inf():
    rep = Report()
    rep.add(record="attack", rho=0.25, psnr=math.inf, name="x")
    rep.add(record="attack", rho=-1.0, psnr=40.5)
    back = Report.loads(rep.dumps())
    assert back.records == rep.records
    assert '"inf"' in rep.dumps()
    assert len(back.where(record="attack")) == 2


@pytest.mark.parametrize("fields", [dict(rho=1.5), dict(rho=-1.01), dict(psnr=0.0), dict(psnr=-3.0)])
def test_report_rejects_bad_values(fields):
    with pytest.raises(ValueError):
        Report().add(**fields)
