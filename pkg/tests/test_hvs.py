import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from objmark import hvs


def test_constant_block_has_zero_activity():
    act = hvs.block_activity(np.full(64, 100), 0.318)
    assert act.brightness == 100.0
    assert act.texture == 0.0
    assert act.vm == 0.0


def test_activity_closed_form():
    # half 0, half 10: mean 5, population variance 25
    block = np.array([0] * 32 + [10] * 32)
    act = hvs.block_activity(block, 0.5)
    assert act.brightness == 5.0
    assert act.texture == 25.0
    assert act.vm == pytest.approx(5.0 * 25.0 ** 0.5)


def test_sign_of_zero_is_positive():
    assert hvs.sign(0) == 1
    assert hvs.sign(-0.0) == 1
    assert hvs.sign(np.array([-2, 0, 3])).tolist() == [-1, 1, 1]


def test_classify_mean_threshold():
    acts = [hvs.BlockActivity(k, 0, 0, vm) for k, vm in enumerate([1.0, 2.0, 3.0, 6.0])]
    out, tc = hvs.classify(acts)
    assert tc == 3.0
    assert [a.t for a in out] == [-1, -1, 1, 1]  # vm == Tc counts as high


def test_classify_empty():
    with pytest.raises(ValueError):
        hvs.classify([])
    with pytest.raises(ValueError):
        hvs.classify_values(np.array([]))


@settings(max_examples=50)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50), st.randoms())
def test_threshold_is_order_independent(vms, rnd):
    t1, tc1 = hvs.classify_values(np.array(vms))
    perm = list(range(len(vms)))
    rnd.shuffle(perm)
    t2, tc2 = hvs.classify_values(np.array(vms)[perm])
    assert tc1 == tc2
    assert np.array_equal(t1[perm], t2)


def test_vectorized_matches_scalar(rng):
    blocks = rng.integers(-300, 300, (10, 64))
    b, t, vm = hvs.activity_values(blocks, 0.318)
    for k in range(10):
        act = hvs.block_activity(blocks[k], 0.318)
        assert math.isclose(act.vm, vm[k], rel_tol=1e-12, abs_tol=1e-12)
