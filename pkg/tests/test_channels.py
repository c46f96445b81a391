import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qnetsim import channels as C
from qnetsim import oracle as O

GRID = np.round(np.arange(0.5, 1.0 + 1e-9, 0.05), 10)
fid = st.floats(0.25, 1.0)


def test_transmissivity():
    assert C.fiber_transmissivity(0.0) == 1.0
    assert C.fiber_transmissivity(50.0, 0.2) == pytest.approx(0.1, rel=1e-14)
    assert C.fiber_transmissivity(30.0) == pytest.approx(C.fiber_transmissivity(10.0) * C.fiber_transmissivity(20.0))


def test_depolarize_examples():
    assert C.depolarize_fidelity(0.8, 0.0) == 0.8
    assert C.depolarize_fidelity(1.0, 1.0) == pytest.approx(0.25)
    assert C.depolarize_fidelity(0.9, 0.1) == pytest.approx(0.835, abs=1e-12)


def test_memory_decay_examples():
    assert C.memory_decay(0.9, 0.0, 1.0) == 0.9
    assert C.memory_decay(1.0, math.log(3), 1.0) == pytest.approx(2 / 3, abs=1e-14)
    assert C.memory_decay(0.8, 1.0, 1.0) == pytest.approx(0.610363832351432696, abs=1e-14)


def test_t_non_eb_examples():
    assert C.t_non_eb(2 / 3, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert C.t_non_eb(1.0, 1.0) == pytest.approx(1.098612288668109691, abs=1e-14)
    assert C.t_non_eb(0.8, 1.0) == pytest.approx(0.587786664902119008, abs=1e-14)


def test_swap_examples():
    assert C.swap_fidelity(1.0, 1.0) == 1.0
    assert C.swap_fidelity(0.73, 1.0) == pytest.approx(0.73, abs=1e-14)
    assert C.swap_fidelity(0.9, 0.9) == pytest.approx(0.813333333333333333, abs=1e-14)


def test_purify_examples():
    assert C.purify_step(1.0) == pytest.approx((1.0, 1.0))
    f, p = C.purify_step(0.7)
    assert f == pytest.approx(0.735294117647058823, abs=1e-14)
    assert p == pytest.approx(0.68, abs=1e-14)


def test_qber_examples():
    assert C.qber_from_fidelity(1.0) == 0.0
    assert C.qber_from_fidelity(0.85) == pytest.approx(0.1, abs=1e-14)
    assert C.qber_from_fidelity(0.25) == pytest.approx(0.5)


def test_jitter_examples():
    for mode in ("smooth", "hard"):
        assert C.jitter_swap_multiplier(0.0, 1e-9, mode) == 1.0
    assert C.jitter_swap_multiplier(2e-9, 1e-9, "hard") == 0.0
    assert C.jitter_swap_multiplier(1e-9, 1e-9, "smooth") == pytest.approx(0.606530659712633424, abs=1e-14)


# fast path against the density-matrix oracle on the 0.05 grid

@pytest.mark.parametrize("f1", GRID)
@pytest.mark.parametrize("f2", GRID)
def test_swap_matches_oracle(f1, f2):
    assert C.swap_fidelity(f1, f2) == pytest.approx(O.swap_oracle(f1, f2), abs=1e-10)


@pytest.mark.parametrize("f", GRID)
def test_purify_matches_oracle(f):
    fo, p = C.purify_step(f)
    po, fo_oracle = O.purify_oracle(f, f)
    assert fo == pytest.approx(fo_oracle, abs=1e-10)
    assert p == pytest.approx(po, abs=1e-10)


@pytest.mark.parametrize("f", GRID)
@pytest.mark.parametrize("p", [0.0, 0.05, 0.3, 1.0])
def test_depolarize_matches_oracle(f, p):
    assert C.depolarize_fidelity(f, p) == pytest.approx(O.depolarize_half_fidelity(f, p), abs=1e-10)


@pytest.mark.parametrize("f", GRID)
def test_qber_matches_oracle(f):
    assert C.qber_from_fidelity(f) == pytest.approx(O.zz_error_rate(O.werner(f)), abs=1e-10)


# properties

@given(fid, fid)
def test_swap_symmetric_and_bounded(f1, f2):
    out = C.swap_fidelity(f1, f2)
    assert out == pytest.approx(C.swap_fidelity(f2, f1), abs=1e-15)
    assert 0.25 - 1e-12 <= out <= 1.0
    if min(f1, f2) >= 0.5:
        assert out <= min(f1, f2) + 1e-12


@given(st.floats(0.5001, 0.9999))
def test_purify_improves(f):
    assert C.purify_step(f)[0] > f


@given(fid, st.floats(0.0, 10.0), st.floats(1e-3, 10.0))
def test_decay_monotone_and_bounded(f0, t, t2):
    f = C.memory_decay(f0, t, t2)
    assert min(f0, 0.5) - 1e-12 <= f <= max(f0, 0.5) + 1e-12


@given(st.floats(0.67, 1.0), st.floats(1e-3, 10.0))
def test_t_non_eb_hits_classical_limit(f0, t2):
    assert C.memory_decay(f0, C.t_non_eb(f0, t2), t2) == pytest.approx(2 / 3, abs=1e-12)


def test_pair_t2_combines_rates():
    assert C.pair_t2(1.0, 1.0) == pytest.approx(0.5)
    assert C.decay_both_halves(0.9, 0.3, 2.0, 2.0) == pytest.approx(C.memory_decay(C.memory_decay(0.9, 0.3, 2.0), 0.3, 2.0))


@pytest.mark.parametrize("f1", GRID)
@pytest.mark.parametrize("f2", GRID)
def test_purify_pair_matches_oracle(f1, f2):
    fo, p = C.purify_pair(f1, f2)
    po, fo_oracle = O.purify_oracle(f1, f2)
    assert (fo, p) == pytest.approx((fo_oracle, po), abs=1e-10)
